"""Post-training per-tensor affine int8 quantization of the dense layers."""
from dataclasses import dataclass

import numpy as np

QMIN, QMAX = -127, 127
SCALE_FLOOR = 1e-12


@dataclass(frozen=True)
class QuantizedTensor:
    values: np.ndarray  # int8
    scale: float
    zero_point: int

    @property
    def shape(self):
        return self.values.shape


def quantize_tensor(w):
    """Map ``w`` onto int8 with ``w ~ (q - zero_point) * scale``.

    The range is widened to include 0 and spread over 254 levels, so the
    extreme values and zero are on the grid and the elementwise error is at
    most ``scale / 2``.
    """
    w = np.asarray(w, dtype=np.float64)
    lo = min(float(w.min(initial=0.0)), 0.0)
    hi = max(float(w.max(initial=0.0)), 0.0)
    scale = max((hi - lo) / (QMAX - QMIN), SCALE_FLOOR)
    # lo lands exactly on QMIN; rint keeps the 254-step span, so hi lands on QMAX
    zero_point = QMIN - int(np.rint(lo / scale))
    q = np.clip(np.rint(w / scale) + zero_point, QMIN, QMAX).astype(np.int8)
    return QuantizedTensor(q, scale, zero_point)


def dequantize(qt):
    return (qt.values.astype(np.float64) - qt.zero_point) * qt.scale


def quantize(m):
    """int8 copy of ``m``; the histogram bandwidth stays in floating point."""
    out = m.copy()
    qd = {}
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        qd[f"W{i}"] = quantize_tensor(w)
        qd[f"b{i}"] = quantize_tensor(b)
    out.quantized = qd
    out.weights = [dequantize(qd[f"W{i}"]) for i in range(len(m.weights))]
    out.biases = [dequantize(qd[f"b{i}"]) for i in range(len(m.biases))]
    out.precision_tag = "int8"
    return out
