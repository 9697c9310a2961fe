"""Versioned JSON model files (``*.model.json``).

Float models store weights as nested lists of float32 values; int8 models
store nested integer lists plus ``scale`` and ``zero_point`` per tensor.
"""
import json
import os
import tempfile

import numpy as np

from .histogram import HistogramLayerParams
from .network import MlpModel
from .quantize import QuantizedTensor, dequantize

FORMAT = "tlsnet.mlp"
VERSION = 1


def _float_list(a):
    # shortest decimal strings that round-trip through float32
    text = np.asarray(a, dtype=np.float32).astype(str)
    return np.vectorize(float, otypes=[object])(text).tolist()


def model_to_dict(m):
    layers = []
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        if m.precision_tag == "int8":
            qw, qb = m.quantized[f"W{i}"], m.quantized[f"b{i}"]
            layer = {
                "shape": list(w.shape),
                "weight": {"q": qw.values.tolist(), "scale": qw.scale, "zero_point": qw.zero_point},
                "bias": {"q": qb.values.tolist(), "scale": qb.scale, "zero_point": qb.zero_point},
            }
        else:
            layer = {"shape": list(w.shape), "weight": _float_list(w), "bias": _float_list(b)}
        layers.append(layer)
    h = m.histogram
    return {
        "format": FORMAT,
        "version": VERSION,
        "precision_tag": m.precision_tag,
        "head": m.head,
        "dropout_p": m.dropout_p,
        "histogram": {
            "n_bins": h.n_bins,
            "tau_min": h.tau_min,
            "tau_max": h.tau_max,
            "log_bandwidth": h.log_bandwidth,
        },
        "layers": layers,
    }


def model_from_dict(d):
    if d.get("format") != FORMAT:
        raise ValueError(f"not a {FORMAT} document")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported model file version {d.get('version')!r}")
    hist = HistogramLayerParams(**d["histogram"])
    weights, biases, quantized = [], [], {}
    int8 = d["precision_tag"] == "int8"
    for i, layer in enumerate(d["layers"]):
        shape = tuple(layer["shape"])
        if int8:
            for key, name in (("weight", f"W{i}"), ("bias", f"b{i}")):
                e = layer[key]
                quantized[name] = QuantizedTensor(np.asarray(e["q"], dtype=np.int8), float(e["scale"]), int(e["zero_point"]))
            w = dequantize(quantized[f"W{i}"])
            b = dequantize(quantized[f"b{i}"])
        else:
            w = np.asarray(layer["weight"], dtype=np.float32).astype(np.float64)
            b = np.asarray(layer["bias"], dtype=np.float32).astype(np.float64)
        if w.shape != shape:
            raise ValueError(f"layer {i}: stored shape {shape} but weights are {w.shape}")
        weights.append(w.reshape(shape))
        biases.append(b.reshape(shape[1]))
    return MlpModel(
        hist,
        weights,
        biases,
        head=d["head"],
        dropout_p=float(d["dropout_p"]),
        precision_tag=d["precision_tag"],
        quantized=quantized if int8 else None,
    )


def atomic_write_text(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(m, path):
    atomic_write_text(path, json.dumps(model_to_dict(m), separators=(",", ":")))


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
