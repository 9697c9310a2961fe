"""Dense network on top of the histogram layer, with manual reverse-mode gradients.

Architecture: histogram features (B) -> 100 -> 50 -> 30 -> head, ReLU hidden
units, inverted dropout after every hidden layer while training.  The head
is either a scalar point estimate or the pair ``(mu, log sigma^2)``.
"""
from dataclasses import dataclass, field
import copy

import numpy as np

from .._rng import make_rng
from .._validation import check_delay_sets
from .histogram import HistogramLayerParams, hist_backward, hist_forward_sets
from .losses import VAR_FLOOR, head_for_loss, loss_and_head_grad

HIDDEN = (100, 50, 30)
HEAD_WIDTH = {"point": 1, "gaussian": 2}


@dataclass
class MlpModel:
    histogram: HistogramLayerParams
    weights: list
    biases: list
    head: str = "gaussian"
    dropout_p: float = 0.0
    precision_tag: str = "float32"
    quantized: dict = field(default=None, repr=False)

    def __post_init__(self):
        if self.head not in HEAD_WIDTH:
            raise ValueError(f"head must be one of {tuple(HEAD_WIDTH)}")
        if not 0.0 <= self.dropout_p <= 0.2:
            raise ValueError("dropout_p must lie in [0, 0.2]")
        fan_in = self.histogram.n_bins
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape[0] != fan_in or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i} has shape {w.shape} / {b.shape}, expected fan-in {fan_in}")
            fan_in = w.shape[1]
        if fan_in != HEAD_WIDTH[self.head]:
            raise ValueError(f"last layer width {fan_in} does not match the {self.head} head")

    @property
    def n_bins(self):
        return self.histogram.n_bins

    @property
    def layer_shapes(self):
        return [w.shape for w in self.weights]

    def params(self):
        """Trainable parameters by name (arrays are the model's own buffers)."""
        out = {"log_bandwidth": np.array(self.histogram.log_bandwidth)}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"] = w
            out[f"b{i}"] = b
        return out

    def set_params(self, params):
        self.histogram.log_bandwidth = float(params["log_bandwidth"])
        self.weights = [np.asarray(params[f"W{i}"]) for i in range(len(self.weights))]
        self.biases = [np.asarray(params[f"b{i}"]) for i in range(len(self.biases))]

    def copy(self):
        return copy.deepcopy(self)

    def dense_arrays(self):
        """Weights and biases used for inference (dequantized for int8 models)."""
        if self.quantized is None:
            return self.weights, self.biases
        from .quantize import dequantize

        ws = [dequantize(self.quantized[f"W{i}"]) for i in range(len(self.weights))]
        bs = [dequantize(self.quantized[f"b{i}"]) for i in range(len(self.biases))]
        return ws, bs


def init_model(n_bins, head="gaussian", hidden=HIDDEN, dropout_p=0.0, tau_min=0.0, tau_max=100.0, rng_seed=0):
    """Uniform fan-in initialization ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    rng = make_rng(rng_seed)
    widths = [int(n_bins), *hidden, HEAD_WIDTH[head]]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    hist = HistogramLayerParams(int(n_bins), tau_min, tau_max)
    return MlpModel(hist, weights, biases, head=head, dropout_p=dropout_p)


def _dense_forward(feats, weights, biases, dropout_p, rng):
    acts, masks = [feats], []
    h = feats
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        if i == last:
            return z, acts, masks
        h = np.maximum(z, 0.0)
        if rng is not None and dropout_p > 0:
            mask = (rng.random(h.shape) >= dropout_p) / (1.0 - dropout_p)
            h = h * mask
        else:
            mask = None
        masks.append(mask)
        acts.append(h)
    raise ValueError("model has no layers")


def head_outputs(out, head):
    """Map raw head output to ``mu`` (point head) or ``(mu, sigma2)``."""
    if head == "gaussian":
        return out[:, 0], np.exp(out[:, 1]) + VAR_FLOOR
    return out[:, 0]


def mlp_forward(features, m, training=False, rng_seed=None):
    """Evaluate the dense stack on precomputed histogram features.

    ``features`` is ``(B,)`` or ``(n, B)``.  Dropout is active only when
    ``training`` is true (and then needs ``rng_seed``).
    """
    feats = np.asarray(features, dtype=np.float64)
    single = feats.ndim == 1
    feats = np.atleast_2d(feats)
    if feats.shape[1] != m.n_bins:
        raise ValueError(f"expected {m.n_bins} features, got {feats.shape[1]}")
    rng = make_rng(rng_seed) if training and m.dropout_p > 0 else None
    ws, bs = m.dense_arrays()
    out, _, _ = _dense_forward(feats, ws, bs, m.dropout_p, rng)
    res = head_outputs(out, m.head)
    if single:
        return tuple(float(r[0]) for r in res) if m.head == "gaussian" else float(res[0])
    return res


def raw_predict(m, X, batch_size=4096):
    """Raw head output for delay records ``X`` (inference mode), batched."""
    ds = check_delay_sets(X, allow_nonfinite=False)
    ws, bs = m.dense_arrays()
    outs = []
    for start in range(0, ds.n_sets, batch_size):
        part = ds.subset(np.arange(start, min(start + batch_size, ds.n_sets)))
        feats = hist_forward_sets(part, m.histogram)
        out, _, _ = _dense_forward(feats, ws, bs, 0.0, None)
        outs.append(out)
    if not outs:
        return np.empty((0, HEAD_WIDTH[m.head]))
    return np.concatenate(outs, axis=0)


def predict(m, X, batch_size=4096):
    """``mu`` for point models, ``(mu, sigma2)`` for Gaussian models."""
    return head_outputs(raw_predict(m, X, batch_size), m.head)


def grad(m, X, y, loss=None, training=False, rng_seed=None):
    """Exact batch loss gradient with respect to every parameter and every input delay.

    Returns
    -------
    loss_value : float
    grads : dict
        Same keys as :meth:`MlpModel.params`.
    input_grad : ndarray
        ``dL/dtau`` laid out like the flattened delay values of ``X``.
    """
    loss = loss or ("gaussian_nll" if m.head == "gaussian" else "rmse")
    if head_for_loss(loss) != m.head:
        raise ValueError(f"loss {loss!r} does not fit a {m.head} head")
    ds = check_delay_sets(X)
    if ds.n_sets == 0:
        raise ValueError("batch must be non-empty")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size != ds.n_sets:
        raise ValueError("one target per record is required")
    rng = make_rng(rng_seed) if training and m.dropout_p > 0 else None

    feats, cache = hist_forward_sets(ds, m.histogram, return_cache=True)
    out, acts, masks = _dense_forward(feats, m.weights, m.biases, m.dropout_p, rng)
    value, g = loss_and_head_grad(loss, y, out)

    grads = {}
    n_layers = len(m.weights)
    for i in range(n_layers - 1, -1, -1):
        grads[f"W{i}"] = acts[i].T @ g
        grads[f"b{i}"] = g.sum(axis=0)
        g = g @ m.weights[i].T
        if i > 0:
            mask = masks[i - 1]
            if mask is not None:
                g = g * mask
            # ReLU gate: the stored activation is positive exactly where the unit fired
            g = g * (acts[i] > 0)
    d_log_bw, d_values = hist_backward(g, cache)
    grads["log_bandwidth"] = np.array(d_log_bw)
    return value, grads, d_values


def batch_loss(m, X, y, loss):
    """Loss of ``m`` on a full set in inference mode (no dropout)."""
    from .losses import gaussian_nll, msle_loss, rmse_loss

    out = raw_predict(m, X)
    if loss == "gaussian_nll":
        mu, var = head_outputs(out, "gaussian")
        return gaussian_nll(y, mu, var)
    if loss == "rmse":
        return rmse_loss(y, out[:, 0])
    return msle_loss(y, out[:, 0])
