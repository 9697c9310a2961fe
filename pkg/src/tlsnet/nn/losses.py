"""Batch losses and their gradients with respect to the network head."""
import numpy as np

from ..exceptions import DomainError

VAR_FLOOR = 1e-6


def gaussian_nll(y, mu, sigma2):
    """Mean of ``0.5 log(sigma2) + (y - mu)^2 / (2 sigma2)`` (additive constant 0)."""
    y, mu, sigma2 = (np.asarray(a, dtype=np.float64) for a in (y, mu, sigma2))
    if np.any(sigma2 <= 0):
        raise DomainError("sigma2 must be positive")
    return float(np.mean(0.5 * np.log(sigma2) + 0.5 * (y - mu) ** 2 / sigma2))


def rmse_loss(y_batch, pred_batch):
    y, p = _pair(y_batch, pred_batch)
    return float(np.sqrt(np.mean((y - p) ** 2)))


def msle_loss(y_batch, pred_batch):
    y, p = _pair(y_batch, pred_batch)
    _check_msle_domain(y, p)
    return float(np.mean((np.log1p(y) - np.log1p(p)) ** 2))


def _pair(y, p):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.size} targets vs {p.size} predictions")
    if y.size == 0:
        raise ValueError("empty batch")
    return y, p


def _check_msle_domain(y, p):
    if np.any(y <= -1) or np.any(p <= -1):
        raise DomainError("MSLE needs targets and predictions greater than -1")


LOSSES = ("rmse", "msle", "gaussian_nll")


def head_for_loss(loss):
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}; choose from {LOSSES}")
    return "gaussian" if loss == "gaussian_nll" else "point"


def loss_and_head_grad(loss, y, out):
    """Loss value and ``dL/d(raw head output)``.

    ``out`` is the raw last-layer output: shape ``(n, 1)`` for point heads,
    ``(n, 2)`` holding ``(mu, log sigma^2)`` for the Gaussian head.
    """
    n = y.size
    if loss == "gaussian_nll":
        mu, s = out[:, 0], out[:, 1]
        e = np.exp(s)
        var = e + VAR_FLOOR
        r = y - mu
        value = float(np.mean(0.5 * np.log(var) + 0.5 * r * r / var))
        g = np.empty_like(out)
        g[:, 0] = -r / var / n
        g[:, 1] = (0.5 / var - 0.5 * r * r / (var * var)) * e / n
        return value, g
    pred = out[:, 0]
    if loss == "rmse":
        r = pred - y
        value = float(np.sqrt(np.mean(r * r)))
        g = np.zeros_like(out)
        if value > 0:
            g[:, 0] = r / (n * value)
        return value, g
    if loss == "msle":
        _check_msle_domain(y, pred)
        d = np.log1p(pred) - np.log1p(y)
        g = np.zeros_like(out)
        g[:, 0] = 2.0 * d / (n * (1.0 + pred))
        return float(np.mean(d * d)), g
    raise ValueError(f"unknown loss {loss!r}")
