import numpy as np

EPS = 1e-8


def adam_init(params):
    return {
        "t": 0,
        "m": {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()},
        "v": {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()},
    }


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999):
    """One bias-corrected Adam update.

    Returns new ``(params, state)``; the inputs are left untouched.
    """
    for name, beta in (("beta1", beta1), ("beta2", beta2)):
        if not 0.8 <= beta <= 0.999:
            raise ValueError(f"{name}={beta} outside the supported range [0.8, 0.999]")
    t = state["t"] + 1
    new_params, new_m, new_v = {}, {}, {}
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for k, p in params.items():
        g = grads[k]
        m = beta1 * state["m"][k] + (1.0 - beta1) * g
        v = beta2 * state["v"][k] + (1.0 - beta2) * g * g
        new_params[k] = p - lr * (m / c1) / (np.sqrt(v / c2) + EPS)
        new_m[k] = m
        new_v[k] = v
    return new_params, {"t": t, "m": new_m, "v": new_v}
