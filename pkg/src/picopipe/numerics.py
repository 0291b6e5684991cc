"""Dense numeric core shared by every model in the package.

Vectors and matrices are plain ``numpy.ndarray`` with dtype float64 (row-major
for matrices); the helpers here add the nonlinearities, loss heads, dropout,
initialization, the Adam optimizer, and a finite-difference gradient checker.
All functions are pure: parameter updates return new arrays rather than
mutating inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np

from .rng import Rng

Params = Dict[str, np.ndarray]


def as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def sigmoid(x) -> np.ndarray:
    """Elementwise 1/(1+e^-x), computed without overflow for any finite x."""
    x = as_f64(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh_v(x) -> np.ndarray:
    """Elementwise hyperbolic tangent."""
    return np.tanh(as_f64(x))


def softmax(logits) -> np.ndarray:
    """Shift-invariant softmax over the last axis."""
    z = as_f64(logits)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = as_f64(logits)
    z = z - np.max(z, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def softmax_cross_entropy(logits: np.ndarray, target: int) -> Tuple[float, np.ndarray]:
    """Cross-entropy of softmax(logits) against a target index.

    Returns (loss, d_loss/d_logits). The gradient is softmax(logits) minus the
    one-hot target, the usual fused form.
    """
    logp = log_softmax(logits)
    loss = -float(logp[target])
    grad = np.exp(logp)
    grad[target] -= 1.0
    return loss, grad


def dropout_apply(x: np.ndarray, rate: float, rng: Rng, training: bool) -> np.ndarray:
    """Inverted dropout: zero entries with probability `rate` during training
    and scale survivors by 1/(1-rate); identity at inference."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = rng.random(x.shape) >= rate
    return x * keep / (1.0 - rate)


def xavier_uniform(shape: Tuple[int, ...], rng: Rng) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6/(fan_in+fan_out)).

    For a 2-D weight of shape (out, in) fan_out/fan_in are the two dims; for
    embedding-like tables the same rule is applied to the two axes.
    """
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    else:
        fan_out, fan_in = shape[0], int(np.prod(shape[1:]))
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, shape)


@dataclass
class OptimizerState:
    """Adam accumulator state. `m`/`v` are keyed like the parameter dict."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)


def adam_step(params: Params, grads: Params, state: OptimizerState) -> Tuple[Params, OptimizerState]:
    """One Adam update over a named parameter bundle.

    Uses the folded bias correction: step size lr*sqrt(1-b2^t)/(1-b1^t)
    applied to m/(sqrt(v)+eps). Deterministic; inputs are not mutated.
    """
    t = state.step + 1
    new_m: Params = {}
    new_v: Params = {}
    new_params: Params = {}
    alpha = state.lr * np.sqrt(1.0 - state.beta2**t) / (1.0 - state.beta1**t)
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} for {name!r}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        new_params[name] = p - alpha * m / (np.sqrt(v) + state.eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, OptimizerState(
        lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps,
        step=t, m=new_m, v=new_v,
    )


def grad_check(
    f: Callable[[Params], float],
    params: Params,
    analytic_grads: Params,
    step: float = 1e-5,
    max_coords_per_tensor: int = 200,
    rng: Rng | None = None,
) -> float:
    """Max relative error between analytic gradients and central differences.

    Per tensor, up to `max_coords_per_tensor` coordinates are probed (all of
    them when the tensor is small). The relative error per coordinate is
    |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
    """
    if rng is None:
        rng = Rng(0)
    worst = 0.0
    for name, p in params.items():
        ga = analytic_grads[name]
        n = p.size
        if n <= max_coords_per_tensor:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=max_coords_per_tensor, replace=False)
        flat = p.reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + step
            f_plus = f(params)
            flat[i] = orig - step
            f_minus = f(params)
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise ValueError(f"non-finite objective while probing {name!r}")
            gn = (f_plus - f_minus) / (2.0 * step)
            gav = float(ga.reshape(-1)[i])
            err = abs(gav - gn) / max(1e-8, abs(gav) + abs(gn))
            if err > worst:
                worst = err
    return worst
