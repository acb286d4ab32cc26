"""Bayesian flow over categorical variables (atom types, site-symmetry codes).

Each block of D variables with K classes is represented by a (D, K)
row-stochastic matrix theta.  Sender samples live in logit space:
y ~ N(alpha*(K*onehot - 1), alpha*K*I), and the Bayesian update is a
row-wise reweighting theta' = softmax(log theta + y).  The accuracy
schedule is quadratic, beta(t) = t^2 * beta(1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROW_SUM_TOL = 1e-9


@dataclass
class DiscreteState:
    """Input-distribution parameters: one probability row per variable."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim == 1:
            self.probs = self.probs[None, :]
        if np.any(self.probs < 0.0):
            raise ValueError("class probabilities must be nonnegative")
        sums = self.probs.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            raise ValueError(f"rows must sum to 1 within {ROW_SUM_TOL}")

    @property
    def num_classes(self) -> int:
        return self.probs.shape[-1]


def prior_state(n_vars: int, n_classes: int) -> DiscreteState:
    """Uniform prior: every row is 1/K."""
    return DiscreteState(np.full((n_vars, n_classes), 1.0 / n_classes))


def beta(t: float, beta1: float) -> float:
    """Quadratic accuracy schedule beta(t) = t^2 * beta(1)."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"process time must lie in [0, 1], got {t}")
    if beta1 <= 0.0:
        raise ValueError(f"beta(1) must be positive, got {beta1}")
    return t * t * beta1


def one_hot(classes, n_classes: int) -> np.ndarray:
    """Row one-hots for integer class indices (0-based)."""
    classes = np.atleast_1d(np.asarray(classes, dtype=int))
    if np.any(classes < 0) or np.any(classes >= n_classes):
        raise ValueError("class index out of range")
    out = np.zeros((classes.size, n_classes))
    out[np.arange(classes.size), classes] = 1.0
    return out


def sender_sample(e: np.ndarray, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Draw y ~ N(alpha*(K e - 1), alpha*K*I) for one-hot rows e."""
    e = np.asarray(e, dtype=float)
    if alpha < 0.0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    k = e.shape[-1]
    mean = alpha * (k * e - 1.0)
    if alpha == 0.0:
        return np.zeros_like(mean)
    return mean + np.sqrt(alpha * k) * rng.standard_normal(e.shape)


def bayes_update(state: DiscreteState, y: np.ndarray) -> DiscreteState:
    """Row-wise reweighting theta' ~ exp(y) * theta, renormalised."""
    y = np.asarray(y, dtype=float)
    if y.shape != state.probs.shape:
        raise ValueError(f"sample shape {y.shape} != state shape {state.probs.shape}")
    logw = np.log(np.maximum(state.probs, 1e-300)) + y
    logw -= logw.max(axis=-1, keepdims=True)
    w = np.exp(logw)
    denom = w.sum(axis=-1, keepdims=True)
    if np.any(denom <= 0.0) or not np.all(np.isfinite(denom)):
        raise ValueError("degenerate update: all class weights vanished")
    return DiscreteState(w / denom)


def flow_sample(classes, t: float, beta1: float, n_classes: int,
                rng: np.random.Generator) -> DiscreteState:
    """One-shot input state at time t: softmax of a Gaussian logit draw.

    At t=0 the draw is deterministically zero, i.e. exactly the uniform
    prior.
    """
    e = one_hot(classes, n_classes)
    b = beta(t, beta1)
    if b == 0.0:
        y = np.zeros_like(e)
    else:
        y = b * (n_classes * e - 1.0) + np.sqrt(b * n_classes) * rng.standard_normal(e.shape)
    return DiscreteState(_softmax(y))


def _softmax(z):
    """Max-subtracted row softmax; works on numpy arrays and autograd tensors."""
    if isinstance(z, np.ndarray):
        zs = z - z.max(axis=-1, keepdims=True)
        w = np.exp(zs)
        return w / w.sum(axis=-1, keepdims=True)
    import torch

    return torch.softmax(z, dim=-1)


def output_probs(logits):
    """Output distribution: row softmax of per-variable class scores."""
    return _softmax(logits)


def expected_one_hot(probs):
    """Expectation of class one-hots under row distributions.

    This is the probability row itself; kept as a named operation because
    the loss is stated in terms of it.
    """
    return probs


def loss(e, e_hat, t: float, beta1: float, n_classes: int):
    """Per-sample loss K * beta(1) * t * |e - e_hat|^2."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"process time must lie in [0, 1], got {t}")
    sq = ((e - e_hat) ** 2).sum()
    return n_classes * beta1 * t * sq
