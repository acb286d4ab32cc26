"""Bayesian flow over continuous variables (fractional coordinates, lattice vector).

The input distribution for a continuous block is an isotropic Gaussian
N(mu, rho^-1 I) with a shared scalar precision.  Noisy sender samples
y ~ N(x, alpha^-1 I) sharpen it through conjugate Bayesian updates; the
accuracy schedule beta(t) = sigma^(-2t) - 1 controls how much total
precision has been delivered by process time t in [0, 1].

All functions here are pure.  The arithmetic ones (`output_estimate`,
`loss`) only use elementwise operators, so they accept numpy arrays or
autograd tensors alike; the sampling ones take an explicit numpy
Generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Below this process time gamma(t) is treated as numerically singular and
# output estimates are not formed (training draws t from U(T_MIN, 1),
# samplers substitute the prior-mean estimate instead).
T_MIN = 1e-4


class NearSingularTime(ValueError):
    """Raised when an output estimate is requested at t <= T_MIN."""


@dataclass
class ContinuousState:
    """Input-distribution parameters: mean vector and shared precision."""

    mean: np.ndarray
    precision: float

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        if not np.all(np.isfinite(self.mean)):
            raise ValueError("state mean must be finite")
        if self.precision < 1.0:
            raise ValueError("precision must be >= 1 (prior is 1)")


def prior_state(n: int) -> ContinuousState:
    """Uninformative prior: zero mean, unit precision."""
    return ContinuousState(np.zeros(n), 1.0)


def _check_time(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"process time must lie in [0, 1], got {t}")
    return t


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    return sigma


def beta(t: float, sigma: float) -> float:
    """Cumulative accuracy beta(t) = sigma^(-2t) - 1."""
    t = _check_time(t)
    sigma = _check_sigma(sigma)
    return sigma ** (-2.0 * t) - 1.0


def gamma(t: float, sigma: float) -> float:
    """gamma(t) = beta / (1 + beta) = 1 - sigma^(2t)."""
    t = _check_time(t)
    sigma = _check_sigma(sigma)
    return 1.0 - sigma ** (2.0 * t)


def bayes_update(state: ContinuousState, y: np.ndarray, alpha: float) -> ContinuousState:
    """Conjugate update of (mean, precision) with a sender sample of accuracy alpha."""
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    y = np.asarray(y, dtype=float)
    if y.shape != state.mean.shape:
        raise ValueError(f"sample shape {y.shape} != state shape {state.mean.shape}")
    rho = state.precision + alpha
    mean = (state.mean * state.precision + y * alpha) / rho
    return ContinuousState(mean, rho)


def sender_sample(x: np.ndarray, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Draw y ~ N(x, alpha^-1 I)."""
    x = np.asarray(x, dtype=float)
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return x + rng.standard_normal(x.shape) / math.sqrt(alpha)

def flow_sample(x: np.ndarray, t: float, sigma: float, rng: np.random.Generator):
    """Draw the input state at time t directly: one-shot equivalent of all
    Bayesian updates up to t.

    Returns ``(state, eps)`` where ``eps`` is the standard-normal draw with
    mean = gamma*x + sqrt(gamma*(1-gamma))*eps; networks are trained to
    recover exactly this noise.
    """
    x = np.asarray(x, dtype=float)
    g = gamma(t, sigma)
    eps = rng.standard_normal(x.shape)
    mean = g * x + math.sqrt(g * (1.0 - g)) * eps
    return ContinuousState(mean, 1.0 + beta(t, sigma)), eps


def output_estimate(mu, t: float, sigma: float, eps_hat, wrap: bool = False):
    """Recover the data estimate from the input mean and a noise estimate.

    x_hat = mu / gamma(t) - sqrt((1 - gamma)/gamma) * eps_hat.  With
    ``wrap=True`` the estimate is reduced mod 1 into [0, 1) (fractional
    coordinates); the lattice vector is never wrapped.  ``mu`` and
    ``eps_hat`` may be numpy arrays or autograd tensors.
    """
    t = _check_time(t)
    if t <= T_MIN:
        raise NearSingularTime(f"gamma({t}) is numerically singular (t_min={T_MIN})")
    g = gamma(t, sigma)
    x_hat = mu / g - math.sqrt((1.0 - g) / g) * eps_hat
    if wrap:
        x_hat = x_hat % 1.0
    return x_hat


def loss(x, x_hat, t: float, sigma: float, periodic: bool = False):
    """Per-sample continuous-time loss -ln(sigma) * |x - x_hat|^2 / sigma^(2t).

    With ``periodic=True`` the residual is reduced to the nearest periodic
    image (mod 1 into [-0.5, 0.5)); this is the form used for fractional
    coordinates, whose values are equivalence classes mod 1.  Wrapped
    estimates sit arbitrarily close to 0 or 1 for boundary atoms, and the
    plain residual would charge such atoms a full unit of error.  The loss
    is then zero iff x_hat = x (mod 1).
    """
    t = _check_time(t)
    sigma = _check_sigma(sigma)
    residual = x - x_hat
    if periodic:
        residual = (residual + 0.5) % 1.0 - 0.5
    sq = (residual ** 2).sum()
    return -math.log(sigma) * sq / sigma ** (2.0 * t)
