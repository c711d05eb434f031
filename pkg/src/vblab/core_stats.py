"""Probability primitives and divergences shared by every other module.

Conventions
-----------
* Squared Hellinger distance is the unnormalized integral
  ``h2 = integral (sqrt(p) - sqrt(q))^2``, which ranges over [0, 2].
  The common half-normalized variant is obtained by halving.
* ``kl_categorical`` / ``kl_second_moment_categorical`` use the directional
  shorthand D(p*||p) = sum p*_s log(p*_s / p_s) and its second moment
  V(p*||p) = sum p*_s log^2(p*_s / p_s), with 0 * log(0/q) = 0.
* Positive mass placed against zero mass raises `InfiniteDivergenceError`
  instead of silently returning inf.

All functions are pure; RNG state is always passed in explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .rng import stream_rng

if TYPE_CHECKING:  # pragma: no cover
    from .transport import MixingMeasure

__all__ = [
    "SimplexVector",
    "GaussianSpec",
    "DirichletSpec",
    "DimensionMismatchError",
    "InfiniteDivergenceError",
    "kl_categorical",
    "kl_second_moment_categorical",
    "hellinger_sq_categorical",
    "hellinger_sq_gaussian",
    "hellinger_sq_mixture_mc",
    "kl_dual_check",
    "log_sum_exp",
    "digamma",
]

SIMPLEX_TOL = 1e-12
PROB_FLOOR = 1e-300


class DimensionMismatchError(ValueError):
    """Inputs that must share a shape do not."""


class InfiniteDivergenceError(ValueError):
    """KL-type divergence is +inf: positive mass against zero mass."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SimplexVector:
    """A probability vector on K categories."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = _readonly(np.atleast_1d(self.probs))
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a nonempty 1-d vector")
        if not np.all(np.isfinite(probs)):
            raise ValueError("probs must be finite")
        if np.any(probs < 0):
            raise ValueError(f"probs must be nonnegative, got min {probs.min()}")
        total = float(probs.sum())
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"probs must sum to 1 within {SIMPLEX_TOL}, got {total!r}")
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.size

    @staticmethod
    def uniform(k: int) -> "SimplexVector":
        return SimplexVector(np.full(k, 1.0 / k))

    @staticmethod
    def normalized(weights: np.ndarray) -> "SimplexVector":
        w = np.asarray(weights, dtype=np.float64)
        return SimplexVector(w / w.sum())


@dataclass(frozen=True)
class GaussianSpec:
    """Isotropic Gaussian: mean vector plus a scalar variance scale.

    Covariance is ``variance_scale * I_d``.
    """

    mean: np.ndarray
    variance_scale: float = 1.0

    def __post_init__(self) -> None:
        mean = _readonly(np.atleast_1d(self.mean))
        if mean.ndim != 1 or not np.all(np.isfinite(mean)):
            raise ValueError("mean must be a finite 1-d vector")
        if not (self.variance_scale > 0 and math.isfinite(self.variance_scale)):
            raise ValueError(f"variance_scale must be positive, got {self.variance_scale!r}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance_scale", float(self.variance_scale))

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class DirichletSpec:
    """Dirichlet distribution given by its concentration vector."""

    concentration: np.ndarray

    def __post_init__(self) -> None:
        conc = _readonly(np.atleast_1d(self.concentration))
        if conc.ndim != 1 or conc.size == 0:
            raise ValueError("concentration must be a nonempty 1-d vector")
        if not np.all(np.isfinite(conc)) or np.any(conc <= 0):
            raise ValueError("concentration entries must be positive and finite")
        object.__setattr__(self, "concentration", conc)

    def __len__(self) -> int:
        return self.concentration.size

    def mean(self) -> SimplexVector:
        return SimplexVector(self.concentration / self.concentration.sum())


def _as_probs(p: "SimplexVector | np.ndarray") -> np.ndarray:
    if isinstance(p, SimplexVector):
        return p.probs
    return SimplexVector(np.asarray(p, dtype=np.float64)).probs


def _check_same_len(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"length mismatch: {a.shape} vs {b.shape}")


def kl_categorical(p_star, p) -> float:
    """D(p*||p) = sum p*_s log(p*_s/p_s), with 0 log(0/q) := 0."""
    ps, q = _as_probs(p_star), _as_probs(p)
    _check_same_len(ps, q)
    support = ps > 0
    if np.any(q[support] == 0):
        raise InfiniteDivergenceError("p assigns zero mass where p_star is positive")
    ratio = ps[support] / q[support]
    return float(np.sum(ps[support] * np.log(ratio)))


def kl_second_moment_categorical(p_star, p) -> float:
    """V(p*||p) = sum p*_s log^2(p*_s/p_s), the second moment of the log ratio."""
    ps, q = _as_probs(p_star), _as_probs(p)
    _check_same_len(ps, q)
    support = ps > 0
    if np.any(q[support] == 0):
        raise InfiniteDivergenceError("p assigns zero mass where p_star is positive")
    logr = np.log(ps[support] / q[support])
    return float(np.sum(ps[support] * logr * logr))


def hellinger_sq_categorical(p, q) -> float:
    """sum (sqrt(p_s) - sqrt(q_s))^2, in [0, 2]."""
    a, b = _as_probs(p), _as_probs(q)
    _check_same_len(a, b)
    diff = np.sqrt(a) - np.sqrt(b)
    return float(np.dot(diff, diff))


def hellinger_sq_gaussian(a: GaussianSpec, b: GaussianSpec) -> float:
    """Closed-form squared Hellinger distance between isotropic Gaussians.

    h2 = 2 - 2 * BC with Bhattacharyya coefficient
    BC = (2 sqrt(sa sb)/(sa+sb))^{d/2} exp(-||mu_a-mu_b||^2 / (4 (sa+sb))).
    Unit variances reduce to 2 (1 - exp(-||mu_a-mu_b||^2 / 8)).
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
    sa, sb = a.variance_scale, b.variance_scale
    delta_sq = float(np.sum((a.mean - b.mean) ** 2))
    log_bc = 0.5 * a.dim * (0.5 * (math.log(sa) + math.log(sb)) + math.log(2.0) - math.log(sa + sb))
    log_bc -= delta_sq / (4.0 * (sa + sb))
    return 2.0 - 2.0 * math.exp(log_bc)


def _mixture_logpdf(x: np.ndarray, weights: np.ndarray, atoms: np.ndarray) -> np.ndarray:
    """Log density of sum_k w_k N(atom_k, I_d) at rows of x."""
    d = atoms.shape[1]
    sq = np.sum((x[:, None, :] - atoms[None, :, :]) ** 2, axis=2)
    with np.errstate(divide="ignore"):
        logw = np.where(weights > 0, np.log(np.maximum(weights, PROB_FLOOR)), -np.inf)
    logs = logw[None, :] - 0.5 * sq - 0.5 * d * math.log(2.0 * math.pi)
    m = np.max(logs, axis=1)
    return m + np.log(np.sum(np.exp(logs - m[:, None]), axis=1))


def _sample_mixture(rng: np.random.Generator, weights: np.ndarray, atoms: np.ndarray, size: int) -> np.ndarray:
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    comp = np.searchsorted(cum, rng.random(size), side="right")
    return atoms[comp] + rng.standard_normal((size, atoms.shape[1]))


def hellinger_sq_mixture_mc(
    p: "MixingMeasure",
    q: "MixingMeasure",
    samples: int,
    seed: int,
) -> tuple[float, float]:
    """Monte Carlo squared Hellinger distance between two Gaussian mixtures.

    Uses h2 = 2 - 2 * integral sqrt(f g) with importance sampling from the
    balanced proposal (f + g)/2; the integrand sqrt(fg)/proposal is bounded
    by 1, so the estimator has finite variance. Returns (estimate, std_error).
    """
    if samples <= 0:
        raise ValueError("samples must be a positive integer")
    wp, ap = p.weights.probs, p.atoms
    wq, aq = q.weights.probs, q.atoms
    if ap.shape[1] != aq.shape[1]:
        raise DimensionMismatchError(f"atom dimension mismatch: {ap.shape[1]} vs {aq.shape[1]}")
    rng = stream_rng(seed, 0)
    from_p = rng.random(samples) < 0.5
    n_p = int(from_p.sum())
    x = np.empty((samples, ap.shape[1]))
    x[from_p] = _sample_mixture(rng, wp, ap, n_p)
    x[~from_p] = _sample_mixture(rng, wq, aq, samples - n_p)
    logf = _mixture_logpdf(x, wp, ap)
    logg = _mixture_logpdf(x, wq, aq)
    logm = np.logaddexp(logf, logg) - math.log(2.0)
    ratio = np.exp(0.5 * (logf + logg) - logm)
    est = 2.0 - 2.0 * float(np.mean(ratio))
    se = 2.0 * float(np.std(ratio, ddof=1)) / math.sqrt(samples) if samples > 1 else float("inf")
    return est, se


def kl_dual_check(base_probs, h_values) -> tuple[float, float]:
    """Both sides of the variational/dual representation of the KL divergence.

    lhs = log sum_s mu_s e^{h_s};  rhs = sum_s rho*_s h_s - D(rho*||mu) at the
    Gibbs maximizer rho*_s proportional to mu_s e^{h_s}. The two agree
    analytically; returning both exposes the floating-point gap.
    """
    mu = _as_probs(base_probs)
    h = np.asarray(h_values, dtype=np.float64)
    _check_same_len(mu, h)
    if np.any(mu <= 0):
        raise ValueError("base_probs must be strictly positive")
    if not np.all(np.isfinite(h)):
        raise ValueError("h_values must be finite")
    logits = np.log(mu) + h
    lhs = log_sum_exp(logits)
    log_rho = logits - lhs
    rho = np.exp(log_rho)
    rhs = float(np.dot(rho, h) - np.dot(rho, log_rho - np.log(mu)))
    return float(lhs), rhs


def log_sum_exp(values) -> float:
    """Numerically stable log(sum(exp(values)))."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty vector")
    m = float(np.max(v))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(v - m))))


# Asymptotic coefficients B_{2n}/(2n): psi(x) ~ ln x - 1/(2x) - sum c_n / x^{2n}.
_DIGAMMA_SHIFT = 10.0
_DIGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
)


def digamma(x):
    """psi(x) for x > 0 via upward recurrence plus the asymptotic series.

    Accurate to ~1e-12 over [1e-3, 1e6]; accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("digamma requires strictly positive finite arguments")
    z = arr.copy()
    acc = np.zeros_like(z)
    while True:
        small = z < _DIGAMMA_SHIFT
        if not small.any():
            break
        acc[small] -= 1.0 / z[small]
        z[small] += 1.0
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for c in reversed(_DIGAMMA_COEFFS):
        series = inv2 * (c + series)
    res = acc + np.log(z) - 0.5 / z - series
    return float(res[0]) if scalar else res
