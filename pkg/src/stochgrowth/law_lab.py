"""Gamma aggregation algebra and the special laws attached to it.

The Gamma family is closed under the operations the growth economy needs:
summing independent individuals with a shared rate adds shapes, rescaling the
population divides the rate, and the n-th convolution root divides the shape.
Shapes are carried as exact rationals alongside their float value so that
``gamma_sum([gamma_divide(L, n)] * n) == L`` holds bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy import special, stats

from .errors import DivergenceError, DomainError, IncompatibleLawError, ValidationError
from .grids import GridDensity

BETA_MATCH_TOL = 1e-12
DEFAULT_ZETA_TRUNCATION = 1_000_000
_INCGAMMA_EPS = 1e-15
_INCGAMMA_MAX_ITER = 10_000


@dataclass(frozen=True)
class GammaLaw:
    """Gamma(alpha, beta) with shape ``alpha`` and rate ``beta``."""

    alpha: float
    beta: float
    _shape: Fraction | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError(f"shape alpha must be positive, got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise DomainError(f"rate beta must be positive, got {self.beta}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        if self._shape is None:
            object.__setattr__(self, "_shape", Fraction(self.alpha))

    @classmethod
    def _from_shape(cls, shape: Fraction, beta: float) -> "GammaLaw":
        return cls(float(shape), beta, shape)

    @property
    def mean(self) -> float:
        return self.alpha / self.beta

    @property
    def var(self) -> float:
        return self.alpha / self.beta**2

    @property
    def scale(self) -> float:
        return 1.0 / self.beta

    def pdf(self, x: float | np.ndarray) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        _check_nonneg(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = (
                self.alpha * math.log(self.beta)
                + special.xlogy(self.alpha - 1.0, x)
                - self.beta * x
                - special.gammaln(self.alpha)
            )
        out = np.exp(logp)
        return out if out.ndim else float(out)

    def cdf(self, x: float | np.ndarray) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        _check_nonneg(x)
        out = _vectorize_incgamma(self.alpha, self.beta * x, upper=False)
        return out if out.ndim else float(out)

    def sf(self, x: float | np.ndarray) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        _check_nonneg(x)
        out = _vectorize_incgamma(self.alpha, self.beta * x, upper=True)
        return out if out.ndim else float(out)

    def ppf(self, q: float | np.ndarray) -> np.ndarray | float:
        out = special.gammaincinv(self.alpha, np.asarray(q, dtype=float)) / self.beta
        return out if np.ndim(out) else float(out)

    def sample(self, rng: np.random.Generator, size: int | tuple[int, ...]) -> np.ndarray:
        return rng.gamma(self.alpha, 1.0 / self.beta, size)

    def to_dict(self) -> dict[str, float]:
        return {"alpha": self.alpha, "beta": self.beta}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "GammaLaw":
        try:
            return cls(float(d["alpha"]), float(d["beta"]))
        except KeyError as exc:
            raise ValidationError(f"Gamma law record missing {exc.args[0]!r}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GammaLaw":
        return cls.from_dict(json.loads(text))


def _log_prefactor(a: float, x: np.ndarray) -> np.ndarray:
    return -x + a * np.log(x) - math.lgamma(a)


def _gamma_series(a: float, x: np.ndarray) -> np.ndarray:
    # P(a, x) = x^a e^-x / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k))
    term = np.full(x.shape, 1.0 / a)
    total = term.copy()
    ap = a
    active = np.ones(x.shape, dtype=bool)
    for _ in range(_INCGAMMA_MAX_ITER):
        ap += 1.0
        term = np.where(active, term * x / ap, 0.0)
        total += term
        active &= np.abs(term) >= np.abs(total) * _INCGAMMA_EPS
        if not active.any():
            break
    return total * np.exp(_log_prefactor(a, x))


def _gamma_contfrac(a: float, x: np.ndarray) -> np.ndarray:
    # Q(a, x) by the modified Lentz evaluation of the Legendre continued fraction
    tiny = 1e-300
    b = x + 1.0 - a
    c = np.full(x.shape, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _INCGAMMA_MAX_ITER):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = np.where(active, d * c, 1.0)
        h *= delta
        active &= np.abs(delta - 1.0) >= _INCGAMMA_EPS
        if not active.any():
            break
    return np.exp(_log_prefactor(a, x)) * h


def regularized_gamma(a: float, x: float | np.ndarray, upper: bool = False) -> np.ndarray | float:
    """Regularized incomplete gamma ``P(a, x)`` (or ``Q(a, x)`` if ``upper``).

    The power series converges quickly for ``x < a + 1`` and the continued
    fraction for larger ``x``; each branch returns the complement of the
    other so that tails keep their relative accuracy.
    """
    xa = np.asarray(x, dtype=float)
    flat = xa.ravel()
    out = np.empty(flat.shape)
    out[flat <= 0] = 1.0 if upper else 0.0
    out[np.isinf(flat)] = 0.0 if upper else 1.0
    ser = (flat > 0) & (flat < a + 1.0)
    cf = np.isfinite(flat) & (flat >= a + 1.0)
    if ser.any():
        p = _gamma_series(a, flat[ser])
        out[ser] = 1.0 - p if upper else p
    if cf.any():
        q = _gamma_contfrac(a, flat[cf])
        out[cf] = q if upper else 1.0 - q
    out = out.reshape(xa.shape)
    return out if out.ndim else float(out)


def _vectorize_incgamma(a: float, x: np.ndarray, upper: bool) -> np.ndarray:
    return np.asarray(regularized_gamma(a, x, upper))


def _check_nonneg(x: np.ndarray) -> None:
    if np.any(x < 0):
        raise DomainError("Gamma law is supported on [0, inf); got a negative argument")


# ---------------------------------------------------------------------------
# Aggregation algebra
# ---------------------------------------------------------------------------


def gamma_sum(laws: Sequence[GammaLaw]) -> GammaLaw:
    """Law of a sum of independent Gamma variables sharing one rate."""
    laws = list(laws)
    if not laws:
        raise ValidationError("gamma_sum needs at least one law")
    beta = laws[0].beta
    for law in laws[1:]:
        if abs(law.beta - beta) > BETA_MATCH_TOL * max(1.0, abs(beta)):
            raise IncompatibleLawError(f"rates differ: {beta} vs {law.beta}")
    return GammaLaw._from_shape(sum((law._shape for law in laws), Fraction(0)), beta)


def gamma_scale(law: GammaLaw, c: float) -> GammaLaw:
    """Law of ``c * X`` for ``X ~ law``: the rate is divided by ``c``."""
    if not (c > 0 and math.isfinite(c)):
        raise DomainError(f"scale factor must be positive, got {c}")
    return GammaLaw._from_shape(law._shape, law.beta / c)


def gamma_divide(law: GammaLaw, n: int) -> GammaLaw:
    """n-th convolution root: ``n`` i.i.d. copies of the result sum to ``law``."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    return GammaLaw._from_shape(law._shape / int(n), law.beta)


def gamma_pdf(law: GammaLaw, x: float | np.ndarray) -> np.ndarray | float:
    return law.pdf(x)


def gamma_cdf(law: GammaLaw, x: float | np.ndarray) -> np.ndarray | float:
    return law.cdf(x)


def gamma_mean_var(law: GammaLaw) -> tuple[float, float]:
    return law.mean, law.var


def max_statistic_prob(law: GammaLaw, n: int, x: float) -> float:
    """Probability that the largest of ``n`` i.i.d. draws is at most ``x``."""
    if n < 1:
        raise DomainError("n must be at least 1")
    if x < 0:
        raise DomainError("x must be non-negative")
    return float(law.cdf(x)) ** int(n)


def ks_against(law: GammaLaw, samples: np.ndarray) -> float:
    """One-sample Kolmogorov-Smirnov distance between draws and ``law``."""
    return float(stats.kstest(np.asarray(samples, dtype=float), law.cdf).statistic)


# ---------------------------------------------------------------------------
# Power law and zeta law
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerLawSolution:
    """``P(x) = p1 * x**exponent``, the solution of ``x P'(x) = exponent * P(x)``."""

    p1: float
    exponent: float

    def __post_init__(self) -> None:
        if not self.p1 > 0:
            raise DomainError("P(1) must be positive")

    def __call__(self, x: float | np.ndarray) -> np.ndarray | float:
        return self.p1 * np.power(x, self.exponent)

    def derivative(self, x: float | np.ndarray) -> np.ndarray | float:
        return self.exponent * self.p1 * np.power(x, self.exponent - 1.0)

    def ode_residual(self, x: float | np.ndarray) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        return x * self.derivative(x) - self.exponent * self(x)

    @property
    def stated_tail_index(self) -> float:
        """The ``1 / alpha`` reparameterisation quoted alongside this solution.

        Kept for reference only: the ODE itself fixes the exponent at
        ``alpha``, not at ``-1 / alpha``.
        """
        return 1.0 / self.exponent if self.exponent else math.inf


def power_law_solve(alpha: float, p1: float = 1.0) -> PowerLawSolution:
    """Solve ``x dP/dx = alpha P`` with ``P(1) = p1``."""
    return PowerLawSolution(p1=float(p1), exponent=float(alpha))


def _zeta_tail(s: float, n: int) -> float:
    """Euler-Maclaurin estimate of ``sum_{k > n} k**-s``."""
    n = float(n)
    return (
        n ** (1.0 - s) / (s - 1.0)
        - 0.5 * n**-s
        + s * n ** (-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n ** (-s - 3.0) / 720.0
    )


@lru_cache(maxsize=64)
def _zeta_partial(s: float, n: int) -> float:
    k = np.arange(1, n + 1, dtype=float)
    # add smallest terms first
    return float(np.sum(k[::-1] ** -s))


def riemann_zeta(s: float, truncation: int = DEFAULT_ZETA_TRUNCATION) -> float:
    """Direct series up to ``truncation`` plus an Euler-Maclaurin tail."""
    if not s > 1:
        raise DivergenceError(f"zeta series diverges for exponent {s} <= 1")
    return _zeta_partial(float(s), int(truncation)) + _zeta_tail(float(s), int(truncation))


@dataclass(frozen=True)
class ZetaLaw:
    """Zeta (discrete Zipf) law on 1, 2, 3, ... with ``P(x) = x**-gamma / zeta(gamma)``."""

    gamma: float
    norm: float

    @classmethod
    def build(cls, gamma: float, truncation: int = DEFAULT_ZETA_TRUNCATION) -> "ZetaLaw":
        return cls(float(gamma), riemann_zeta(gamma, truncation))

    def pmf(self, x: int | np.ndarray) -> np.ndarray | float:
        x = np.asarray(x)
        if np.any(x < 1) or np.any(np.asarray(x, dtype=float) != np.floor(x)):
            raise DomainError("zeta law is supported on the positive integers")
        out = np.asarray(x, dtype=float) ** -self.gamma / self.norm
        return out if out.ndim else float(out)

    def tail_mass(self, n: int) -> float:
        """``P(X > n)``."""
        return _zeta_tail(self.gamma, n) / self.norm


def zeta_pmf(gamma: float, x: int, truncation: int = DEFAULT_ZETA_TRUNCATION) -> float:
    if not gamma > 1:
        raise DivergenceError(f"zeta law needs gamma > 1, got {gamma}")
    if truncation < 10_000:
        raise ValidationError("truncation must be at least 10^4")
    return ZetaLaw.build(gamma, truncation).pmf(x)


# ---------------------------------------------------------------------------
# Stein operator
# ---------------------------------------------------------------------------


def stein_residual(density: GridDensity) -> np.ndarray:
    """Apply ``f -> f' - x f`` node by node.

    Derivatives use central differences inside the grid and one-sided
    differences at the two ends.  Note that the standard normal density is
    not annihilated by this operator (its residual is ``-2 x phi(x)``); the
    operator's kernel is spanned by ``exp(x**2 / 2)``.
    """
    if density.grid.size < 3:
        raise ValidationError("stein_residual needs at least three grid nodes")
    deriv = np.gradient(density.values, density.dx, edge_order=1)
    return deriv - density.grid * density.values


# ---------------------------------------------------------------------------
# Stable closure for linear maps
# ---------------------------------------------------------------------------

STABLE_NOISE = {"normal": 2.0, "cauchy": 1.0}


def affine_stationary_samples(
    slope: float,
    noise: str,
    n_samples: int,
    rng: np.random.Generator,
    burn_in: int = 200,
) -> np.ndarray:
    """Stationary draws of ``X_t = slope * X_{t-1} + B_t`` with symmetric stable ``B_t``."""
    if not 0 <= slope < 1:
        raise DomainError("slope must lie in [0, 1) for a stationary linear map")
    if noise not in STABLE_NOISE:
        raise ValidationError(f"noise must be one of {sorted(STABLE_NOISE)}")
    draw = rng.standard_normal if noise == "normal" else rng.standard_cauchy
    x = np.zeros(n_samples)
    for _ in range(burn_in):
        x = slope * x + draw(n_samples)
    return x


def stable_closure_ks(
    slope: float, noise: str, n_samples: int = 100_000, seed: int = 0, n_terms: int = 2
) -> float:
    """KS distance between a rescaled sum of stationary draws and a fresh sample.

    For a strictly stable stationary law with index ``a``, the sum of
    ``n_terms`` independent copies divided by ``n_terms**(1/a)`` has the
    same law as a single copy.
    """
    rng = np.random.default_rng(seed)
    index = STABLE_NOISE[noise]
    total = sum(affine_stationary_samples(slope, noise, n_samples, rng) for _ in range(n_terms))
    fresh = affine_stationary_samples(slope, noise, n_samples, rng)
    return float(stats.ks_2samp(total / n_terms ** (1.0 / index), fresh).statistic)


def laws_to_records(laws: Mapping[int, GammaLaw]) -> list[dict[str, float]]:
    return [{"year": int(y), **laws[y].to_dict()} for y in sorted(laws)]


def laws_from_records(records: Iterable[Mapping[str, Any]]) -> dict[int, GammaLaw]:
    return {int(r["year"]): GammaLaw.from_dict(r) for r in records}
