"""Estimation pipelines linking GDP series and income histograms to the model.

Four building blocks are combined here:

* ordinary least squares with classical standard errors,
* a grouped-data Gamma maximum-likelihood fit for binned incomes,
* the reduced-form regressions of mean-field level and volatility
  increments, with a Ljung-Box white-noise loop,
* the structural regressions plus a conjugate Gaussian forward filter for
  the growth-rate parameter ``theta``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import linalg, special, stats

from .errors import (
    AlignmentError,
    CollinearityError,
    DomainError,
    OptimizationError,
    ValidationError,
)
from .law_lab import GammaLaw

logger = logging.getLogger(__name__)

LJUNG_BOX_MAX_LAGS = 8
WHITE_NOISE_LEVEL = 0.05
MAX_REWINDOW = 5
DEFAULT_SIGMA2_WINDOW = 4


# ---------------------------------------------------------------------------
# Data carriers
# ---------------------------------------------------------------------------


@dataclass
class GdpSeries:
    """Real GDP per capita observations on strictly increasing dates."""

    periods: np.ndarray
    values: np.ndarray
    name: str = "gdp"

    def __post_init__(self) -> None:
        self.periods = np.asarray(self.periods, dtype="datetime64[D]")
        self.values = np.asarray(self.values, dtype=float)
        if self.periods.shape != self.values.shape or self.values.ndim != 1:
            raise ValidationError("periods and values must be one-dimensional and equally long")
        if self.values.size and np.any(np.diff(self.periods).astype(int) <= 0):
            raise ValidationError("time stamps must be strictly increasing")
        if np.any(~np.isfinite(self.values)) or np.any(self.values <= 0):
            raise ValidationError("GDP values must be finite and positive")

    def __len__(self) -> int:
        return self.values.size

    @property
    def years(self) -> np.ndarray:
        return self.periods.astype("datetime64[Y]").astype(int) + 1970

    @property
    def frequency(self) -> str:
        """``"Q"`` for quarterly, ``"A"`` for annual, ``"irregular"`` otherwise."""
        if self.values.size < 2:
            return "A"
        months = np.diff(self.periods.astype("datetime64[M]").astype(int))
        if np.all(months == 3):
            return "Q"
        if np.all(months == 12):
            return "A"
        return "irregular"

    def annualize(self) -> "GdpSeries":
        """Average quarterly observations within each calendar year.

        Years without all four quarters are dropped.
        """
        if self.frequency == "A":
            return self
        years = self.years
        keep, means = [], []
        for y in np.unique(years):
            sel = years == y
            if sel.sum() == 4:
                keep.append(y)
                means.append(self.values[sel].mean())
            else:
                logger.warning("dropping %d: only %d quarters observed", y, int(sel.sum()))
        periods = np.array([f"{y:04d}-01-01" for y in keep], dtype="datetime64[D]")
        return GdpSeries(periods, np.array(means), self.name)


@dataclass
class IncomeHistogram:
    """Binned incomes for one year; an ``inf`` upper edge marks an open top bin."""

    year: int
    lower: np.ndarray
    upper: np.ndarray
    counts: np.ndarray

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if not (self.lower.shape == self.upper.shape == self.counts.shape) or self.lower.ndim != 1:
            raise ValidationError(f"{self.year}: bin arrays must have equal length")
        if self.lower.size == 0:
            raise ValidationError(f"{self.year}: histogram has no bins")
        if np.any(self.lower < 0) or np.any(self.upper <= self.lower):
            raise ValidationError(f"{self.year}: bins need 0 <= lower < upper")
        if np.any(self.upper[:-1] > self.lower[1:]):
            raise ValidationError(f"{self.year}: bins must be ordered and non-overlapping")
        if np.any(np.isinf(self.upper[:-1])):
            raise ValidationError(f"{self.year}: only the last bin may be open")
        if np.any(self.counts < 0) or self.counts.sum() <= 0:
            raise ValidationError(f"{self.year}: counts must be non-negative with a positive total")

    @classmethod
    def from_samples(cls, year: int, samples: np.ndarray, edges: np.ndarray, open_top: bool = True) -> "IncomeHistogram":
        """Bin ``samples`` on ``edges``; with ``open_top`` the last bin absorbs everything above."""
        edges = np.asarray(edges, dtype=float)
        upper = edges[1:].copy()
        if open_top:
            upper[-1] = np.inf
        counts = np.histogram(samples, bins=np.append(edges[:-1], upper[-1] if not open_top else np.inf))[0]
        return cls(year, edges[:-1], upper, counts)


# ---------------------------------------------------------------------------
# OLS
# ---------------------------------------------------------------------------


def _stars(p: float) -> str:
    if not np.isfinite(p):
        return ""
    return "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.1 else ""


@dataclass
class RegressionResult:
    """OLS fit with classical (homoskedastic) inference.

    ``degenerate`` is set when the response has no variation, in which case
    ``r_squared`` and the F statistic are undefined (``nan``).
    """

    names: list[str]
    coefficients: dict[str, float]
    standard_errors: dict[str, float]
    t_values: dict[str, float]
    p_values: dict[str, float]
    r_squared: float
    adjusted_r_squared: float
    f_statistic: float
    f_p_value: float
    residuals: np.ndarray
    fitted: np.ndarray
    n_obs: int
    df_resid: int
    residual_std_error: float
    degenerate: bool = False

    def significant(self, name: str, level: float = 0.05) -> bool:
        p = self.p_values[name]
        return bool(np.isfinite(p) and p < level)

    def table_rows(self) -> list[dict[str, Any]]:
        return [
            {
                "coefficient": n,
                "estimate": self.coefficients[n],
                "std_error": self.standard_errors[n],
                "stars": _stars(self.p_values[n]),
            }
            for n in self.names
        ]

    def to_dict(self) -> dict[str, Any]:
        def clean(v: float) -> float | None:
            return float(v) if np.isfinite(v) else None

        return {
            "coefficients": {k: clean(v) for k, v in self.coefficients.items()},
            "standard_errors": {k: clean(v) for k, v in self.standard_errors.items()},
            "p_values": {k: clean(v) for k, v in self.p_values.items()},
            "r_squared": clean(self.r_squared),
            "adjusted_r_squared": clean(self.adjusted_r_squared),
            "f_statistic": clean(self.f_statistic),
            "n_obs": self.n_obs,
            "df_resid": self.df_resid,
            "residual_std_error": clean(self.residual_std_error),
            "degenerate": self.degenerate,
        }


def ols(design: np.ndarray, response: Sequence[float], names: Sequence[str] | None = None) -> RegressionResult:
    """Least squares via column-pivoted QR.

    The design should contain an intercept column; R² and F are computed
    about the response mean.  Rank is judged from the diagonal of the
    triangular factor, relative to its largest entry.
    """
    x = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, k = x.shape
    names = list(names) if names is not None else [f"x{i}" for i in range(k)]
    if len(names) != k:
        raise ValidationError("need one name per design column")
    if y.shape != (n,):
        raise ValidationError("response length must match the design rows")
    if n <= k:
        raise ValidationError(f"need more observations ({n}) than regressors ({k})")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("design and response must be finite")
    q, r, piv = linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, k) * np.finfo(float).eps * diag[0] if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    if rank < k:
        dropped = [names[piv[i]] for i in range(rank, k)]
        raise CollinearityError(f"design has rank {rank} < {k}; collinear column(s): {dropped}")
    beta_piv = linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(k)
    beta[piv] = beta_piv
    fitted = x @ beta
    resid = y - fitted
    df = n - k
    ssr = float(resid @ resid)
    s2 = ssr / df
    r_inv = linalg.solve_triangular(r, np.eye(k))
    cov_piv = s2 * (r_inv @ r_inv.T)
    cov = np.empty_like(cov_piv)
    cov[np.ix_(piv, piv)] = cov_piv
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        tv = beta / se
    pv = 2.0 * stats.t.sf(np.abs(tv), df)
    sst = float(np.sum((y - y.mean()) ** 2))
    degenerate = sst <= 1e-300 or sst <= (np.finfo(float).eps * np.abs(y).max()) ** 2 * n
    if degenerate:
        r2 = adj = f = fp = math.nan
    else:
        r2 = max(0.0, 1.0 - ssr / sst)
        adj = 1.0 - (1.0 - r2) * (n - 1) / df
        if k > 1:
            f = (r2 / (k - 1)) / ((1.0 - r2) / df) if r2 < 1 else math.inf
            fp = float(stats.f.sf(f, k - 1, df))
        else:
            f = fp = math.nan
    return RegressionResult(
        names=names,
        coefficients=dict(zip(names, beta.tolist())),
        standard_errors=dict(zip(names, se.tolist())),
        t_values=dict(zip(names, np.asarray(tv, dtype=float).tolist())),
        p_values=dict(zip(names, np.asarray(pv, dtype=float).tolist())),
        r_squared=r2,
        adjusted_r_squared=adj,
        f_statistic=f,
        f_p_value=fp,
        residuals=resid,
        fitted=fitted,
        n_obs=n,
        df_resid=df,
        residual_std_error=math.sqrt(s2),
        degenerate=bool(degenerate),
    )


def _with_intercept(*cols: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(len(cols[0]))] + [np.asarray(c, dtype=float) for c in cols])


def _degenerate_result(names: list[str], y: np.ndarray) -> RegressionResult:
    # zero slopes, intercept at the (constant) response level, nothing estimable
    coefs = {n: 0.0 for n in names}
    coefs[names[0]] = float(np.mean(y))
    nan = {n: math.nan for n in names}
    return RegressionResult(
        names, coefs, dict(nan), dict(nan), dict(nan), math.nan, math.nan, math.nan, math.nan,
        y - np.mean(y), np.full_like(y, np.mean(y)), y.size, y.size - len(names), 0.0, degenerate=True,
    )


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def ljung_box(residuals: Sequence[float], lags: int) -> dict[str, float]:
    """Ljung-Box portmanteau statistic ``n(n+2) sum rho_k^2 / (n-k)`` with its chi-square p-value."""
    e = np.asarray(residuals, dtype=float)
    n = e.size
    if lags < 1:
        raise ValidationError("lags must be at least 1")
    if lags >= n / 4:
        raise ValidationError(f"lags ({lags}) must be below n/4 = {n / 4:g}")
    d = e - e.mean()
    denom = float(d @ d)
    if denom == 0:
        return {"statistic": 0.0, "p_value": 1.0, "lags": lags}
    k = np.arange(1, lags + 1)
    rho = np.array([float(d[j:] @ d[:-j]) / denom for j in k])
    q = n * (n + 2) * float(np.sum(rho**2 / (n - k)))
    return {"statistic": q, "p_value": float(stats.chi2.sf(q, lags)), "lags": lags}


def breusch_pagan(residuals: np.ndarray, design: np.ndarray) -> dict[str, float]:
    """Koenker's studentized Breusch-Pagan LM test: ``n R^2`` from regressing ``e^2`` on the design."""
    e2 = np.asarray(residuals, dtype=float) ** 2
    aux = ols(design, e2)
    k = design.shape[1] - 1
    lm = 0.0 if aux.degenerate else aux.n_obs * aux.r_squared
    return {"statistic": lm, "p_value": float(stats.chi2.sf(lm, k)), "df": k}


def construct_sigma2(residuals: Sequence[float], window: int = DEFAULT_SIGMA2_WINDOW) -> np.ndarray:
    """Trailing rolling mean of squared residuals.

    The first ``window - 1`` entries use the expanding mean of what is
    available so far.
    """
    e2 = np.asarray(residuals, dtype=float) ** 2
    if window < 2:
        raise ValidationError("window must be at least 2")
    if e2.size < window:
        raise ValidationError(f"need at least {window} residuals, got {e2.size}")
    csum = np.concatenate([[0.0], np.cumsum(e2)])
    idx = np.arange(1, e2.size + 1)
    start = np.maximum(idx - window, 0)
    return (csum[idx] - csum[start]) / (idx - start)


# ---------------------------------------------------------------------------
# Gamma MLE on grouped data
# ---------------------------------------------------------------------------


@dataclass
class GammaFit:
    law: GammaLaw
    loglik: float
    grad_norm: float
    iterations: int
    n_obs: float


def _bin_probs(alpha: float, beta: float, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # scipy's incomplete gamma keeps the likelihood loop fast; the upper tail
    # is used for bins above the mean where it keeps relative accuracy
    upper_side = lo >= alpha / beta
    cdf = special.gammainc(alpha, beta * hi) - special.gammainc(alpha, beta * lo)
    sf = special.gammaincc(alpha, beta * lo) - special.gammaincc(alpha, beta * hi)
    return np.where(upper_side, sf, cdf)


class _GroupedGammaLikelihood:
    """Mean log-likelihood per observation in ``(ln alpha, ln beta)``.

    The bin probabilities are renormalised by the probability the bins cover,
    so gaps between bins or a closed top bin do not bias the fit.
    """

    def __init__(self, h: IncomeHistogram):
        keep = h.counts > 0
        self.lo, self.hi = h.lower, h.upper
        self.counts = h.counts
        self.keep = keep
        self.n = float(h.counts.sum())

    def value(self, u: float, v: float) -> float:
        p = _bin_probs(math.exp(u), math.exp(v), self.lo, self.hi)
        covered = p.sum()
        pk = p[self.keep]
        if covered <= 0 or np.any(pk <= 0):
            return -math.inf
        return float(self.counts[self.keep] @ np.log(pk)) / self.n - math.log(covered)

    def gradient(self, u: float, v: float) -> np.ndarray:
        alpha, beta = math.exp(u), math.exp(v)
        law = GammaLaw(alpha, beta)
        p = _bin_probs(alpha, beta, self.lo, self.hi)
        # beta * dF(x)/dbeta = x * pdf(x); vanishes at 0 and infinity
        def xpdf(x):
            out = np.zeros_like(x)
            fin = np.isfinite(x) & (x > 0)
            out[fin] = x[fin] * law.pdf(x[fin])
            return out

        dp_v = xpdf(self.hi) - xpdf(self.lo)
        w = np.zeros_like(p)
        w[self.keep] = self.counts[self.keep] / self.n / p[self.keep]
        g_v = float(w @ dp_v) - dp_v.sum() / p.sum()
        # shape derivative by Richardson-extrapolated central differences
        h = 1e-3
        d1 = (self.value(u + h, v) - self.value(u - h, v)) / (2 * h)
        d2 = (self.value(u + h / 2, v) - self.value(u - h / 2, v)) / h
        g_u = (4.0 * d2 - d1) / 3.0
        return np.array([g_u, g_v])

    def hessian(self, u: float, v: float) -> np.ndarray:
        h = 1e-4
        cols = []
        for e in (np.array([h, 0.0]), np.array([0.0, h])):
            cols.append((self.gradient(u + e[0], v + e[1]) - self.gradient(u - e[0], v - e[1])) / (2 * h))
        hess = np.column_stack(cols)
        return 0.5 * (hess + hess.T)


def _moment_start(h: IncomeHistogram) -> tuple[float, float]:
    mids = 0.5 * (h.lower + h.upper)
    if np.isinf(h.upper[-1]):
        width = h.upper[-2] - h.lower[-2] if h.lower.size > 1 else h.lower[-1]
        mids[-1] = h.lower[-1] + max(width, 0.5 * h.lower[-1])
    w = h.counts / h.counts.sum()
    mean = float(w @ mids)
    var = float(w @ (mids - mean) ** 2)
    if not (mean > 0 and var > 0):
        raise OptimizationError("cannot form a starting value from the histogram")
    return mean**2 / var, mean / var


def fit_gamma_mle(h: IncomeHistogram, tol: float = 1e-8, max_iter: int = 200) -> GammaFit:
    """Maximise the grouped-data Gamma likelihood.

    Safeguarded Newton iterations on ``(ln alpha, ln beta)``: when the
    Hessian is not negative definite the step falls back to a scaled
    gradient, and every step is halved until the likelihood increases.
    Convergence means the gradient norm of the mean log-likelihood is below
    ``tol``.
    """
    if int(np.sum(h.counts > 0)) < 3:
        raise OptimizationError(
            f"{h.year}: need at least 3 bins with positive counts; shape and rate are not identifiable",
            {"positive_bins": int(np.sum(h.counts > 0))},
        )
    like = _GroupedGammaLikelihood(h)
    a0, b0 = _moment_start(h)
    x = np.array([math.log(a0), math.log(b0)])
    f = like.value(*x)
    g = like.gradient(*x)
    diag: dict[str, Any] = {}
    for it in range(1, max_iter + 1):
        gn = float(np.linalg.norm(g))
        diag = {"iteration": it, "alpha": math.exp(x[0]), "beta": math.exp(x[1]), "grad_norm": gn, "loglik": f}
        if gn < tol:
            return GammaFit(GammaLaw(math.exp(x[0]), math.exp(x[1])), f * like.n, gn, it - 1, like.n)
        hess = like.hessian(*x)
        try:
            linalg.cholesky(-hess)
            step = linalg.solve(-hess, g, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            step = g / max(1.0, gn)
        # keep steps in log space modest
        step *= min(1.0, 2.0 / max(np.abs(step).max(), 1e-300))
        for _ in range(60):
            cand = x + step
            fc = like.value(*cand) if np.all(np.abs(cand) < 30) else -math.inf
            if fc >= f - 1e-15 * abs(f):
                break
            step *= 0.5
        else:
            raise OptimizationError(f"{h.year}: line search failed", diag)
        x, f = cand, fc
        g = like.gradient(*x)
        if x[0] > 25:
            raise OptimizationError(f"{h.year}: shape diverging; histogram too concentrated", diag)
    raise OptimizationError(f"{h.year}: no convergence after {max_iter} iterations", diag)


# ---------------------------------------------------------------------------
# Reduced form
# ---------------------------------------------------------------------------


@dataclass
class ReducedFormResult:
    eq1: RegressionResult
    eq2: RegressionResult
    pre: RegressionResult
    sigma2: np.ndarray
    window: int
    iterations: int
    ljung_box: dict[str, float]
    breusch_pagan: dict[str, float]
    mode: str
    status: str = "ok"
    degenerate: bool = False
    warnings: list[str] = field(default_factory=list)

    def __getitem__(self, key: str) -> Any:
        return getattr(self, key)


def reduced_form_pipeline(
    g: GdpSeries,
    mode: str = "level",
    window: int = DEFAULT_SIGMA2_WINDOW,
    lb_lags: int | None = None,
    level: float = WHITE_NOISE_LEVEL,
    max_iter: int = MAX_REWINDOW,
) -> ReducedFormResult:
    """Mean-field level and volatility regressions.

    Steps: (1) regress ``dm_t`` on ``m_t``; (2) build ``sigma2_t`` from those
    residuals; (3) regress ``dm_t`` on ``m_t`` and ``sigma2_t``, widening the
    window and rebuilding ``sigma2`` from the latest residuals while
    Ljung-Box rejects white noise (at most ``max_iter`` times); (4) regress
    ``sigma2_t - sigma2_{t-1}`` on ``m_{t-1}^2`` and ``sigma2_{t-1}``;
    (5) Breusch-Pagan check of the step-4 residuals.  ``mode="log"``
    replaces ``m`` with ``ln m`` throughout.
    """
    if mode not in ("level", "log"):
        raise ValidationError("mode must be 'level' or 'log'")
    if len(g) < 20:
        raise ValidationError(f"reduced form needs at least 20 observations, got {len(g)}")
    m = np.log(g.values) if mode == "log" else g.values.copy()
    dm = np.diff(m)
    mt = m[:-1]
    names1 = ["const", "m", "sigma2"]
    names2 = ["const", "m2_lag", "sigma2_lag"]
    if np.ptp(m) == 0:
        sig = np.zeros(dm.size)
        pre = _degenerate_result(["const", "m"], dm)
        return ReducedFormResult(
            _degenerate_result(names1, dm), _degenerate_result(names2, np.diff(sig)), pre, sig, window, 0,
            {"statistic": math.nan, "p_value": math.nan}, {"statistic": math.nan, "p_value": math.nan},
            mode, status="degenerate", degenerate=True, warnings=["constant series: nothing to estimate"],
        )
    lags = lb_lags or min(LJUNG_BOX_MAX_LAGS, (dm.size - 1) // 4)
    pre = ols(_with_intercept(mt), dm, ["const", "m"])
    resid = pre.residuals
    w = window
    sig = construct_sigma2(resid, w)
    eq1 = ols(_with_intercept(mt, sig), dm, names1)
    lb = ljung_box(eq1.residuals, lags)
    it = 0
    warnings = []
    while lb["p_value"] < level and it < max_iter:
        it += 1
        w += 1
        sig = construct_sigma2(eq1.residuals, w)
        eq1 = ols(_with_intercept(mt, sig), dm, names1)
        lb = ljung_box(eq1.residuals, lags)
    status = "ok"
    if lb["p_value"] < level:
        status = "warning"
        warnings.append(f"residuals still autocorrelated after {it} re-windowing passes (Ljung-Box p={lb['p_value']:.3g})")
        logger.warning(warnings[-1])
    d_sig = np.diff(sig)
    x2 = _with_intercept(mt[:-1] ** 2, sig[:-1])
    eq2 = ols(x2, d_sig, names2)
    bp = breusch_pagan(eq2.residuals, x2)
    return ReducedFormResult(eq1, eq2, pre, sig, w, it, lb, bp, mode, status, False, warnings)


# ---------------------------------------------------------------------------
# Forward filter and structural form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FilterState:
    theta: float
    C: float
    t: int


def forward_filter(
    l: Sequence[float],
    sigma2_x: Sequence[float],
    theta0: float,
    c0: float = 1.0,
) -> list[FilterState]:
    """Conjugate Gaussian updating of a growth-rate parameter.

    With prior ``N(theta0, c0)`` and observations ``l_t ~ N(theta, sigma2_x[t])``::

        theta_t = theta_{t-1} + C_{t-1} / (C_{t-1} + s_t) * (l_t - theta_{t-1})
        C_t     = 1 / (1 / s_t + 1 / C_{t-1})

    Returns the posterior after each observation, ``t = 1 .. T``.
    """
    obs = np.asarray(l, dtype=float)
    s = np.asarray(sigma2_x, dtype=float)
    if obs.shape != s.shape or obs.ndim != 1:
        raise ValidationError("observations and variances must be equally long sequences")
    if np.any(~(s > 0)):
        raise DomainError("observation variances must be positive")
    if not c0 > 0:
        raise DomainError("prior variance c0 must be positive")
    theta, c = float(theta0), float(c0)
    out = []
    for t, (lt, st) in enumerate(zip(obs, s), start=1):
        gain = c / (c + st)
        theta = theta + gain * (lt - theta)
        c = 1.0 / (1.0 / st + 1.0 / c)
        out.append(FilterState(float(theta), float(c), t))
    return out


@dataclass
class StructuralResult:
    years: np.ndarray
    ratio: np.ndarray
    pre: RegressionResult
    sf1: RegressionResult
    endogeneity: RegressionResult
    filter: list[FilterState]
    filter_years: np.ndarray
    filter_residuals: np.ndarray
    filter_endogeneity: RegressionResult
    sigma2_x: np.ndarray
    eps1_var: float
    theta0: float
    sf1_significant: bool
    warnings: list[str] = field(default_factory=list)

    def __getitem__(self, key: str) -> Any:
        return getattr(self, key)

    @property
    def theta_mean(self) -> float:
        return float(np.mean([s.theta for s in self.filter]))


def _detrended_variance(l: np.ndarray) -> float:
    t = np.arange(l.size, dtype=float)
    fit = ols(_with_intercept(t), l, ["const", "trend"])
    return float(np.var(fit.residuals, ddof=2))


def structural_pipeline(
    g: GdpSeries,
    laws: Mapping[int, GammaLaw],
    eps1_var: float | str = "sample",
    theta0: float | str = "first",
    c0: float = 1.0,
) -> StructuralResult:
    """Structural regressions and the filtered growth-rate path.

    ``g`` is annualised if needed.  With ``L_t = ln m_{t+1} - ln m_t`` the
    filter prior mean is ``L_1`` (``theta0="first"``) with variance ``c0``,
    and the updates use ``L_2, L_3, ...`` with observation variance
    ``beta_t^2 / alpha_t + eps1_var``.  ``eps1_var="sample"`` uses the
    sample variance of the linearly detrended log-growth; pass ``0.0`` for
    the pure heteroskedastic term.

    The endogeneity checks regress a residual on ``alpha_t / beta_t``: once
    for the residual of the ratio-on-log-GDP regression, once for the filter residual ``L_t - theta_{t-1}``.
    """
    ga = g.annualize() if g.frequency != "A" else g
    gdp_years = ga.years
    law_years = np.array(sorted(laws))
    if not np.array_equal(np.sort(gdp_years), law_years):
        missing = sorted(set(law_years.tolist()) ^ set(gdp_years.tolist()))
        raise AlignmentError(f"GDP years and income-law years differ at {missing}")
    if law_years.size < 10:
        raise ValidationError(f"structural pipeline needs at least 10 years, got {law_years.size}")
    alpha = np.array([laws[y].alpha for y in law_years])
    beta = np.array([laws[y].beta for y in law_years])
    ratio = alpha / beta
    m = ga.values
    log_m = np.log(m)
    warnings: list[str] = []
    if np.ptp(ratio) == 0:
        pre = _degenerate_result(["const", "m"], ratio)
        sf1 = _degenerate_result(["const", "log_m"], ratio)
        endo = _degenerate_result(["const", "ratio"], np.zeros_like(ratio))
        warnings.append("income laws constant over time: the ratio regression is degenerate")
    else:
        pre = ols(_with_intercept(m), ratio, ["const", "m"])
        sf1 = ols(_with_intercept(log_m), ratio, ["const", "log_m"])
        endo = ols(_with_intercept(ratio), sf1.residuals, ["const", "ratio"])
    sig_flag = (not sf1.degenerate) and sf1.significant("log_m", 0.05)
    if not sig_flag:
        warnings.append("ratio-on-log-GDP slope not significant at 5%; filter run regardless")

    growth = np.diff(log_m)
    s_x = beta[:-1] ** 2 / alpha[:-1]
    v1 = _detrended_variance(growth) if eps1_var == "sample" else float(eps1_var)
    if v1 < 0:
        raise DomainError("eps1_var must be non-negative")
    th0 = float(growth[0]) if theta0 == "first" else float(theta0)
    states = forward_filter(growth[1:], s_x[1:] + v1, th0, c0)
    prior_means = np.array([th0] + [s.theta for s in states[:-1]])
    resid = growth[1:] - prior_means
    f_ratio = ratio[1:-1]
    if np.ptp(f_ratio) == 0:
        f_endo = _degenerate_result(["const", "ratio"], resid)
    else:
        f_endo = ols(_with_intercept(f_ratio), resid, ["const", "ratio"])
    return StructuralResult(
        years=law_years, ratio=ratio, pre=pre, sf1=sf1, endogeneity=endo,
        filter=states, filter_years=law_years[1:-1], filter_residuals=resid,
        filter_endogeneity=f_endo, sigma2_x=s_x[1:] + v1, eps1_var=v1, theta0=th0,
        sf1_significant=bool(sig_flag), warnings=warnings,
    )
