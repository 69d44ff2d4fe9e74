"""Deterministic (Solow) and stochastic (random monotone map) individual growth.

Every simulated path lives on a closed interval ``[lo, hi]``.  Maps that would
leave the interval are clipped back onto it and the number of clipped steps is
reported so misspecified economies are visible.

Random numbers are drawn from Philox streams keyed by ``(seed, block)``, where
paths are processed in fixed-size blocks; results are therefore reproducible
and blocks can be simulated independently.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Sequence

import numpy as np
from scipy import special, stats

from .errors import ConfigError, ConvergenceError, DomainError, ValidationError

logger = logging.getLogger(__name__)

BLOCK_SIZE = 8192
MAP_KINDS = ("affine", "logistic", "table")


# ---------------------------------------------------------------------------
# Solow baseline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolowParams:
    """Saving rate, effective depreciation and Cobb-Douglas exponent."""

    beta1: float
    beta2: float
    prod_exponent: float

    def __post_init__(self) -> None:
        if not 0.0 < self.beta1 <= 1.0:
            raise DomainError(f"beta1 must lie in (0, 1], got {self.beta1}")
        if not 0.0 < self.beta2 <= 1.0:
            raise DomainError(f"beta2 must lie in (0, 1], got {self.beta2}")
        if not 0.0 < self.prod_exponent < 1.0:
            raise DomainError(f"prod_exponent must lie in (0, 1), got {self.prod_exponent}")

    def production(self, x: float) -> float:
        return x**self.prod_exponent

    def production_prime(self, x: float) -> float:
        return self.prod_exponent * x ** (self.prod_exponent - 1.0)

    @property
    def analytic_fixed_point(self) -> float:
        """Positive root of ``beta1 * x**e = beta2 * x``."""
        return (self.beta1 / self.beta2) ** (1.0 / (1.0 - self.prod_exponent))


@dataclass(frozen=True)
class SolowFixedPoint:
    x_star: float
    A_S: float
    B_S: float
    iterations: int


def solow_step(x: float, p: SolowParams) -> float:
    """One step of the Solow capital-per-labour map.

    ``f(x) = beta1 * x**e - (beta2 - 1) * x``.
    """
    if x < 0:
        raise DomainError(f"capital per labour must be non-negative, got {x}")
    return p.beta1 * p.production(x) - (p.beta2 - 1.0) * x


def solow_fixed_point(
    p: SolowParams, tol: float = 1e-10, x0: float = 1.0, max_iter: int = 1_000_000
) -> SolowFixedPoint:
    """Iterate the Solow map to its positive fixed point.

    The map is monotone, so plain iteration converges from any positive start.
    Returns the fixed point together with the first-order-condition
    coefficients ``B_S = f_P'(x*)`` (return to capital) and
    ``A_S = f_P(x*) - f_P'(x*) x*`` (cost rate).
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if x0 <= 0:
        raise DomainError("x0 must be positive (zero is itself a fixed point)")
    x = float(x0)
    for it in range(1, max_iter + 1):
        fx = solow_step(x, p)
        if abs(fx - x) <= tol:
            # stop at a point that itself satisfies the residual bound
            x = fx if abs(solow_step(fx, p) - fx) <= tol else x
            b_s = p.production_prime(x)
            a_s = p.production(x) - b_s * x
            return SolowFixedPoint(x_star=x, A_S=a_s, B_S=b_s, iterations=it)
        x = fx
    raise ConvergenceError(f"Solow iteration did not converge in {max_iter} steps (last x={x})")


# ---------------------------------------------------------------------------
# Parameter laws for the random map index
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamLaw:
    """Distribution of one map parameter.

    Built from a config value: a number (degenerate), a two-element list
    ``[low, high]`` (uniform) or a mapping with ``dist`` and its arguments.
    """

    dist: str
    args: tuple[float, ...]

    _SUPPORTED = {
        "constant": ("value",),
        "uniform": ("low", "high"),
        "normal": ("mean", "sd"),
        "lognormal": ("mean", "sigma"),
        "beta": ("a", "b"),
        "exponential": ("scale",),
        "gamma": ("shape", "scale"),
    }

    @classmethod
    def parse(cls, value: Any, key: str = "noise") -> "ParamLaw":
        if isinstance(value, ParamLaw):
            return value
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return cls("constant", (float(value),))
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ConfigError(key, "uniform range must have exactly two entries")
            low, high = (float(v) for v in value)
            if low > high:
                raise ConfigError(key, f"uniform range reversed ({low} > {high})")
            if low == high:
                return cls("constant", (low,))
            return cls("uniform", (low, high))
        if isinstance(value, Mapping):
            dist = str(value.get("dist", ""))
            if dist not in cls._SUPPORTED:
                raise ConfigError(f"{key}.dist", f"unknown distribution {dist!r}")
            names = cls._SUPPORTED[dist]
            try:
                args = tuple(float(value[n]) for n in names)
            except KeyError as exc:
                raise ConfigError(f"{key}.{exc.args[0]}", "missing distribution argument") from None
            return cls(dist, args)
        raise ConfigError(key, f"cannot interpret {value!r} as a parameter law")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        a = self.args
        if self.dist == "constant":
            return np.full(size, a[0])
        if self.dist == "uniform":
            return rng.uniform(a[0], a[1], size)
        if self.dist == "normal":
            return rng.normal(a[0], a[1], size)
        if self.dist == "lognormal":
            return rng.lognormal(a[0], a[1], size)
        if self.dist == "beta":
            return rng.beta(a[0], a[1], size)
        if self.dist == "exponential":
            return rng.exponential(a[0], size)
        return rng.gamma(a[0], a[1], size)

    @property
    def lower_support(self) -> float:
        if self.dist in ("constant", "uniform"):
            return self.args[0]
        if self.dist == "normal":
            return -math.inf
        return 0.0

    @property
    def is_degenerate(self) -> bool:
        return self.dist == "constant"

    def mean_log(self) -> float:
        """E[ln A]; used to check the contraction condition of affine maps."""
        a = self.args
        if self.dist == "constant":
            return math.log(a[0]) if a[0] > 0 else -math.inf
        if self.dist == "uniform":
            lo, hi = a
            if lo < 0:
                return math.nan
            if lo == 0:
                return math.log(hi) - 1.0
            return (hi * math.log(hi) - lo * math.log(lo)) / (hi - lo) - 1.0
        if self.dist == "lognormal":
            return a[0]
        if self.dist == "beta":
            return float(special.digamma(a[0]) - special.digamma(a[0] + a[1]))
        if self.dist == "exponential":
            return math.log(a[0]) - float(np.euler_gamma)
        if self.dist == "gamma":
            return float(special.digamma(a[0])) + math.log(a[1])
        return math.nan

    def to_config(self) -> Any:
        if self.dist == "constant":
            return self.args[0]
        if self.dist == "uniform":
            return list(self.args)
        out: dict[str, Any] = {"dist": self.dist}
        out.update(dict(zip(self._SUPPORTED[self.dist], self.args)))
        return out


@dataclass(frozen=True)
class MapTable:
    """User-supplied family of monotone maps given on shared nodes.

    Row ``k`` of ``values`` is the map selected when the index draws ``k``;
    maps are evaluated by linear interpolation, which preserves monotonicity.
    """

    nodes: np.ndarray
    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0):
            raise ValidationError("table nodes must be strictly increasing with at least two entries")
        if values.shape[1] != nodes.size:
            raise ValidationError("every table row needs one value per node")
        if np.any(np.diff(values, axis=1) < 0):
            raise ValidationError("table maps must be monotone non-decreasing")
        if weights.shape != (values.shape[0],) or np.any(weights < 0) or weights.sum() <= 0:
            raise ValidationError("table weights must be non-negative, one per row")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights / weights.sum())


# ---------------------------------------------------------------------------
# Economy, trajectories, empirical laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RandomMapEconomy:
    """An N-individual economy driven by i.i.d. random monotone maps.

    Parameters
    ----------
    map_kind : {"affine", "logistic", "table"}
        ``affine``: ``x -> A x + B`` with ``A >= 0``.
        ``logistic``: ``x -> lo + (hi - lo) * expit(steepness * (x - center))``.
        ``table``: rows of ``table`` chosen with ``table.weights``.
    noise_law : mapping
        Parameter name to :class:`ParamLaw` (or anything ``ParamLaw.parse``
        accepts).  Affine needs ``A`` and ``B``; logistic needs ``center`` and
        ``steepness``; table needs nothing.
    state_bounds : (lo, hi)
        Closed state interval; states are clipped onto it.
    n_individuals : int
        Cross-section size used by :func:`simulate_population`.
    """

    map_kind: str = "affine"
    noise_law: Mapping[str, Any] = field(
        default_factory=lambda: {"A": (0.0, 1.0), "B": (0.0, 0.5)}
    )
    state_bounds: tuple[float, float] = (0.0, 2.0)
    n_individuals: int = 1
    table: MapTable | None = None

    def __post_init__(self) -> None:
        if self.map_kind not in MAP_KINDS:
            raise ConfigError("economy.kind", f"unknown map kind {self.map_kind!r}")
        lo, hi = (float(b) for b in self.state_bounds)
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
            raise ConfigError("economy.state_bounds", f"need finite lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "state_bounds", (lo, hi))
        if int(self.n_individuals) < 1:
            raise ConfigError("economy.n_individuals", "must be at least 1")
        laws = {k: ParamLaw.parse(v, f"economy.noise.{k}") for k, v in self.noise_law.items()}
        object.__setattr__(self, "noise_law", laws)
        required = {"affine": ("A", "B"), "logistic": ("center", "steepness"), "table": ()}
        for name in required[self.map_kind]:
            if name not in laws:
                raise ConfigError(f"economy.noise.{name}", "missing for this map kind")
        if self.map_kind == "affine" and laws["A"].lower_support < 0:
            raise ConfigError("economy.noise.A", "slope law must be supported on [0, inf)")
        if self.map_kind == "logistic" and laws["steepness"].lower_support < 0:
            raise ConfigError("economy.noise.steepness", "steepness must be non-negative")
        if self.map_kind == "table" and self.table is None:
            raise ConfigError("economy.table", "table economies need a map table")

    @property
    def lo(self) -> float:
        return self.state_bounds[0]

    @property
    def hi(self) -> float:
        return self.state_bounds[1]

    @property
    def is_deterministic(self) -> bool:
        if self.map_kind == "table":
            return int(np.count_nonzero(self.table.weights)) == 1
        return all(law.is_degenerate for law in self.noise_law.values())

    def draw(self, rng: np.random.Generator, size: int) -> dict[str, np.ndarray]:
        """Draw ``size`` independent map indices."""
        if self.map_kind == "table":
            return {"row": rng.choice(self.table.weights.size, size=size, p=self.table.weights)}
        return {name: law.sample(rng, size) for name, law in self.noise_law.items()}

    def apply(self, x: np.ndarray, draws: Mapping[str, np.ndarray]) -> np.ndarray:
        """Evaluate the drawn maps at ``x`` without clipping."""
        if self.map_kind == "affine":
            return draws["A"] * x + draws["B"]
        if self.map_kind == "logistic":
            lo, hi = self.state_bounds
            return lo + (hi - lo) * special.expit(draws["steepness"] * (x - draws["center"]))
        tab = self.table
        rows = draws["row"]
        # locate x once, then interpolate each path on its own row
        idx = np.clip(np.searchsorted(tab.nodes, x, side="right") - 1, 0, tab.nodes.size - 2)
        x0, x1 = tab.nodes[idx], tab.nodes[idx + 1]
        w = np.clip((x - x0) / (x1 - x0), 0.0, 1.0)
        return (1.0 - w) * tab.values[rows, idx] + w * tab.values[rows, idx + 1]

    def step(self, x: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, int]:
        """Advance every entry of ``x`` by one freshly drawn map; returns (new, n_clipped)."""
        y = self.apply(x, self.draw(rng, x.shape[0]))
        lo, hi = self.state_bounds
        clipped = int(np.count_nonzero((y < lo) | (y > hi)))
        return np.clip(y, lo, hi), clipped

    def contraction_log_slope(self) -> float:
        """E[ln A] for affine economies (negative means geometric ergodicity)."""
        if self.map_kind != "affine":
            raise ValidationError("only defined for affine economies")
        return self.noise_law["A"].mean_log()

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any], prefix: str = "economy") -> "RandomMapEconomy":
        """Build from the documented keys ``kind``, ``state_bounds``, ``noise``,
        ``n_individuals`` and, for table economies, ``table``."""
        if not isinstance(cfg, Mapping):
            raise ConfigError(prefix, "must be a mapping")
        known = {"kind", "state_bounds", "noise", "n_individuals", "table"}
        for key in cfg:
            if key not in known:
                raise ConfigError(f"{prefix}.{key}", "unknown key")
        bounds = cfg.get("state_bounds", (0.0, 2.0))
        if not isinstance(bounds, (list, tuple)) or len(bounds) != 2:
            raise ConfigError(f"{prefix}.state_bounds", "must be a two-element list [lo, hi]")
        try:
            bounds = (float(bounds[0]), float(bounds[1]))
        except (TypeError, ValueError):
            raise ConfigError(f"{prefix}.state_bounds", "entries must be numbers") from None
        if bounds[0] >= bounds[1]:
            raise ConfigError(f"{prefix}.state_bounds", f"lo must be < hi, got {list(bounds)}")
        table = None
        kind = str(cfg.get("kind", "affine"))
        if kind == "table":
            tcfg = cfg.get("table")
            if not isinstance(tcfg, Mapping):
                raise ConfigError(f"{prefix}.table", "table economies need nodes/values")
            values = np.atleast_2d(np.asarray(tcfg.get("values", []), dtype=float))
            weights = tcfg.get("weights", np.ones(values.shape[0]))
            try:
                table = MapTable(np.asarray(tcfg.get("nodes", []), dtype=float), values, np.asarray(weights, dtype=float))
            except ValidationError as exc:
                raise ConfigError(f"{prefix}.table", str(exc)) from None
        noise = cfg.get("noise", {"A": [0.0, 1.0], "B": [0.0, 0.5]} if kind == "affine" else {})
        if not isinstance(noise, Mapping):
            raise ConfigError(f"{prefix}.noise", "must be a mapping of parameter laws")
        try:
            n_ind = int(cfg.get("n_individuals", 1))
        except (TypeError, ValueError):
            raise ConfigError(f"{prefix}.n_individuals", "must be an integer") from None
        return cls(map_kind=kind, noise_law=dict(noise), state_bounds=bounds, n_individuals=n_ind, table=table)

    def to_config(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "kind": self.map_kind,
            "state_bounds": list(self.state_bounds),
            "noise": {k: v.to_config() for k, v in self.noise_law.items()},
            "n_individuals": int(self.n_individuals),
        }
        if self.table is not None:
            out["table"] = {
                "nodes": self.table.nodes.tolist(),
                "values": self.table.values.tolist(),
                "weights": self.table.weights.tolist(),
            }
        return out


@dataclass
class Trajectory:
    states: np.ndarray
    seed: int
    initial: float
    n_clipped: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in enumerate(self.states):
            w.writerow([t, repr(float(v))])
        return buf.getvalue()


@dataclass
class EmpiricalDistribution:
    """Weighted sample standing in for an estimated law."""

    samples: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=float).ravel()
        if self.samples.size == 0:
            raise ValidationError("empirical distribution needs at least one sample")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != self.samples.shape or np.any(w < 0):
                raise ValidationError("weights must be non-negative, one per sample")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValidationError(f"weights must sum to 1 (got {w.sum()!r})")
            self.weights = w

    def __len__(self) -> int:
        return self.samples.size

    @property
    def probabilities(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.samples.size, 1.0 / self.samples.size)
        return self.weights

    def cdf(self, y: float | np.ndarray) -> np.ndarray:
        order = np.argsort(self.samples, kind="stable")
        xs = self.samples[order]
        cum = np.cumsum(self.probabilities[order])
        idx = np.searchsorted(xs, np.asarray(y, dtype=float), side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def mean(self) -> float:
        return float(np.dot(self.probabilities, self.samples))

    def ks_distance(self, other: "EmpiricalDistribution") -> float:
        """Two-sample Kolmogorov-Smirnov distance (weights honoured)."""
        if self.weights is None and other.weights is None:
            return float(stats.ks_2samp(self.samples, other.samples).statistic)
        grid = np.union1d(self.samples, other.samples)
        return float(np.max(np.abs(self.cdf(grid) - other.cdf(grid))))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["value", "weight"])
        for v, p in zip(self.samples, self.probabilities):
            w.writerow([repr(float(v)), repr(float(p))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# RNG plumbing
# ---------------------------------------------------------------------------


def path_rng(seed: int, block: int = 0) -> np.random.Generator:
    """Counter-based generator for one block of paths."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(block),))))


def _blocks(n_paths: int, seed: int) -> Iterator[tuple[slice, np.random.Generator]]:
    for b, start in enumerate(range(0, n_paths, BLOCK_SIZE)):
        yield slice(start, min(start + BLOCK_SIZE, n_paths)), path_rng(seed, b)


def _check_initial(econ: RandomMapEconomy, initial: float) -> float:
    lo, hi = econ.state_bounds
    initial = float(initial)
    if not lo <= initial <= hi:
        raise DomainError(f"initial state {initial} outside state bounds [{lo}, {hi}]")
    return initial


# ---------------------------------------------------------------------------
# Simulation operations
# ---------------------------------------------------------------------------


def simulate_chain(econ: RandomMapEconomy, initial: float, horizon: int, seed: int) -> Trajectory:
    """Compose ``horizon`` sampled maps starting from ``initial``."""
    initial = _check_initial(econ, initial)
    if horizon < 0:
        raise ValidationError("horizon must be non-negative")
    rng = path_rng(seed)
    states = np.empty(horizon + 1)
    states[0] = initial
    x = np.array([initial])
    clips = 0
    for t in range(1, horizon + 1):
        x, c = econ.step(x, rng)
        clips += c
        states[t] = x[0]
    if clips:
        logger.info("simulate_chain: %d of %d steps clipped to state bounds", clips, horizon)
    return Trajectory(states=states, seed=int(seed), initial=initial, n_clipped=clips)


def simulate_population(
    econ: RandomMapEconomy, horizon: int, seed: int, initials: Sequence[float] | None = None
) -> np.ndarray:
    """Simulate every individual; returns an array of shape ``(horizon + 1, N)``.

    Individuals draw independent maps.  Default initials are uniform on the
    state bounds.
    """
    n = econ.n_individuals
    out = np.empty((horizon + 1, n))
    for sl, rng in _blocks(n, seed):
        if initials is None:
            x = rng.uniform(econ.lo, econ.hi, sl.stop - sl.start)
        else:
            x = np.array([_check_initial(econ, v) for v in np.asarray(initials, dtype=float)[sl]])
        out[0, sl] = x
        for t in range(1, horizon + 1):
            x, _ = econ.step(x, rng)
            out[t, sl] = x
    return out


@dataclass
class ExtremeCDF:
    """Monte Carlo estimates of ``Pr(X_t(lo) <= y)`` and ``Pr(X_t(hi) <= y)``.

    ``diff_se_*[t, k]`` is the standard error of the paired estimate of
    ``cdf_*[t + 1, k] - cdf_*[t, k]`` (both use the same paths).
    """

    thresholds: np.ndarray
    cdf_inf: np.ndarray
    cdf_sup: np.ndarray
    se_inf: np.ndarray
    se_sup: np.ndarray
    diff_se_inf: np.ndarray
    diff_se_sup: np.ndarray
    n_paths: int

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.cdf_inf.shape[0])

    def violations(self, n_se: float = 3.0) -> list[tuple[str, int, float, float]]:
        """Steps where monotonicity fails by more than ``n_se`` standard errors.

        Returns ``(which, t, threshold, excess)`` tuples, ``which`` in
        ``{"inf", "sup"}``; an empty list means the check passed.
        """
        out = []
        d_inf = np.diff(self.cdf_inf, axis=0)  # should be <= 0
        d_sup = np.diff(self.cdf_sup, axis=0)  # should be >= 0
        # floor the SE at one path so a zero-variance column is not infinitely strict
        floor = 1.0 / self.n_paths
        bad_inf = d_inf > n_se * np.maximum(self.diff_se_inf, floor)
        bad_sup = -d_sup > n_se * np.maximum(self.diff_se_sup, floor)
        for t, k in zip(*np.nonzero(bad_inf)):
            out.append(("inf", int(t), float(self.thresholds[k]), float(d_inf[t, k])))
        for t, k in zip(*np.nonzero(bad_sup)):
            out.append(("sup", int(t), float(self.thresholds[k]), float(-d_sup[t, k])))
        return out

    def is_monotone(self, n_se: float = 3.0) -> bool:
        return not self.violations(n_se)


def extreme_cdf_monotonicity(
    econ: RandomMapEconomy,
    horizon: int,
    n_paths: int,
    grid: Sequence[float],
    seed: int,
) -> ExtremeCDF:
    """Estimate the CDFs of paths started at the two extreme states.

    Both extremes are pushed through the same sampled maps, so every path
    pair is coupled.  Row ``t`` of the returned matrices corresponds to
    ``X_t``; row 0 is the initial point mass.
    """
    thresholds = np.asarray(grid, dtype=float).ravel()
    if thresholds.size == 0:
        raise ValidationError("threshold grid must be non-empty")
    if n_paths < 100:
        raise ValidationError("n_paths must be at least 100")
    if horizon < 0:
        raise ValidationError("horizon must be non-negative")
    T, G = horizon + 1, thresholds.size
    cnt = {w: np.zeros((T, G)) for w in ("inf", "sup")}
    dsum = {w: np.zeros((T - 1, G)) for w in ("inf", "sup")}
    dabs = {w: np.zeros((T - 1, G)) for w in ("inf", "sup")}
    clips = 0
    for sl, rng in _blocks(n_paths, seed):
        m = sl.stop - sl.start
        xs = {"inf": np.full(m, econ.lo), "sup": np.full(m, econ.hi)}
        prev = {w: xs[w][:, None] <= thresholds[None, :] for w in xs}
        for w in xs:
            cnt[w][0] += prev[w].sum(axis=0)
        for t in range(1, T):
            draws = econ.draw(rng, m)
            for w in xs:
                y = econ.apply(xs[w], draws)
                clips += int(np.count_nonzero((y < econ.lo) | (y > econ.hi)))
                xs[w] = np.clip(y, econ.lo, econ.hi)
                ind = xs[w][:, None] <= thresholds[None, :]
                cnt[w][t] += ind.sum(axis=0)
                d = ind.astype(np.int8) - prev[w].astype(np.int8)
                dsum[w][t - 1] += d.sum(axis=0)
                dabs[w][t - 1] += np.abs(d).sum(axis=0)
                prev[w] = ind
    if clips:
        logger.info("extreme_cdf_monotonicity: %d map evaluations clipped", clips)
    n = float(n_paths)
    res = {}
    for w in ("inf", "sup"):
        p = cnt[w] / n
        se = np.sqrt(p * (1.0 - p) / n)
        mean_d = dsum[w] / n
        var_d = np.maximum(dabs[w] / n - mean_d**2, 0.0)
        res[w] = (p, se, np.sqrt(var_d / n))
    return ExtremeCDF(
        thresholds=thresholds,
        cdf_inf=res["inf"][0],
        cdf_sup=res["sup"][0],
        se_inf=res["inf"][1],
        se_sup=res["sup"][1],
        diff_se_inf=res["inf"][2],
        diff_se_sup=res["sup"][2],
        n_paths=n_paths,
    )


def estimate_stationary(
    econ: RandomMapEconomy,
    burn_in: int,
    n_samples: int,
    seed: int,
    initial: float | None = None,
) -> EmpiricalDistribution:
    """Sample the stationary law by running independent chains past burn-in.

    Each sample is the state of its own chain after ``burn_in`` steps.
    Chains start uniformly on the state bounds unless ``initial`` fixes a
    common starting point.
    """
    if burn_in < 1 or n_samples < 1:
        raise ValidationError("burn_in and n_samples must both be at least 1")
    if initial is not None:
        initial = _check_initial(econ, initial)
    out = np.empty(n_samples)
    clips = 0
    for sl, rng in _blocks(n_samples, seed):
        m = sl.stop - sl.start
        x = rng.uniform(econ.lo, econ.hi, m) if initial is None else np.full(m, initial)
        for _ in range(burn_in):
            x, c = econ.step(x, rng)
            clips += c
        out[sl] = x
    if clips:
        logger.info("estimate_stationary: %d map evaluations clipped", clips)
    return EmpiricalDistribution(out)


@dataclass(frozen=True)
class UniquenessReport:
    ks_distance: float
    p_value: float
    n_samples: int
    burn_in: int
    threshold: float

    @property
    def passed(self) -> bool:
        return self.ks_distance < self.threshold


def stationary_uniqueness(
    econ: RandomMapEconomy,
    burn_in: int = 1000,
    n_samples: int = 100_000,
    seed: int = 0,
    threshold: float = 0.02,
) -> UniquenessReport:
    """Compare stationary samples started at ``lo`` and at ``hi``.

    The two runs use unrelated seeds so agreement is not produced by
    coupling the chains.
    """
    from_lo = estimate_stationary(econ, burn_in, n_samples, seed, initial=econ.lo)
    from_hi = estimate_stationary(econ, burn_in, n_samples, seed + 1_000_003, initial=econ.hi)
    res = stats.ks_2samp(from_lo.samples, from_hi.samples)
    return UniquenessReport(
        ks_distance=float(res.statistic),
        p_value=float(res.pvalue),
        n_samples=n_samples,
        burn_in=burn_in,
        threshold=threshold,
    )


@dataclass(frozen=True)
class EqualityCheck:
    p_inf_in: float
    p_sup_out: float

    @property
    def holds(self) -> bool:
        return self.p_inf_in > 0 and self.p_sup_out > 0


def equality_in_probability_check(
    econ: RandomMapEconomy,
    subset: tuple[float, float],
    horizon: int,
    n_paths: int,
    seed: int,
) -> EqualityCheck:
    """Estimate ``Pr(X_T(lo) in S)`` and ``Pr(X_T(hi) not in S)`` for ``S = [a, b]``."""
    a, b = (float(v) for v in subset)
    if not (econ.lo <= a < b <= econ.hi):
        raise ValidationError(f"subset [{a}, {b}] must lie inside state bounds {list(econ.state_bounds)}")
    if n_paths < 1 or horizon < 0:
        raise ValidationError("n_paths must be positive and horizon non-negative")
    hits_in = hits_out = 0
    for sl, rng in _blocks(n_paths, seed):
        m = sl.stop - sl.start
        x_lo, x_hi = np.full(m, econ.lo), np.full(m, econ.hi)
        for _ in range(horizon):
            draws = econ.draw(rng, m)
            x_lo = np.clip(econ.apply(x_lo, draws), econ.lo, econ.hi)
            x_hi = np.clip(econ.apply(x_hi, draws), econ.lo, econ.hi)
        hits_in += int(np.count_nonzero((x_lo >= a) & (x_lo <= b)))
        hits_out += int(np.count_nonzero((x_hi < a) | (x_hi > b)))
    check = EqualityCheck(p_inf_in=hits_in / n_paths, p_sup_out=hits_out / n_paths)
    if not check.holds:
        logger.warning("equality in probability violated empirically for subset [%g, %g]", a, b)
    return check

