"""Master-equation integration, jump moments and the mean-field closure.

Densities live on uniform grids (:class:`GridDensity`).  The integrator works
on node masses ``w_j * p_j`` with trapezoid weights ``w_j`` so that the
discrete mass plus the logged boundary outflow is conserved to rounding.

Jump kernels are translation-invariant exponential laws, the no-jump
(Dirac) kernel, or an arbitrary user matrix ``W[i, j] = W(x_i | x_j)``.  The
Dirac part of a kernel never needs discretising: its gain and loss cancel.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import signal

from .errors import (
    ClosureBreakdownError,
    CoverageError,
    NormalizationError,
    ParseError,
    StepSizeError,
    UnsupportedOrderError,
    ValidationError,
)
from .grids import GridDensity, trapezoid_weights

__all__ = [
    "GridDensity",
    "TransitionKernel",
    "JumpMoments",
    "MeanFieldState",
    "jump_moments",
    "generator_moments",
    "integrate_master",
    "stationary_residual",
    "integrate_mean_field",
    "moments_from_grid",
    "mean_field_to_csv",
    "gamma_domain_max",
]

logger = logging.getLogger(__name__)

KERNEL_KINDS = ("exponential", "delta", "grid")
NEGATIVE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Jump part of a transition rate ``W(x | x')``.

    ``exponential``: jumps ``x - x' ~ Exp(beta)``, so ``V(u) = beta exp(-beta u)``.
    ``delta``: no jumps at all.
    ``grid``: ``values[i, j]`` is the rate density of a jump to ``grid[i]``
    from ``grid[j]``; the diagonal is ignored.
    """

    kind: str
    beta: float | None = None
    grid: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise ValidationError(f"kernel kind must be one of {KERNEL_KINDS}, got {self.kind!r}")
        if self.kind == "exponential":
            if self.beta is None or not self.beta > 0:
                raise ValidationError("exponential kernel needs beta > 0")
        if self.kind == "grid":
            if self.grid is None or self.values is None:
                raise ValidationError("grid kernel needs grid and values")
            g = np.asarray(self.grid, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if v.shape != (g.size, g.size):
                raise ValidationError("grid kernel values must be a square matrix over the grid")
            if np.any(v < 0):
                raise ValidationError("kernel values must be non-negative")
            object.__setattr__(self, "grid", g)
            object.__setattr__(self, "values", v)

    @classmethod
    def exponential(cls, beta: float) -> "TransitionKernel":
        return cls("exponential", beta=float(beta))

    @classmethod
    def delta(cls) -> "TransitionKernel":
        return cls("delta")

    @classmethod
    def from_matrix(cls, grid: np.ndarray, values: np.ndarray) -> "TransitionKernel":
        return cls("grid", grid=grid, values=values)

    def jump_density(self, u: np.ndarray) -> np.ndarray:
        """``V(u)`` for the exponential kind."""
        self._require_exponential()
        u = np.asarray(u, dtype=float)
        return np.where(u >= 0, self.beta * np.exp(-self.beta * np.maximum(u, 0.0)), 0.0)

    def jump_survival(self, u: np.ndarray) -> np.ndarray:
        """``Pr(jump > u)`` for the exponential kind."""
        self._require_exponential()
        u = np.asarray(u, dtype=float)
        return np.where(u >= 0, np.exp(-self.beta * np.maximum(u, 0.0)), 1.0)

    def _require_exponential(self) -> None:
        if self.kind != "exponential":
            raise ValidationError(f"operation defined for exponential kernels only, got {self.kind}")

    def _matrix_on(self, grid: np.ndarray) -> np.ndarray:
        if self.grid.shape != grid.shape or not np.allclose(self.grid, grid, rtol=0, atol=1e-9):
            raise ValidationError("grid kernel is defined on a different grid than the density")
        w = self.values.copy()
        np.fill_diagonal(w, 0.0)
        return w

    def to_csv(self) -> str:
        if self.kind != "grid":
            raise ValidationError("only grid kernels export to CSV")
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["x", "x_prime", "w"])
        for i, x in enumerate(self.grid):
            for j, xp in enumerate(self.grid):
                out.writerow([repr(float(x)), repr(float(xp)), repr(float(self.values[i, j]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, source: str | None = None) -> "TransitionKernel":
        """Load a grid kernel from long-format rows ``x,x_prime,w``."""
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["x", "x_prime", "w"]:
            raise ParseError("expected header 'x,x_prime,w'", line=1, source=source)
        triples = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                triples.append(tuple(float(c) for c in row[:3]))
                if len(row) != 3:
                    raise ValueError
            except ValueError:
                raise ParseError(f"malformed row {row!r}", line=lineno, source=source) from None
        arr = np.array(triples, dtype=float).reshape(-1, 3)
        grid = np.unique(arr[:, 0])
        if not np.array_equal(grid, np.unique(arr[:, 1])) or arr.shape[0] != grid.size**2:
            raise ParseError("kernel rows must cover every (x, x_prime) grid pair once", source=source)
        values = np.zeros((grid.size, grid.size))
        values[np.searchsorted(grid, arr[:, 0]), np.searchsorted(grid, arr[:, 1])] = arr[:, 2]
        return cls.from_matrix(grid, values)


# ---------------------------------------------------------------------------
# Jump moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpMoments:
    """First and second jump moments ``a_r(y) = int (y' - y)^r W(y'|y) dy'``."""

    a1: Callable[[np.ndarray], np.ndarray]
    a2: Callable[[np.ndarray], np.ndarray] | None


def _constant(value: float) -> Callable[[np.ndarray], np.ndarray]:
    def f(y):
        return np.full(np.shape(y), value) if np.ndim(y) else float(value)

    return f


def jump_moments(kernel: TransitionKernel, r: int = 2) -> JumpMoments:
    """Jump moments up to order ``r`` (1 or 2).

    Exponential kernels use 8-point Gauss-Laguerre quadrature, exact for
    polynomial moments.  Grid kernels use trapezoid quadrature per node and
    linear interpolation between nodes.
    """
    if r > 2:
        raise UnsupportedOrderError(f"jump moments above order 2 are not supported (got {r})")
    if r < 1:
        raise ValidationError("moment order must be 1 or 2")
    if kernel.kind == "delta":
        a = [_constant(0.0), _constant(0.0)]
    elif kernel.kind == "exponential":
        t, w = np.polynomial.laguerre.laggauss(8)
        a = [_constant(float(np.dot(w, (t / kernel.beta) ** k))) for k in (1, 2)]
    else:
        g = kernel.grid
        dx = float(g[1] - g[0])
        wts = trapezoid_weights(g.size, dx)
        mat = kernel._matrix_on(g)
        jumps = g[:, None] - g[None, :]
        node_moments = [(wts[:, None] * jumps**k * mat).sum(axis=0) for k in (1, 2)]

        def interp(vals):
            return lambda y: np.interp(y, g, vals)

        a = [interp(v) for v in node_moments]
    return JumpMoments(a[0], a[1] if r == 2 else None)


def generator_moments(
    kernel: TransitionKernel,
    alpha: float,
    drift: float | Callable[[np.ndarray], np.ndarray] = 0.0,
) -> JumpMoments:
    """Moments of the full generator: deterministic drift plus ``alpha``-rate jumps.

    The drift moves the state at velocity ``drift(y)`` and contributes only to
    ``a1``.
    """
    jm = jump_moments(kernel, 2)
    v = drift if callable(drift) else _constant(float(drift))
    return JumpMoments(
        a1=lambda y: v(y) + alpha * jm.a1(y),
        a2=lambda y: alpha * jm.a2(y),
    )


# ---------------------------------------------------------------------------
# Master equation
# ---------------------------------------------------------------------------


def _velocity(c, x: np.ndarray) -> np.ndarray:
    if callable(c):
        return np.broadcast_to(np.asarray(c(x), dtype=float), x.shape).copy()
    return np.full(x.shape, float(c))


class _JumpOperator:
    """Mass-conserving discretisation of ``alpha * [int W(x|x')P(x')dx' - lambda(x) P(x)]``.

    Exponential jumps are binned to the nearest node: a jump of ``m`` cells
    has probability ``exp(-beta (m - 1/2) dx) - exp(-beta (m + 1/2) dx)``,
    and jumps shorter than half a cell are self-transitions.  Because these
    bin weights are geometric in ``m`` the gain convolution is a first-order
    recursion, evaluated with ``lfilter``.
    """

    def __init__(self, kernel: TransitionKernel, grid: np.ndarray, dx: float):
        self.kind = kernel.kind
        self.k = grid.size
        if self.kind == "exponential":
            b = kernel.beta
            self.r = math.exp(-b * dx)
            self.s = math.exp(b * dx / 2.0) - math.exp(-b * dx / 2.0)
            self.leave = math.exp(-b * dx / 2.0)
            # probability a jump from node j overshoots the last node
            self.overshoot = np.exp(-b * dx * (self.k - 1 - np.arange(self.k) + 0.5))
            self.max_rate = 1.0
        elif self.kind == "grid":
            mat = kernel._matrix_on(grid)
            self.transfer = mat * trapezoid_weights(grid.size, dx)[:, None]
            self.out_rate = self.transfer.sum(axis=0)
            self.max_rate = float(self.out_rate.max(initial=0.0))
        else:
            self.max_rate = 0.0

    def rates(self, masses: np.ndarray) -> tuple[np.ndarray, float]:
        """Net mass rate per node and the rate of mass leaving the grid."""
        if self.kind == "delta":
            return np.zeros_like(masses), 0.0
        if self.kind == "grid":
            return self.transfer @ masses - self.out_rate * masses, 0.0
        h = signal.lfilter([0.0, self.r], [1.0, -self.r], masses)
        gain = self.s * h
        loss = self.leave * masses
        return gain - loss, float(np.dot(self.overshoot, masses))


def _check_steps(v_faces: np.ndarray, dx: float, dt: float, alpha: float, jump_rate: float) -> None:
    vmax = float(np.max(np.abs(v_faces), initial=0.0))
    if vmax * dt > dx * (1 + 1e-12):
        raise StepSizeError(f"CFL bound violated: max|c| * dt = {vmax * dt:.6g} > dx = {dx:.6g}", dx / vmax)
    total = alpha * max(jump_rate, 1.0 if jump_rate > 0 else 0.0)
    if total * dt >= 1.0:
        raise StepSizeError(f"jump rate times dt = {total * dt:.6g} must be below 1", 0.9 / total)


def integrate_master(
    p0: GridDensity,
    kernel: TransitionKernel,
    alpha: float,
    c: float | Callable[[np.ndarray], np.ndarray],
    dt: float,
    horizon: float,
    save_every: int | None = None,
) -> list[GridDensity]:
    """Explicit Euler integration of ``dP/dt = -d(cP)/dx + alpha [W*P - lambda P]``.

    Parameters
    ----------
    p0
        Initial density.  Its mass need not be one; mass plus outflow is
        conserved.
    kernel, alpha
        Jump kernel and jump rate.
    c
        Drift velocity, a constant or a callable of ``x``.  A constant gives
        pure translation; ``c(x) = -x`` gives proportional decay, whose
        balance against exponential jumps has a Gamma stationary law.
    dt, horizon
        Time step and final time.  The last step is shortened to land on
        ``horizon`` exactly.
    save_every
        Snapshot stride in steps; by default about 100 snapshots are kept.
        The initial and final states are always included.

    Returns
    -------
    list of GridDensity
        Snapshots with ``t`` set and ``outflow`` holding the cumulative mass
        that left the grid through either boundary.
    """
    if dt <= 0 or horizon < 0:
        raise ValidationError("dt must be positive and horizon non-negative")
    if alpha < 0:
        raise ValidationError("alpha must be non-negative")
    x = p0.grid
    dx = p0.dx
    w = trapezoid_weights(x.size, dx)
    faces = 0.5 * (x[:-1] + x[1:])
    v_face = _velocity(c, faces)
    v_edge = _velocity(c, x[[0, -1]])
    jumps = _JumpOperator(kernel, x, dx)
    _check_steps(np.concatenate([v_face, v_edge]), dx, dt, alpha, jumps.max_rate)

    n_steps = int(math.ceil(horizon / dt - 1e-9)) if horizon > 0 else 0
    stride = save_every or max(1, n_steps // 100)
    masses = w * p0.values
    t = p0.t
    outflow = p0.outflow
    clipped = 0.0
    out = [GridDensity(x, p0.values.copy(), t, outflow)]
    right = v_face > 0
    for step in range(1, n_steps + 1):
        h = min(dt, p0.t + horizon - t)
        p = masses / w
        # upwind advection flux through each interior face (mass per unit time)
        flux = v_face * np.where(right, p[:-1], p[1:])
        # edge nodes carry half a cell, so at the CFL limit the flux out of
        # them through the first/last face must be capped at what they hold
        if flux[0] > 0:
            flux[0] = min(flux[0], masses[0] / h)
        if flux[-1] < 0:
            flux[-1] = max(flux[-1], -masses[-1] / h)
        dm = np.zeros_like(masses)
        dm[:-1] -= flux
        dm[1:] += flux
        # outward boundary flux, capped at what the edge node holds
        left_out = max(-v_edge[0], 0.0) * p[0] * h
        right_out = max(v_edge[1], 0.0) * p[-1] * h
        left_out = min(left_out, max(masses[0] + h * dm[0], 0.0))
        right_out = min(right_out, max(masses[-1] + h * dm[-1], 0.0))
        jdm, jout = jumps.rates(masses)
        masses = masses + h * (dm + alpha * jdm)
        masses[0] -= left_out
        masses[-1] -= right_out
        outflow += left_out + right_out + h * alpha * jout
        neg = masses < 0
        if np.any(neg):
            lost = float(-masses[neg].sum())
            clipped += lost
            if np.any(masses[neg] < -NEGATIVE_TOL * w[neg]):
                logger.warning("clipped negative density at step %d (mass %.3g)", step, lost)
            masses[neg] = 0.0
        t += h
        if step % stride == 0 or step == n_steps:
            out.append(GridDensity(x, masses / w, t, outflow))
    if clipped:
        logger.info("total clipped negative mass %.3g", clipped)
    logger.debug("master equation: %d steps, final mass %.12g, outflow %.3g", n_steps, float(masses.sum()), outflow)
    return out


def _left_riemann_convolution(kernel_vals: Callable[[np.ndarray], np.ndarray], x: np.ndarray, p: np.ndarray, dx: float) -> np.ndarray:
    # (K*P)(x_k) ~ dx * sum_{j<k} K(x_k - x_j) P(x_j), first order in dx
    u = x[:, None] - x[None, :]
    mat = np.tril(kernel_vals(u), k=-1)
    return dx * (mat @ p)


def stationary_residual(
    p: GridDensity,
    kernel: TransitionKernel,
    alpha: float,
    form: str = "balance",
    decay_rate: float = 1.0,
) -> float:
    """Largest interior violation of the stationary jump-decay balance.

    ``form="balance"`` (default) checks the once-integrated stationary
    equation of proportional decay (velocity ``-decay_rate * x``) plus jumps
    at rate ``alpha``::

        decay_rate * x P(x) = alpha * int_0^x P(x') Pr(jump > x - x') dx'

    i.e. decay flux down through ``x`` equals jump flux up through ``x``.
    For exponential jumps and unit decay this reads ``beta x P = alpha (V*P)``
    and the Gamma(alpha, beta) density solves it exactly, so the residual is pure
    quadrature error.  The convolution uses a left Riemann sum, so the
    residual falls by half when ``dx`` halves.

    ``form="literal"`` evaluates ``|c(x) P'(x) - alpha (V*P)(x)|`` with
    ``c(x) = x^2 / 2``.  The Gamma density does not solve that equation,
    and its residual stays of order one under refinement.
    """
    if form not in ("balance", "literal"):
        raise ValidationError("form must be 'balance' or 'literal'")
    x, vals, dx = p.grid, p.values, p.dx
    if x.size < 3:
        raise ValidationError("need at least three grid nodes")
    mass = p.mass
    if mass == 0:
        return 0.0
    mean = float(np.dot(p.weights, x * vals)) / mass
    if x[0] > 0 or x[-1] < 10 * mean:
        raise CoverageError(
            f"grid [{x[0]:.4g}, {x[-1]:.4g}] must contain [0, 10 * mean] = [0, {10 * mean:.4g}]"
        )
    if kernel.kind == "delta":
        jump_flux = np.zeros_like(vals)
        conv = np.zeros_like(vals)
    elif kernel.kind == "exponential":
        jump_flux = _left_riemann_convolution(kernel.jump_survival, x, vals, dx)
        conv = _left_riemann_convolution(kernel.jump_density, x, vals, dx)
    else:
        if form == "literal":
            raise ValidationError("literal form needs a translation-invariant (exponential) kernel")
        mat = kernel._matrix_on(x)
        wts = trapezoid_weights(x.size, dx)
        # tail[k, j]: rate of jumping from x_j to beyond x_k
        tail = np.cumsum((mat * wts[:, None])[::-1], axis=0)[::-1]
        above = np.vstack([tail[1:], np.zeros(x.size)])
        jump_flux = dx * np.einsum("kj,kj->k", np.tril(above, k=-1), np.broadcast_to(vals, above.shape))
    if form == "balance":
        resid = decay_rate * x * vals - alpha * jump_flux
    else:
        deriv = np.gradient(vals, dx, edge_order=1)
        resid = 0.5 * x**2 * deriv - alpha * conv
    return float(np.max(np.abs(resid[1:-1])))


def gamma_domain_max(alpha: float, beta: float) -> float:
    """Right end of a grid for a Gamma(alpha, beta) state: ``max(10 * mean, q_0.9999)``."""
    from .law_lab import GammaLaw

    law = GammaLaw(alpha, beta)
    return max(10.0 * law.mean, float(law.ppf(0.9999)))


# ---------------------------------------------------------------------------
# Mean field
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeanFieldState:
    m: float
    sigma2: float
    t: float = 0.0


def _fd_derivs(a1: Callable, m: float) -> tuple[float, float]:
    h = 1e-4 * (1.0 + abs(m))
    f_plus, f0, f_minus = float(a1(m + h)), float(a1(m)), float(a1(m - h))
    return (f_plus - f_minus) / (2 * h), (f_plus - 2 * f0 + f_minus) / h**2


def integrate_mean_field(
    init: MeanFieldState,
    moments: JumpMoments,
    dt: float,
    horizon: float,
    literal: bool = False,
) -> list[MeanFieldState]:
    """RK4 integration of the second-order moment closure.

    Solves::

        dm/dt      = a1(m) + sigma2 / 2 * a1''(m)
        dsigma2/dt = a2(m) + 2 a1'(m) sigma2

    with ``a1'`` and ``a1''`` from central differences.  ``literal=True``
    drops the ``a1''(m)`` factor from the mean equation, i.e.
    ``dm/dt = a1(m) + sigma2 / 2``.
    """
    if dt <= 0 or horizon < 0:
        raise ValidationError("dt must be positive and horizon non-negative")
    if moments.a2 is None:
        raise ValidationError("mean-field closure needs second jump moments")
    if init.sigma2 < 0:
        raise ClosureBreakdownError(f"initial variance is negative ({init.sigma2})")
    a1, a2 = moments.a1, moments.a2

    def rhs(y: np.ndarray) -> np.ndarray:
        m, s2 = y
        d1, d2 = _fd_derivs(a1, m)
        curv = 1.0 if literal else d2
        return np.array([float(a1(m)) + 0.5 * s2 * curv, float(a2(m)) + 2.0 * d1 * s2])

    y = np.array([init.m, init.sigma2], dtype=float)
    t = init.t
    n_steps = int(math.ceil(horizon / dt - 1e-9)) if horizon > 0 else 0
    out = [init]
    for _ in range(n_steps):
        h = min(dt, init.t + horizon - t)
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        if not np.all(np.isfinite(y)):
            raise ClosureBreakdownError(f"mean-field state became non-finite at t={t:.6g}")
        if y[1] < 0:
            raise ClosureBreakdownError(f"variance turned negative ({y[1]:.3g}) at t={t:.6g}")
        out.append(MeanFieldState(float(y[0]), float(y[1]), t))
    return out


def mean_field_to_csv(states: Sequence[MeanFieldState]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "m", "sigma2"])
    for s in states:
        w.writerow([repr(float(s.t)), repr(float(s.m)), repr(float(s.sigma2))])
    return buf.getvalue()


def moments_from_grid(p: GridDensity) -> dict[str, float]:
    """Trapezoid mean and variance of a normalised grid density."""
    mass = p.mass
    if abs(mass - 1.0) > 1e-3:
        raise NormalizationError(f"density integrates to {mass:.6g}, expected 1")
    w = p.weights * p.values
    mean = float(np.dot(w, p.grid))
    var = float(np.dot(w, (p.grid - mean) ** 2))
    return {"mean": mean, "variance": var}
