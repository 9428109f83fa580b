"""Skewed stable Green function, its constants and the rational comparison kernels.

G(t, x) is the inverse Fourier transform of exp(-t |xi|^a exp(-i delta pi sgn(xi)/2)).
Scaling reduces everything to the unit-time profile G(1, y), which we write as

    G(1, y) = (1/pi) Re int_0^inf exp(i xi y - xi^a e^{-i theta}) d xi,   theta = delta pi / 2.

The integrand is analytic off the negative axis, so the ray is rotated to
angle psi(y) where both exp(i xi y) and exp(-xi^a e^{-i theta}) decay.  This
removes most of the oscillation that makes the real-axis integral slow for
large |y|.
"""

from __future__ import annotations

import functools
import logging
import math
import threading

import numpy as np
from scipy import optimize, special
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

from .errors import AccuracyError, DomainError
from .model import GridSpec, ModelParams, ScalarField

log = logging.getLogger(__name__)

CLAMP_LIMIT = 1e-8  # quadrature noise below this is clamped to zero
DENSITY_TOL = 1e-10  # residual between two quadrature resolutions
CUTOFF_EXPONENT = 45.0  # integrand magnitude exp(-45) ~ 3e-20 at the cutoff
TABLE_HALF_WIDTH = 60.0
TABLE_STEP = 0.02

clamp_events = 0  # number of tiny negative values clamped so far


@functools.lru_cache(maxsize=None)
def _gl(n: int):
    return roots_legendre(n)


def _ray_angle(a: float, theta: float, y: np.ndarray) -> np.ndarray:
    s = np.sign(y)
    psi = (theta + s * np.pi / 2) / (2 * a)
    psi = np.where(y == 0, theta / a, psi)
    return np.clip(psi, -np.pi / 2, np.pi / 2)


def _profile_quadrature(a: float, theta: float, y: np.ndarray, n_nodes: int, refine: int = 1,
                        r_cap: float = 0.0) -> np.ndarray:
    """G(1, y) by Gauss-Legendre panels on the rotated ray, vectorised over y."""
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape)
    flat_y = y.reshape(-1)
    flat_out = out.reshape(-1)
    psi = _ray_angle(a, theta, flat_y)
    damp_y = np.abs(flat_y * np.sin(psi))
    damp_a = np.cos(a * psi - theta)
    with np.errstate(divide="ignore"):
        r1 = np.where(damp_y > 0, CUTOFF_EXPONENT / np.maximum(damp_y, 1e-300), np.inf)
    r2 = (CUTOFF_EXPONENT / damp_a) ** (1.0 / a)
    rmax = np.minimum(r1, r2)
    if r_cap > 0:
        rmax = np.minimum(rmax, r_cap)
    phase = rmax * np.abs(flat_y) * np.cos(psi) + rmax**a * np.abs(np.sin(a * psi - theta))
    panels = (np.ceil(phase) + 8).astype(int) * refine
    # bucket points by panel count (rounded up to a power of two) to vectorise
    buckets = 2 ** np.ceil(np.log2(panels)).astype(int)
    xg, wg = _gl(n_nodes)
    for nb in np.unique(buckets):
        idx = np.nonzero(buckets == nb)[0]
        edges = np.linspace(0.0, 1.0, nb + 1)
        u = (0.5 * (edges[1:] - edges[:-1])[:, None] * xg[None, :] + 0.5 * (edges[1:] + edges[:-1])[:, None]).ravel()
        wu = (0.5 * (edges[1:] - edges[:-1])[:, None] * wg[None, :]).ravel()
        for chunk in np.array_split(idx, max(1, len(idx) * u.size // 2_000_000 + 1)):
            if chunk.size == 0:
                continue
            R = rmax[chunk][:, None]
            rot = np.exp(1j * psi[chunk])[:, None]
            r = R * u[None, :] ** 3  # cubic grading tames the r^a endpoint behaviour
            dr = 3 * R * u[None, :] ** 2 * wu[None, :]
            xi = r * rot
            expo = 1j * xi * flat_y[chunk][:, None] - r**a * np.exp(1j * (a * psi[chunk][:, None] - theta))
            val = np.sum(np.exp(expo) * dr, axis=1) * rot[:, 0]
            flat_out[chunk] = val.real / np.pi
    return out


class GreenProfile:
    """The unit-time profile G(1, .) for fixed (a, delta).

    ``exact`` runs the quadrature; calling the object uses a cubic spline
    table on [-60, 60] and the tail expansion outside it, which is what the
    heavy consumers (moments, simulator) need.
    """

    def __init__(self, a: float, delta: float, n_nodes: int = 16, xi_max: float = 0.0):
        self.a = float(a)
        self.delta = float(delta)
        self.theta = self.delta * math.pi / 2
        self.n_nodes = int(n_nodes)
        self.xi_max = float(xi_max)
        self._table = None
        self._lock = threading.Lock()

    def exact(self, y, refine: int = 1) -> np.ndarray:
        if self.a == 2:
            # heat kernel; the quadrature only has absolute accuracy in its Gaussian tails
            y = np.asarray(y, dtype=float)
            return np.exp(-(y**2) / 4) / math.sqrt(4 * math.pi)
        return _profile_quadrature(self.a, self.theta, y, self.n_nodes, refine, self.xi_max)

    def _build_table(self):
        ys = np.arange(-TABLE_HALF_WIDTH, TABLE_HALF_WIDTH + TABLE_STEP / 2, TABLE_STEP)
        vals = self.exact(ys)
        return CubicSpline(ys, vals)

    @property
    def table(self) -> CubicSpline:
        if self._table is None:
            with self._lock:
                if self._table is None:
                    self._table = self._build_table()
        return self._table

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        inside = np.abs(y) <= TABLE_HALF_WIDTH
        out = np.empty(y.shape)
        out[inside] = self.table(y[inside])
        if not np.all(inside):
            if self.a == 2:
                out[~inside] = self.exact(y[~inside])
                return out
            out[~inside] = _tail_series(self.a, self.delta, y[~inside], 3)
        return out

    def density(self, t, x) -> np.ndarray:
        """G(t, x) through the scaling relation, using the fast table."""
        t = np.asarray(t, dtype=float)
        scale = t ** (-1.0 / self.a)
        return scale * self(np.asarray(x, dtype=float) * scale)


_cache_lock = threading.Lock()
_profiles: dict[tuple, GreenProfile] = {}


def green_profile(params: ModelParams, n_nodes: int = 16, xi_max: float = 0.0) -> GreenProfile:
    """Shared, lock-protected cache of unit-time profiles keyed by (a, delta, quadrature)."""
    key = (float(params.a), float(params.delta), int(n_nodes), float(xi_max))
    with _cache_lock:
        prof = _profiles.get(key)
        if prof is None:
            prof = GreenProfile(params.a, params.delta, n_nodes, xi_max)
            _profiles[key] = prof
    return prof


def _clamp(values: np.ndarray) -> np.ndarray:
    global clamp_events
    neg = values < 0
    if np.any(neg):
        worst = float(values[neg].min())
        if worst < -CLAMP_LIMIT:
            raise AccuracyError(f"Green quadrature returned {worst:.3e} < 0", residual=-worst)
        clamp_events += int(neg.sum())
        log.debug("clamped %d tiny negative Green values (min %.2e)", int(neg.sum()), worst)
        values = np.where(neg, 0.0, values)
    return values


def green_density(params: ModelParams, t: float, x: float, n_nodes: int = 16) -> float:
    """G(t, x) to about 1e-12 absolute, checked against a refined quadrature."""
    if not t > 0:
        raise DomainError(f"green_density needs t > 0, got {t!r}")
    scale = t ** (-1.0 / params.a)
    y = np.array([x * scale])
    prof = green_profile(params, n_nodes)
    v1 = prof.exact(y)
    v2 = prof.exact(y, refine=2)
    resid = float(abs(v1[0] - v2[0]))
    if resid > DENSITY_TOL:
        raise AccuracyError(f"Green quadrature did not settle at t={t}, x={x}", residual=resid * scale)
    return float(_clamp(v2)[0] * scale)


def green_values(params: ModelParams, t, x, n_nodes: int = 16) -> np.ndarray:
    """Vectorised G(t, x) by direct quadrature (no table)."""
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    if np.any(t <= 0):
        raise DomainError("green_values needs t > 0")
    scale = t ** (-1.0 / params.a)
    vals = green_profile(params, n_nodes).exact(x * scale)
    return _clamp(vals) * scale


@functools.lru_cache(maxsize=None)
def _lambda_const(a: float, delta: float) -> float:
    prof = GreenProfile(a, delta)
    ys = np.linspace(-3, 3, 121)
    vals = prof.exact(ys)
    i = int(np.argmax(vals))
    i = min(max(i, 1), len(ys) - 2)
    res = optimize.minimize_scalar(
        lambda y: -prof.exact(np.array([y]))[0],
        bracket=(ys[i - 1], ys[i], ys[i + 1]),
        method="golden",
        tol=1e-10,
    )
    return float(-res.fun)


def lambda_const(params: ModelParams) -> float:
    """Maximum of the unit-time density, sup_x G(1, x)."""
    return _lambda_const(float(params.a), float(params.delta))


def g_a_kernel(a: float, t, x) -> np.ndarray | float:
    """Rational kernel (1/pi) t / (t^(2/a) + x^2)^((a+1)/2)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise DomainError("g_a_kernel needs t > 0")
    if not a > 0:
        raise DomainError("g_a_kernel needs a > 0")
    val = t_arr / np.pi / (t_arr ** (2.0 / a) + np.asarray(x, dtype=float) ** 2) ** ((a + 1) / 2)
    return float(val) if np.ndim(val) == 0 else val


def poisson_kernel(t, x):
    """g_1, the Cauchy/Poisson kernel t / (pi (t^2 + x^2))."""
    return g_a_kernel(1.0, t, x)


def _tail_series(a: float, delta: float, x: np.ndarray, n_terms: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    # heavy side: sin(j (a - delta) pi / 2) as x -> +inf, sin(j (a + delta) pi / 2) as x -> -inf
    skew = np.where(x > 0, a - delta, a + delta)
    total = np.zeros(x.shape)
    for j in range(1, n_terms + 1):
        coef = (-1) ** (j + 1) / math.factorial(j) * special.gamma(a * j + 1)
        total += ax ** (-a * j - 1) * coef * np.sin(j * skew * np.pi / 2)
    return total / np.pi


def tail_asymptote(params: ModelParams, x: float, N: int = 1) -> float:
    """N-term large-|x| expansion of G(1, x), 1 <= N <= 3."""
    if not 1 <= N <= 3:
        raise DomainError("tail_asymptote supports 1 <= N <= 3")
    val = float(_tail_series(params.a, params.delta, np.array([x]), N)[0])
    if params.a == 2:
        return 0.0  # every sin(j pi) vanishes; avoid printing rounding noise
    return val


def tail_ratio_limits(params: ModelParams) -> tuple[float, float]:
    """Limits of G(1,y) / (pi g_a(1,y)) as y -> -inf and y -> +inf."""
    a, d = params.a, params.delta
    g = special.gamma(a + 1) / np.pi
    return g * math.sin((a + d) * math.pi / 2), g * math.sin((a - d) * math.pi / 2)


@functools.lru_cache(maxsize=None)
def _c_tilde(a: float, delta: float, refine: int) -> float:
    prof = GreenProfile(a, delta)
    mag = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 600 * refine)])
    ys = np.concatenate([-mag[::-1], mag[1:]])
    weight = lambda y: prof.exact(y) * (1 + y**2) ** ((a + 1) / 2)  # noqa: E731
    limits = tail_ratio_limits(ModelParams(a, delta))
    return float(min(_polish(weight, ys, -1.0), *limits))


def c_tilde(params: ModelParams, refine: int = 1) -> float:
    """inf_y G(1, y) / (pi g_a(1, y)); positive in the strict regime."""
    params.require_strict()
    val = _c_tilde(float(params.a), float(params.delta), int(refine))
    if not val > 0:
        raise AccuracyError("c_tilde came out non-positive", residual=val)
    return val


@functools.lru_cache(maxsize=None)
def _tail_constant(a: float, delta: float, refine: int) -> float:
    prof = GreenProfile(a, delta)
    mag = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 400 * refine)])
    ys = np.concatenate([-mag[::-1], mag[1:]])
    weight = lambda y: prof.exact(y) * (1 + np.abs(y) ** (1 + a))  # noqa: E731
    limits = tail_ratio_limits(ModelParams(a, delta))
    return float(max(_polish(weight, ys, 1.0), *limits))


def _polish(f, ys: np.ndarray, sign: float) -> float:
    """Extremum of f (max for sign=+1, min for -1): grid scan, then a bounded
    search on the bracket around the best node of each half-line."""
    vals = sign * f(ys)
    best = float(vals.max())
    for side in (ys < 0, ys > 0):
        idx = np.flatnonzero(side)
        k = idx[np.argmax(vals[idx])]
        lo, hi = ys[max(k - 1, 0)], ys[min(k + 1, len(ys) - 1)]
        if hi <= lo:
            continue
        res = optimize.minimize_scalar(lambda y: -sign * float(f(np.array([y]))[0]), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-10})
        best = max(best, -float(res.fun))
    return sign * best


def tail_constant(params: ModelParams, refine: int = 1) -> float:
    """K_{a,0} = sup_y G(1, y)(1 + |y|^(1+a)), the constant of the polynomial tail bound."""
    return _tail_constant(float(params.a), float(params.delta), int(refine))


def green_field(params: ModelParams, grid: GridSpec) -> ScalarField:
    """G on the grid; each slice is the unit profile evaluated at rescaled points."""
    t = grid.t[:, None]
    x = grid.x[None, :]
    scale = t ** (-1.0 / params.a)
    prof = green_profile(params, grid.n_xi, grid.xi_max)
    vals = _clamp(prof.exact(x * scale)) * scale
    return ScalarField(grid, vals)
