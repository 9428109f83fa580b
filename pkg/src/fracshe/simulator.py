"""Monte Carlo for the mild solution by kernel stepping.

Paths are written as u = J0 + Z.  J0 is evaluated exactly at every step, so
Z(0) = 0 even for Dirac data, and only Z is stepped:

    Z_{k+1} = G(dt) * Z_k + Gamma_k * (rho(J0 + Z_k) dW_k / dx)

on a lattice, with zero-padded FFT convolutions (no periodic wrap).  Gamma_k
is the noise kernel whose covariance matches int_0^dt |Ghat(r)|^2 dr inside
the lattice band; using G(dt) itself would bias the one-step variance by the
factor a/(a-1).

Frequencies above the band carry a share of order dx^(1-1/a) of the
variance when a < 2.  They decay within time ~dx^a, well inside one step, so
each step also draws a "fresh" field F_k with the folded spectrum of those
frequencies.  F_k enters u at the next output and the next noise intensity,
but is never propagated.

The noise intensity uses cell means of J0^2 averaged over the step, so a
Dirac spike narrower than one cell still injects the right variance.
"""

from __future__ import annotations

import functools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline
from scipy.special import roots_jacobi, roots_legendre

from .errors import DomainError, EstimationError, StabilityError
from .model import GridSpec, ModelParams, ScalarField
from .moments import InitialMeasure, J0Evaluator, Lattice, make_lattice
from .stable_green import TABLE_HALF_WIDTH, green_profile

log = logging.getLogger(__name__)

BLOWUP = 1e12
RHO_KINDS = ("linear", "near_linear", "tabulated", "zero")


@dataclass(frozen=True)
class RhoSpec:
    """The noise coefficient rho.

    linear: lam*u.  near_linear: lam*sqrt(v^2 + u^2).  tabulated: piecewise
    linear through (u_table, rho_table), continued with the end slopes, with
    declared growth constants that are checked on the table.
    """

    kind: str
    lam: float = 0.0
    v: float = 0.0
    u_table: tuple = ()
    rho_table: tuple = ()
    lip: float = 0.0
    lip_low: float = 0.0
    vip: float = 0.0
    vip_low: float = 0.0

    def __post_init__(self):
        if self.kind not in RHO_KINDS:
            raise DomainError(f"rho kind must be one of {RHO_KINDS}, got {self.kind!r}")
        if self.kind == "tabulated":
            u = np.asarray(self.u_table, dtype=float)
            if u.size < 2 or u.size != len(self.rho_table) or np.any(np.diff(u) <= 0):
                raise DomainError("tabulated rho needs >= 2 strictly increasing nodes and matching values")
            r = np.asarray(self.rho_table, dtype=float)
            slopes = np.abs(np.diff(r) / np.diff(u))
            if slopes.max() > self.lip * (1 + 1e-12) + 1e-300:
                raise DomainError(f"tabulated rho has slope {slopes.max():.6g} above declared Lip {self.lip}")

    @classmethod
    def linear(cls, lam: float) -> "RhoSpec":
        return cls("linear", lam=lam)

    @classmethod
    def near_linear(cls, lam: float, v: float) -> "RhoSpec":
        return cls("near_linear", lam=lam, v=v)

    @classmethod
    def zero(cls) -> "RhoSpec":
        return cls("zero")

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return self.lam * u
        if self.kind == "near_linear":
            return self.lam * np.sqrt(self.v**2 + u * u)
        if self.kind == "zero":
            return np.zeros_like(u)
        xs = np.asarray(self.u_table, dtype=float)
        ys = np.asarray(self.rho_table, dtype=float)
        out = np.interp(u, xs, ys)
        left_slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
        right_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        out = np.where(u < xs[0], ys[0] + left_slope * (u - xs[0]), out)
        return np.where(u > xs[-1], ys[-1] + right_slope * (u - xs[-1]), out)

    def growth_constants(self) -> tuple[float, float, float, float]:
        """(Lip, V, l, v) with l^2 (v^2 + u^2) <= rho(u)^2 <= Lip^2 (V^2 + u^2)."""
        if self.kind == "linear":
            return abs(self.lam), 0.0, abs(self.lam), 0.0
        if self.kind == "near_linear":
            return abs(self.lam), self.v, abs(self.lam), self.v
        if self.kind == "zero":
            return 0.0, 0.0, 0.0, 0.0
        return self.lip, self.vip, self.lip_low, self.vip_low

    def check_against(self, params: ModelParams, u_max: float = 1e3):
        """Reject a rho that violates the growth conditions recorded in params."""
        u = np.concatenate([-np.geomspace(u_max, 1e-6, 400), [0.0], np.geomspace(1e-6, u_max, 400)])
        r2 = self(u) ** 2
        upper = params.lip_upper**2 * (params.vip_upper**2 + u * u)
        lower = params.lip_lower**2 * (params.vip_lower**2 + u * u)
        slack = 1e-9 * (1 + u * u)
        if np.any(r2 > upper + slack):
            raise DomainError("rho violates the upper growth condition Lip^2 (V^2 + u^2) from the model")
        if np.any(r2 < lower - slack):
            raise DomainError("rho violates the lower growth condition l^2 (v^2 + u^2) from the model")


@dataclass(frozen=True)
class SimConfig:
    grid: GridSpec
    n_paths: int
    master_seed: int
    rho: RhoSpec
    scheme: str = "kernel-stepping"
    p_values: tuple = (2,)
    batch_size: int = 500
    threads: int = 1
    substeps: int = 2  # steps between consecutive output times
    initial_steps: int = 24  # graded steps on ]0, t_min]
    refine: int = 1  # lattice step = grid.dx / refine
    start: str = "zero"  # "zero": Z(0) = 0; "t_min": Z(t_min) = 0 (drops earlier noise)
    check_rho: bool = True

    def __post_init__(self):
        if self.n_paths < 2:
            raise DomainError("n_paths must be >= 2")
        if not 0 <= self.master_seed < 2**64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")
        if self.scheme != "kernel-stepping":
            raise DomainError(f"unknown scheme {self.scheme!r}")
        if self.grid.nx < 3:
            raise DomainError("simulation needs nx >= 3")
        for p in self.p_values:
            if int(p) != p or p < 2 or int(p) % 2:
                raise DomainError(f"p must be an even integer >= 2, got {p!r}")
        if self.batch_size < 1 or self.threads < 1 or self.substeps < 1 or self.refine < 1:
            raise DomainError("batch_size, threads, substeps and refine must be >= 1")
        if self.initial_steps < 1:
            raise DomainError("initial_steps must be >= 1")
        if self.start not in ("zero", "t_min"):
            raise DomainError("start must be 'zero' or 't_min'")


@dataclass(frozen=True)
class EmpiricalMoments:
    p_values: tuple
    moment_fields: dict = field(repr=False)
    stderr_fields: dict = field(repr=False)
    n_paths: int = 0
    master_seed: int = 0

    @property
    def grid(self) -> GridSpec:
        return self.moment_fields[self.p_values[0]].grid


# ---------------------------------------------------------------------------
# cell averages of J0 and J0^2


@functools.lru_cache(maxsize=None)
def _profile_cdfs(a: float, delta: float):
    """Antiderivatives of G(1,.) and G(1,.)^2 on the table range, plus far-tail masses."""
    prof = green_profile(ModelParams(a, delta))
    ys = prof.table.x
    g = prof(ys)
    f1 = CubicSpline(ys, g).antiderivative()
    f2 = CubicSpline(ys, g * g).antiderivative()
    w = TABLE_HALF_WIDTH
    # tail mass beyond +-w from the leading power law c |y|^(-1-a); zero for the Gaussian
    if a < 2:
        c_left = float(prof(np.array([-w]))[0]) * w ** (1 + a)
        c_right = float(prof(np.array([w]))[0]) * w ** (1 + a)
        left1, right1 = c_left * w ** (-a) / a, c_right * w ** (-a) / a
        left2 = c_left**2 * w ** (-1 - 2 * a) / (1 + 2 * a)
    else:
        left1 = right1 = left2 = 0.0
    return f1, f2, left1, right1, left2, w


def _cdf(params: ModelParams, y: np.ndarray, which: int) -> np.ndarray:
    f1, f2, left1, right1, left2, w = _profile_cdfs(float(params.a), float(params.delta))
    yc = np.clip(y, -w, w)
    if which == 1:
        out = left1 + f1(yc)
        a = params.a
        out = np.where(y < -w, left1 * (w / np.maximum(-y, w)) ** a, out)
        top = left1 + float(f1(w))
        out = np.where(y > w, top + right1 * (1 - (w / np.maximum(y, w)) ** a), out)
        return out
    return left2 + f2(yc)


def _cell_means(params: ModelParams, ev: J0Evaluator, s: float, x: np.ndarray, dx: float):
    """Cell means of J0(s) and J0(s)^2 over [x - dx/2, x + dx/2]."""
    a = params.a
    sig = s ** (1 / a)
    mean1 = ev.density_at(s, x)
    sum_sq_means = np.zeros(x.shape)
    sum_m2 = np.zeros(x.shape)
    for x0, m in ev.mu.atoms:
        lo = (x - dx / 2 - x0) / sig
        hi = (x + dx / 2 - x0) / sig
        m1 = m * (_cdf(params, hi, 1) - _cdf(params, lo, 1)) / dx
        m2 = m * m * (_cdf(params, hi, 2) - _cdf(params, lo, 2)) / (sig * dx)
        mean1 += m1
        sum_sq_means += m1 * m1
        sum_m2 += m2
    mean2 = mean1**2 - sum_sq_means + sum_m2
    return mean1, np.maximum(mean2, 0.0)


def _effective_j0(params, ev, t0: float, t1: float, x: np.ndarray, dx: float) -> np.ndarray:
    """sign(mean J0) sqrt(time-and-cell mean of J0^2) over [t0, t1] x cell."""
    a = params.a
    if t0 == 0:
        # J0^2 cell mean grows like s^(-1/a) near 0 for atoms; put that in the weight
        xs, ws = roots_jacobi(6, 0.0, -1 / a)
        s_nodes = t1 * (1 + xs) / 2
        weights = ws * (t1 / 2) ** (1 - 1 / a) * s_nodes ** (1 / a) / t1
    else:
        xs, ws = roots_legendre(4)
        s_nodes = t0 + (t1 - t0) * (1 + xs) / 2
        weights = ws / 2
    m1 = np.zeros(x.shape)
    m2 = np.zeros(x.shape)
    for s, w in zip(s_nodes, weights):
        c1, c2 = _cell_means(params, ev, s, x, dx)
        m1 += w * c1
        m2 += w * c2
    return np.where(m1 < 0, -1.0, 1.0) * np.sqrt(m2)


# ---------------------------------------------------------------------------


def noise_pad(params: ModelParams, t_max: float, rel: float = 1e-4) -> float:
    """Distance beyond the output window where noise is still simulated.

    Chosen so that int_0^T int_{|z|>L} G(s,z)^2 dz ds is below ``rel`` times
    int_0^T int G^2 (power-law tail for a < 2, Gaussian for a = 2).
    """
    a = params.a
    scale = t_max ** (1 / a)
    if a == 2:
        return 2.0 * scale * math.sqrt(math.log(1 / rel)) + 1.0
    m0 = special.gamma(1 + 1 / a) / math.pi * (2 * math.cos(params.theta)) ** (-1 / a)
    ast = params.a_star
    total = m0 * ast * t_max ** (1 / ast)
    c = special.gamma(1 + a) / math.pi
    # 2 c^2 T^3 L^(-1-2a) / (3 (1+2a)) <= rel * total
    lval = (2 * c * c * t_max**3 / (3 * (1 + 2 * a) * rel * total)) ** (1 / (1 + 2 * a))
    return max(lval, 4 * scale) + 1.0


def _step_variance(a: float, theta: float, dt: float, xi: np.ndarray) -> np.ndarray:
    """(1/dt) int_0^dt |Ghat(r, xi)|^2 dr."""
    sym = np.abs(xi) ** a
    c = math.cos(theta)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(sym > 0, -np.expm1(-2 * dt * sym * c) / (2 * sym * c * dt), 1.0)


def aliased_step_variance(a: float, theta: float, dt: float, xi: np.ndarray, dx: float,
                          n_alias: int = 64) -> np.ndarray:
    """One-step noise spectrum of the field sampled on a lattice of step dx.

    Sampling folds every frequency xi + 2 pi m / dx onto xi, so the node
    values keep the full pointwise variance int_0^dt int G^2 instead of only
    its band-limited part.  Terms |m| > n_alias use the large-|xi| form
    |xi|^(-a) / (2 cos(theta) dt), summed with a Hurwitz zeta.
    """
    period = 2 * math.pi / dx
    total = _step_variance(a, theta, dt, xi)
    for m in range(1, n_alias + 1):
        total = total + _step_variance(a, theta, dt, xi + m * period) + _step_variance(a, theta, dt, xi - m * period)
    tail = 2 * period ** (-a) * special.zeta(a, n_alias + 1) / (2 * math.cos(theta) * dt)
    return total + tail


def _time_mesh(grid: GridSpec, cfg: SimConfig, a: float) -> tuple[np.ndarray, np.ndarray]:
    """Step times and the indices of the output times within them."""
    outs = grid.t
    if cfg.start == "zero":
        j = np.arange(cfg.initial_steps + 1) / cfg.initial_steps
        head = outs[0] * j ** max(1.0, a / (a - 1))
    else:
        head = np.array([outs[0]])
    pieces = [head]
    for t0, t1 in zip(outs[:-1], outs[1:]):
        pieces.append(np.linspace(t0, t1, cfg.substeps + 1)[1:])
    times = np.concatenate(pieces)
    idx = np.searchsorted(times, outs - 1e-12 * max(1.0, outs[-1]))
    return times, idx


class _Plan:
    """Everything deterministic: lattice, multipliers, J0 slices."""

    def __init__(self, params: ModelParams, mu: InitialMeasure, cfg: SimConfig):
        grid = cfg.grid
        self.params = params
        self.dx = grid.dx / cfg.refine
        pad = noise_pad(params, grid.t_max)
        half = grid.x_half_width + pad
        k = int(math.ceil(half / self.dx))
        self.n = 2 * k + 1
        self.x = (np.arange(self.n) - k) * self.dx
        self.window = k + cfg.refine * (np.arange(grid.nx) - (grid.nx - 1) // 2)
        self.m = 1 << int(math.ceil(math.log2(2 * self.n)))
        xi = 2 * math.pi * np.fft.rfftfreq(self.m, self.dx)
        a, th = params.a, params.theta
        sym = np.abs(xi) ** a
        self.times, self.out_idx = _time_mesh(grid, cfg, a)
        lat = make_lattice(GridSpec(grid.t_min, grid.t_max, grid.nt, grid.x_half_width, grid.nx), mu,
                           grid.t_max, a, h=self.dx)
        ev = J0Evaluator(params, mu, lat)
        self.prop = []
        self.noise = []
        self.fresh = []
        self.j0eff = []
        for t0, t1 in zip(self.times[:-1], self.times[1:]):
            dt = t1 - t0
            self.prop.append(np.exp(-dt * sym * np.exp(-1j * th)))
            band = _step_variance(a, th, dt, xi)
            folded = aliased_step_variance(a, th, dt, xi, self.dx) - band
            self.noise.append(np.sqrt(band) * np.exp(0.5j * dt * sym * math.sin(th)))
            self.fresh.append(np.sqrt(np.maximum(folded, 0.0)))
            self.j0eff.append(_effective_j0(params, ev, t0, t1, self.x, self.dx))
        xw = grid.x
        self.j0_out = np.array([ev.at(t, xw) for t in grid.t])


def _path_generators(seed: int, first: int, count: int):
    return [np.random.Generator(np.random.Philox(key=seed + ((first + i) << 64))) for i in range(count)]


def _run_batch(plan: _Plan, cfg: SimConfig, first: int, count: int):
    """Sums of u^p and u^(2p) over one batch of paths, at the output slots."""
    n, m = plan.n, plan.m
    gens = _path_generators(cfg.master_seed, first, count)
    z = np.zeros((count, n))
    fresh = np.zeros((count, n))
    grid = cfg.grid
    ps = cfg.p_values
    s1 = {p: np.zeros((grid.nt, grid.nx)) for p in ps}
    s2 = {p: np.zeros((grid.nt, grid.nx)) for p in ps}
    noiseless = cfg.rho.kind == "zero"
    out_pos = {int(k): i for i, k in enumerate(plan.out_idx)}

    def record(step_index):
        i = out_pos.get(step_index)
        if i is None:
            return
        u = plan.j0_out[i][None, :] + z[:, plan.window] + fresh[:, plan.window]
        for p in ps:
            up = u**p
            s1[p][i] = up.sum(axis=0)
            s2[p][i] = (up * up).sum(axis=0)

    record(0)
    n_steps = len(plan.times) - 1
    chunk = 8
    for c0 in range(0, n_steps, chunk):
        c1 = min(n_steps, c0 + chunk)
        if noiseless:
            draws = None
        else:
            draws = np.stack([g.standard_normal((c1 - c0, 2, n)) for g in gens], axis=0)
        for k in range(c0, c1):
            dt = plan.times[k + 1] - plan.times[k]
            zf = np.fft.rfft(z, m, axis=1) * plan.prop[k]
            if not noiseless:
                r = cfg.rho(plan.j0eff[k][None, :] + z + fresh) * math.sqrt(dt / plan.dx)
                zf += np.fft.rfft(r * draws[:, k - c0, 0, :], m, axis=1) * plan.noise[k]
                ff = np.fft.rfft(r * draws[:, k - c0, 1, :], m, axis=1) * plan.fresh[k]
                fresh = np.fft.irfft(ff, m, axis=1)[:, :n]
            z = np.fft.irfft(zf, m, axis=1)[:, :n]
            worst = np.max(np.abs(z + fresh))
            if not np.isfinite(worst) or worst > BLOWUP:
                path, j = np.unravel_index(int(np.nanargmax(np.abs(np.nan_to_num(z + fresh, nan=np.inf)))), z.shape)
                raise StabilityError(
                    f"path {first + path} exceeded {BLOWUP:.0e} at t={plan.times[k + 1]:.6g}, "
                    f"x={plan.x[j]:.6g}; try more substeps (smaller dt)",
                    float(plan.times[k + 1]), float(plan.x[j]),
                )
            record(k + 1)
    return s1, s2


def simulate(params: ModelParams, mu: InitialMeasure, cfg: SimConfig) -> EmpiricalMoments:
    """Empirical E|u|^p on cfg.grid with standard errors."""
    params.require_solution_regime()
    if cfg.check_rho:
        cfg.rho.check_against(params)
    plan = _Plan(params, mu, cfg)
    starts = list(range(0, cfg.n_paths, cfg.batch_size))
    jobs = [(s, min(cfg.batch_size, cfg.n_paths - s)) for s in starts]
    if cfg.threads == 1:
        results = [_run_batch(plan, cfg, s, c) for s, c in jobs]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(lambda job: _run_batch(plan, cfg, *job), jobs))
    n = cfg.n_paths
    moments, errs = {}, {}
    for p in cfg.p_values:
        t1 = np.sum(np.stack([r[0][p] for r in results]), axis=0)
        t2 = np.sum(np.stack([r[1][p] for r in results]), axis=0)
        mean = t1 / n
        var = np.maximum(t2 / n - mean**2, 0.0) * n / (n - 1)
        moments[p] = ScalarField(cfg.grid, mean)
        errs[p] = ScalarField(cfg.grid, np.sqrt(var / n))
    return EmpiricalMoments(tuple(cfg.p_values), moments, errs, n, cfg.master_seed)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LyapunovEstimate:
    slope: float
    slope_lo: float
    slope_hi: float
    n_points: int


def lyapunov_estimate(em: EmpiricalMoments, x_probe: float, p: int, width: float = 2.0) -> LyapunovEstimate:
    """Least-squares slope of log E|u(t, x_probe)|^p over the last half of the time window.

    The band is slope +- width standard errors, weighting each point by its
    relative standard error when those are nonzero.
    """
    if p not in em.moment_fields:
        raise DomainError(f"p={p} was not simulated")
    grid = em.grid
    if grid.t_max / grid.t_min < 5:
        raise DomainError("lyapunov_estimate needs t_max / t_min >= 5")
    j = int(np.argmin(np.abs(grid.x - x_probe)))
    if abs(grid.x[j] - x_probe) > grid.dx / 2 + 1e-12:
        raise DomainError("x_probe lies outside the grid")
    t = grid.t
    keep = t >= 0.5 * (grid.t_min + grid.t_max)
    m = em.moment_fields[p].values[keep, j]
    se = em.stderr_fields[p].values[keep, j]
    if np.any(m <= 0):
        raise EstimationError("moments must be positive to take logarithms")
    y = np.log(m)
    tt = t[keep]
    rel = se / m
    w = 1 / rel**2 if np.all(rel > 0) else np.ones_like(tt)
    X = np.stack([np.ones_like(tt), tt], axis=1)
    A = X.T @ (w[:, None] * X)
    coef = np.linalg.solve(A, X.T @ (w * y))
    resid = y - X @ coef
    dof = max(1, tt.size - 2)
    if np.all(rel > 0):
        cov = np.linalg.inv(A)
    else:
        cov = np.linalg.inv(A) * float(resid @ resid) / dof
    se_slope = math.sqrt(max(cov[1, 1], 0.0))
    return LyapunovEstimate(float(coef[1]), float(coef[1] - width * se_slope), float(coef[1] + width * se_slope), int(tt.size))


__all__ = [
    "RhoSpec",
    "SimConfig",
    "EmpiricalMoments",
    "LyapunovEstimate",
    "simulate",
    "lyapunov_estimate",
    "noise_pad",
]
