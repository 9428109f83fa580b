"""The renewal kernel K = sum_n L_n built from iterated space-time convolutions of lam^2 G^2.

Every term is self-similar,

    L_n(t, x) = lam^(2(n+1)) t^(p_n) t^(-1/a) h_n(x t^(-1/a)),   p_n = (n+1)/a* - 1,

so the profiles h_n are computed once per (a, delta) and reused for every lam
and every grid.  They live in Fourier space: hhat_0 is the transform of
G(1, .)^2 and the space-time convolution becomes a one-dimensional integral

    chat(w) = int_0^1 (1-s)^pf s^pg fhat((1-s)^(1/a) w) ghat(s^(1/a) w) ds,

done with Gauss-Jacobi rules on each half of [0, 1] after substituting
s = u^a (resp. 1-s = v^a) so the endpoint powers become quadrature weights.
"""

from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline
from scipy.special import roots_jacobi, roots_legendre

from .errors import AccuracyError, DomainError
from .model import GridSpec, ModelParams, ScalarField
from .specfun import MLParams, mittag_leffler
from .stable_green import c_tilde, green_field, green_values, lambda_const, poisson_kernel

MAX_TERMS = 200
OMEGA_STEP = 0.01
JACOBI_NODES = 48


@dataclass(frozen=True)
class Spectrum:
    """Samples of a profile transform on omega = 0, d, 2d, ..., plus its time exponent."""

    omega: np.ndarray
    values: np.ndarray
    exponent: float
    _spline: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        re = CubicSpline(self.omega, self.values.real)
        im = CubicSpline(self.omega, self.values.imag)
        object.__setattr__(self, "_spline", (re, im))

    def __call__(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        aw = np.abs(w)
        re, im = self._spline
        inside = aw <= self.omega[-1]
        clipped = np.where(inside, aw, 0.0)
        val = np.where(inside, re(clipped) + 1j * np.sign(w + (w == 0)) * im(clipped), 0.0)
        return val

    @property
    def mass(self) -> float:
        return float(self.values[0].real)


def _omega_max(a: float, theta: float) -> float:
    # |hhat_0(w)| ~ exp(-2^(1-a) cos(theta) w^a); stop near exp(-40)
    return max(10.0, (40.0 / (2 ** (1 - a) * math.cos(theta))) ** (1.0 / a))


def _graded(n_panels: int, power: int = 3):
    """Gauss-Legendre nodes on [0,1] in a variable u; caller maps u -> eta."""
    xg, wg = roots_legendre(16)
    edges = np.linspace(0, 1, n_panels + 1)
    h = np.diff(edges)
    u = (0.5 * h[:, None] * xg[None, :] + 0.5 * (edges[1:] + edges[:-1])[:, None]).ravel()
    w = (0.5 * h[:, None] * wg[None, :]).ravel()
    return u, w


def green_square_spectrum(a: float, theta: float, omega: np.ndarray) -> np.ndarray:
    """Fourier transform of G(1, .)^2 as (1/2pi) int Ghat(eta) Ghat(w - eta) d eta."""
    omega = np.asarray(omega, dtype=float)
    c = math.cos(theta)
    R = (45.0 / c) ** (1.0 / a)
    n_pan = int(math.ceil(R**a * abs(math.sin(theta)) / 2.0)) + 6
    u, wu = _graded(n_pan)

    def ghat(eta):
        return np.exp(-np.abs(eta) ** a * np.exp(-1j * theta * np.sign(eta)))

    out = np.empty(omega.shape, dtype=complex)
    for chunk in np.array_split(np.arange(omega.size), max(1, omega.size // 256)):
        w = omega[chunk][:, None]
        # left ray [-R, 0], cusp at 0 (u = 1)
        q = 1 - (1 - u) ** 3
        eta = -R * (1 - q)
        jac = R * 3 * (1 - u) ** 2
        total = np.sum(ghat(eta) * ghat(w - eta) * jac * wu, axis=1)
        # right ray [w, w + R], cusp at w (u = 0)
        eta = w + R * u**3
        jac = R * 3 * u**2
        total += np.sum(ghat(eta) * ghat(w - eta) * jac * wu, axis=1)
        # middle [0, w], cusps at both ends: quintic smoothstep
        s = u**3 * (10 - 15 * u + 6 * u**2)
        ds = 30 * u**2 * (1 - u) ** 2
        eta = w * s
        total += np.sum(ghat(eta) * ghat(w - eta) * (w * ds) * wu, axis=1)
        out[chunk] = total / (2 * math.pi)
    return out


@functools.lru_cache(maxsize=None)
def _jacobi(n: int, e: float):
    x, w = roots_jacobi(n, 0.0, e)
    return x, w


def star(f: Spectrum, g: Spectrum, a: float, nodes: int = JACOBI_NODES) -> Spectrum:
    """Space-time convolution (f * g)(1, .) of two self-similar kernels, in Fourier space."""
    omega = f.omega
    pf, pg = f.exponent, g.exponent
    U = 0.5 ** (1.0 / a)
    total = np.zeros(omega.size, dtype=complex)
    # s in [0, 1/2]: s = u^a; weight u^(a(pg+1)-1)
    e0 = a * (pg + 1) - 1
    x, w = _jacobi(nodes, e0)
    uu = U * (1 + x) / 2
    coef = a * (U / 2) ** (e0 + 1) * w
    s = uu**a
    for j in range(nodes):
        total += coef[j] * (1 - s[j]) ** pf * f((1 - s[j]) ** (1 / a) * omega) * g(uu[j] * omega)
    # s in [1/2, 1]: 1 - s = v^a; weight v^(a(pf+1)-1)
    e1 = a * (pf + 1) - 1
    x, w = _jacobi(nodes, e1)
    vv = U * (1 + x) / 2
    coef = a * (U / 2) ** (e1 + 1) * w
    s = 1 - vv**a
    for j in range(nodes):
        total += coef[j] * s[j] ** pg * f(vv[j] * omega) * g(s[j] ** (1 / a) * omega)
    return Spectrum(omega, total, pf + pg + 1)


def invert(values: np.ndarray, d_omega: float, y: np.ndarray) -> np.ndarray:
    """(1/2pi) int chat(w) e^{i w y} dw by the trapezoid rule, using conjugate symmetry."""
    y = np.asarray(y, dtype=float)
    wts = np.full(values.size, d_omega)
    wts[0] = d_omega / 2
    omega = np.arange(values.size) * d_omega
    out = np.empty(y.shape)
    flat = y.reshape(-1)
    res = out.reshape(-1)
    for chunk in np.array_split(np.arange(flat.size), max(1, flat.size * values.size // 4_000_000)):
        ph = np.outer(flat[chunk], omega)
        res[chunk] = (np.cos(ph) @ (wts * values.real) - np.sin(ph) @ (wts * values.imag)) / math.pi
    return out


class KernelProfiles:
    """Unit-time spectra hhat_n of the series terms for one (a, delta), grown on demand."""

    def __init__(self, a: float, delta: float, nodes: int = JACOBI_NODES, d_omega: float = OMEGA_STEP):
        if not 1 < a <= 2:
            raise DomainError(f"kernel series needs a in ]1,2], got {a!r}")
        self.a = float(a)
        self.delta = float(delta)
        self.theta = self.delta * math.pi / 2
        self.nodes = nodes
        self.d_omega = d_omega
        n = int(math.ceil(_omega_max(self.a, self.theta) / d_omega)) + 1
        self.omega = np.arange(n) * d_omega
        base = green_square_spectrum(self.a, self.theta, self.omega)
        self.terms: list[Spectrum] = [Spectrum(self.omega, base, -1.0 / self.a)]
        self._lock = threading.Lock()

    def ensure(self, n: int):
        with self._lock:
            while len(self.terms) <= n:
                self.terms.append(star(self.terms[-1], self.terms[0], self.a, self.nodes))

    def exponent(self, n: int) -> float:
        return (n + 1) * (1 - 1 / self.a) - 1

    def mass(self, n: int) -> float:
        """int h_n(y) dy, known in closed form from the Beta integral."""
        return math.exp(self.log_mass(n))

    def log_mass(self, n: int) -> float:
        ast = self.a / (self.a - 1)
        return (n + 1) * (math.log(self.terms[0].mass) + special.gammaln(1 / ast)) - special.gammaln((n + 1) / ast)

    def term_values(self, n: int, t: float, x: np.ndarray, lam: float = 1.0) -> np.ndarray:
        self.ensure(n)
        scale = t ** (-1.0 / self.a)
        spec = self.terms[n].values
        return lam ** (2 * (n + 1)) * t ** self.exponent(n) * scale * invert(spec, self.d_omega, np.asarray(x) * scale)

    def combined_spectrum(self, t: float, lam: float, n_max: int) -> np.ndarray:
        """sum_{n<=N} lam^(2(n+1)) t^(p_n) hhat_n(w) on the profile grid (frequency w = t^(1/a) xi)."""
        self.ensure(n_max)
        total = np.zeros(self.omega.size, dtype=complex)
        for n in range(n_max + 1):
            total += lam ** (2 * (n + 1)) * t ** self.exponent(n) * self.terms[n].values
        return total

    def kernel_values(self, t: float, x: np.ndarray, lam: float, n_max: int) -> np.ndarray:
        scale = t ** (-1.0 / self.a)
        spec = self.combined_spectrum(t, lam, n_max)
        return scale * invert(spec, self.d_omega, np.asarray(x, dtype=float) * scale)

    def kernel_hat(self, t, xi, lam: float, n_max: int) -> np.ndarray:
        """Khat(t, xi) at arbitrary (t > 0, xi), via the spline of each term."""
        self.ensure(n_max)
        t = np.asarray(t, dtype=float)
        xi = np.asarray(xi, dtype=float)
        w = t ** (1.0 / self.a) * xi
        total = np.zeros(np.broadcast(t, xi).shape, dtype=complex)
        for n in range(n_max + 1):
            total += lam ** (2 * (n + 1)) * t ** self.exponent(n) * self.terms[n](w)
        return total


@numba.njit(cache=True)
def _log_interp(logv, y0, dy, y, power_tail, tail_exp):
    """Cubic Lagrange interpolation of a log-profile on a uniform grid, with tail extrapolation."""
    n = logv.size
    pos = (y - y0) / dy
    if pos < 0.0 or pos > n - 1:
        if power_tail:
            if pos < 0.0:
                return logv[0] + tail_exp * (math.log(-y) - math.log(-y0))
            return logv[n - 1] + tail_exp * (math.log(y) - math.log(y0 + (n - 1) * dy))
        # parabola through the three outermost nodes
        if pos < 0.0:
            f0, f1, f2 = logv[0], logv[1], logv[2]
            q = pos
        else:
            f0, f1, f2 = logv[n - 1], logv[n - 2], logv[n - 3]
            q = (n - 1) - pos
        return f0 + q * (f1 - f0) + 0.5 * q * (q - 1.0) * (f2 - 2.0 * f1 + f0)
    i = int(pos)
    if i < 1:
        i = 1
    if i > n - 3:
        i = n - 3
    f = pos - i
    c0 = -f * (f - 1.0) * (f - 2.0) / 6.0
    c1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0
    c2 = -(f + 1.0) * f * (f - 2.0) / 2.0
    c3 = (f + 1.0) * f * (f - 1.0) / 6.0
    return c0 * logv[i - 1] + c1 * logv[i] + c2 * logv[i + 1] + c3 * logv[i + 2]


@numba.njit(cache=True)
def _direct_star(log_f, log_g, y0, dy, u1, v1, c1, u2, v2, c2, power_tail, tail_exp):
    """(f * g)(1, y_k) on the profile grid, all terms positive.

    First half (small g-scale u): int g(w) f((y - u w)/v)/v dw.
    Second half (small f-scale v): int f(w) g((y - v w)/u)/u dw.
    """
    n = log_f.size
    out = np.zeros(n)
    for k in range(n):
        y = y0 + k * dy
        total = 0.0
        for j in range(u1.size):
            acc = 0.0
            for m in range(n):
                w = y0 + m * dy
                acc += math.exp(log_g[m] + _log_interp(log_f, y0, dy, (y - u1[j] * w) / v1[j], power_tail, tail_exp))
            total += c1[j] * acc * dy / v1[j]
        for j in range(u2.size):
            acc = 0.0
            for m in range(n):
                w = y0 + m * dy
                acc += math.exp(log_f[m] + _log_interp(log_g, y0, dy, (y - v2[j] * w) / u2[j], power_tail, tail_exp))
            total += c2[j] * acc * dy / u2[j]
        out[k] = total
    return out


@numba.njit(cache=True)
def _log_interp_many(logv, y0, dy, ys, power_tail, tail_exp):
    out = np.empty(ys.size)
    for i in range(ys.size):
        out[i] = _log_interp(logv, y0, dy, ys[i], power_tail, tail_exp)
    return out


LOG_FLOOR = -740.0


class DirectProfiles:
    """The same profiles h_n, but on a y-grid and stored as log h_n.

    Every step sums positive terms, so small values keep their relative
    accuracy.  Fourier inversion cannot do that below ~1e-16 of the peak,
    which matters when G has Gaussian tails (a = 2).
    """

    def __init__(self, a: float, delta: float, y_half: float = 32.0, dy: float = 0.1, nodes: int = JACOBI_NODES):
        from .stable_green import GreenProfile

        self.a = float(a)
        self.delta = float(delta)
        self.dy = dy
        n = 2 * int(round(y_half / dy)) + 1
        self.y = (np.arange(n) - n // 2) * dy
        self.y0 = float(self.y[0])
        self.power_tail = self.a < 2
        self.tail_exp = -2.0 - 2.0 * self.a
        g = GreenProfile(self.a, self.delta).exact(self.y)
        self.logs: list[np.ndarray] = [np.maximum(np.log(np.maximum(g, 0.0) ** 2 + 1e-320), LOG_FLOOR)]
        self.exponents = [-1.0 / self.a]
        self.nodes = nodes
        self._lock = threading.Lock()

    def _rules(self, pf: float, pg: float):
        a = self.a
        U = 0.5 ** (1.0 / a)
        e0 = a * (pg + 1) - 1
        x, w = _jacobi(self.nodes, e0)
        u1 = U * (1 + x) / 2
        s = u1**a
        c1 = a * (U / 2) ** (e0 + 1) * w * (1 - s) ** pf
        v1 = (1 - s) ** (1 / a)
        e1 = a * (pf + 1) - 1
        x, w = _jacobi(self.nodes, e1)
        v2 = U * (1 + x) / 2
        s = 1 - v2**a
        c2 = a * (U / 2) ** (e1 + 1) * w * s**pg
        u2 = s ** (1 / a)
        return u1, v1, c1, u2, v2, c2

    def ensure(self, n: int):
        with self._lock:
            while len(self.logs) <= n:
                pf, pg = self.exponents[-1], self.exponents[0]
                vals = _direct_star(
                    self.logs[-1], self.logs[0], self.y0, self.dy, *self._rules(pf, pg), self.power_tail, self.tail_exp
                )
                self.logs.append(np.maximum(np.log(np.maximum(vals, 0.0) + 1e-320), LOG_FLOOR))
                self.exponents.append(pf + pg + 1)

    def profile(self, n: int, y) -> np.ndarray:
        self.ensure(n)
        ys = np.ascontiguousarray(np.asarray(y, dtype=float).ravel())
        lv = _log_interp_many(self.logs[n], self.y0, self.dy, ys, self.power_tail, self.tail_exp)
        return np.exp(lv).reshape(np.shape(y))

    def kernel_values(self, t: float, x: np.ndarray, lam: float, n_max: int) -> np.ndarray:
        self.ensure(n_max)
        scale = t ** (-1.0 / self.a)
        y = np.asarray(x, dtype=float) * scale
        total = np.zeros(y.shape)
        for n in range(n_max + 1):
            total += lam ** (2 * (n + 1)) * t ** self.exponents[n] * self.profile(n, y)
        return scale * total


_prof_lock = threading.Lock()
_profiles: dict[tuple, object] = {}


def kernel_profiles(params: ModelParams) -> KernelProfiles:
    key = ("fourier", float(params.a), float(params.delta))
    with _prof_lock:
        prof = _profiles.get(key)
        if prof is None:
            prof = KernelProfiles(*key[1:])
            _profiles[key] = prof
    return prof


def direct_profiles(params: ModelParams) -> DirectProfiles:
    key = ("direct", float(params.a), float(params.delta))
    with _prof_lock:
        prof = _profiles.get(key)
        if prof is None:
            prof = DirectProfiles(*key[1:])
            _profiles[key] = prof
    return prof


def _pointwise_engine(params: ModelParams, method: str):
    if method == "auto":
        # Gaussian tails drop below the Fourier floor; algebraic ones never do on practical windows
        method = "direct" if params.a == 2 else "fourier"
    if method == "direct":
        return direct_profiles(params)
    if method == "fourier":
        return kernel_profiles(params)
    raise DomainError(f"unknown kernel method {method!r}")


def gamma_rate(params: ModelParams, lam: float) -> float:
    """gamma = lam^2 Lambda Gamma(1/a*), the rate in the upper bound."""
    params.require_solution_regime()
    return lam**2 * lambda_const(params) * special.gamma(1 / params.a_star)


_LOG_MAX = math.log(np.finfo(float).max)


def bn_coefficient(params: ModelParams, n: int, t: float, lam: float) -> float:
    """B_n(t; lam) = lam^(2n) Lambda^n Gamma(1/a*)^n / Gamma(n/a*) t^(n/a* - 1)."""
    params.require_solution_regime()
    if n < 0:
        raise DomainError("bn_coefficient needs n >= 0")
    if n == 0:
        return 0.0
    ast = params.a_star
    if t == 0:
        return math.inf if n / ast < 1 else (0.0 if n / ast > 1 else _bn_log(params, n, lam, 1.0))
    if lam == 0:
        return 0.0
    log_b = _bn_log(params, n, lam, t)
    return math.exp(log_b) if log_b < _LOG_MAX else math.inf


def _bn_log(params: ModelParams, n: int, lam: float, t: float) -> float:
    ast = params.a_star
    return (
        2 * n * math.log(abs(lam))
        + n * math.log(lambda_const(params))
        + n * special.gammaln(1 / ast)
        - special.gammaln(n / ast)
        + (n / ast - 1) * math.log(t)
    )


def tail_bound(params: ModelParams, t: float, lam: float, n_trunc: int) -> float:
    """sum_{n > N} B_{n+1}(t) t^(-1/a) Lambda: the worst-case size of the dropped terms."""
    if lam == 0:
        return 0.0
    lam_c = lambda_const(params)
    total = 0.0
    n = n_trunc + 1
    prev = math.inf
    while True:
        term = bn_coefficient(params, n + 1, t, lam) * t ** (-1 / params.a) * lam_c
        total += term
        if (term < 1e-18 * max(total, 1e-300) and term < prev) or n > n_trunc + 100_000:
            break
        prev = term
        n += 1
    return total


def truncation_index(params: ModelParams, t_max: float, lam: float, tol: float) -> int:
    if lam == 0:
        return 0
    for n in range(MAX_TERMS + 1):
        if tail_bound(params, t_max, lam, n) < tol:
            return n
    raise AccuracyError(
        f"kernel series tail still above {tol:g} after {MAX_TERMS} terms",
        residual=tail_bound(params, t_max, lam, MAX_TERMS),
    )


@dataclass(frozen=True)
class KernelEstimate:
    field: ScalarField
    trunc_index: int
    tail_bound_field: np.ndarray
    lambda_used: float
    params: ModelParams = field(repr=False)


def kernel_series(
    params: ModelParams, grid: GridSpec, lam: float, tol: float = 1e-8, method: str = "auto"
) -> KernelEstimate:
    """Truncated series sum_{n<=N} L_n on the grid with N fixed by the B_n tail bound.

    ``method`` picks how profiles are turned into point values: "fourier"
    (trapezoid inversion, ~1e-16 absolute) or "direct" (y-space recursion,
    relative accuracy in the tails).  "auto" uses direct only for a = 2.
    """
    params.require_solution_regime()
    if not tol > 0:
        raise DomainError("kernel_series needs tol > 0")
    n_trunc = truncation_index(params, grid.t_max, lam, tol)
    tails = np.array([tail_bound(params, t, lam, n_trunc) for t in grid.t])
    if lam == 0:
        return KernelEstimate(ScalarField(grid, np.zeros((grid.nt, grid.nx))), 0, tails, 0.0, params)
    prof = _pointwise_engine(params, method)
    vals = np.empty((grid.nt, grid.nx))
    for i, t in enumerate(grid.t):
        vals[i] = prof.kernel_values(t, grid.x, lam, n_trunc)
    vals = _clamp_small(vals)
    return KernelEstimate(ScalarField(grid, vals), n_trunc, tails, float(lam), params)


def _clamp_small(vals: np.ndarray, limit: float = 1e-9) -> np.ndarray:
    worst = vals.min()
    if worst < -limit:
        raise AccuracyError(f"kernel series produced {worst:.3e} < 0", residual=-worst)
    return np.maximum(vals, 0.0)


def h_values(params: ModelParams, t, lam: float, n_trunc: int) -> np.ndarray:
    """H(t) = int_0^t int K from the exact term masses (space and time integrals in closed form)."""
    prof = kernel_profiles(params)
    t = np.asarray(t, dtype=float)
    total = np.zeros(t.shape)
    if lam == 0:
        return total
    with np.errstate(divide="ignore"):
        log_t = np.log(t)
    for n in range(n_trunc + 1):
        p = prof.exponent(n)
        # assembled in logs: lam^(2n) and the mass over/underflow separately
        log_c = 2 * (n + 1) * math.log(abs(lam)) + prof.log_mass(n) - math.log(p + 1)
        total += np.exp(log_c + (p + 1) * log_t)
    return total


def h_function(estimate: KernelEstimate) -> np.ndarray:
    """H(t_i; lam) for every time slice of the estimate."""
    if estimate.lambda_used == 0:
        return np.zeros(estimate.field.grid.nt)
    return h_values(estimate.params, estimate.field.grid.t, estimate.lambda_used, estimate.trunc_index)


def h_closed_form(params: ModelParams, t, lam: float) -> np.ndarray:
    """Untruncated H(t) = E_{1/a*,1}(lam^2 m0 Gamma(1/a*) t^(1/a*)) - 1, m0 = int G(1,y)^2 dy."""
    ast = params.a_star
    m0 = special.gamma(1 + 1 / params.a) / math.pi * (2 * math.cos(params.theta)) ** (-1 / params.a)
    rate = lam**2 * m0 * special.gamma(1 / ast)
    ml = MLParams(1 / ast, 1.0)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.array([mittag_leffler(ml, rate * ti ** (1 / ast)) - 1 for ti in t])


def kernel_upper_bound(params: ModelParams, t: float, x: float, lam: float) -> float:
    """G(t,x) (gamma / t^(1/a)) E_{1/a*,1/a*}(gamma t^(1/a*))."""
    if not t > 0:
        raise DomainError("kernel_upper_bound needs t > 0")
    if lam == 0:
        return 0.0
    g = float(green_values(params, t, x))
    return g * _upper_factor(params, t, lam)


def _upper_factor(params: ModelParams, t: float, lam: float) -> float:
    gam = gamma_rate(params, lam)
    ast = params.a_star
    return gam * t ** (-1 / params.a) * mittag_leffler(MLParams(1 / ast, 1 / ast), gam * t ** (1 / ast))


def kernel_upper_bound_field(params: ModelParams, grid: GridSpec, lam: float) -> ScalarField:
    if lam == 0:
        return ScalarField(grid, np.zeros((grid.nt, grid.nx)))
    g = green_field(params, grid).values
    factor = np.array([_upper_factor(params, t, lam) for t in grid.t])
    return ScalarField(grid, g * factor[:, None])


def c_nu(nu: float) -> float:
    """Gamma(nu) Gamma(1/2) / (2 Gamma(nu + 1/2))."""
    if not nu > 0:
        raise DomainError("c_nu needs nu > 0")
    return math.exp(special.gammaln(nu) + special.gammaln(0.5) - special.gammaln(nu + 0.5)) / 2


def upsilon(params: ModelParams, lam: float) -> float:
    """lam^4 Ctilde^4 C_{a+1/2}^2 Gamma(1-1/a)^2 / 2, the rate in the lower bound."""
    params.require_strict()
    a = params.a
    return lam**4 * c_tilde(params) ** 4 * c_nu(a + 0.5) ** 2 * special.gamma(1 - 1 / a) ** 2 / 2


def lower_constant(params: ModelParams, lam: float) -> float:
    """2^(-1/2) lam^4 Ctilde^4 C_{a+1/2}^2 Gamma(1-1/a)^2 = sqrt(2) Upsilon."""
    return math.sqrt(2) * upsilon(params, lam)


def kernel_lower_bound(params: ModelParams, t, x, lam: float):
    """C t^(b-1) g_1(t^(1/a), x) E_{b,b}(Upsilon t^b)."""
    params.require_strict()
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise DomainError("kernel_lower_bound needs t > 0")
    if lam == 0:
        return 0.0 * t_arr * np.asarray(x, dtype=float)
    b = params.b
    ups = upsilon(params, lam)
    ml = MLParams(b, b)
    flat_t = np.atleast_1d(t_arr)
    e = np.array([mittag_leffler(ml, ups * ti**b) for ti in flat_t.ravel()]).reshape(flat_t.shape)
    e = e.reshape(t_arr.shape) if t_arr.ndim else float(e.ravel()[0])
    val = lower_constant(params, lam) * t_arr ** (b - 1) * poisson_kernel(t_arr ** (1 / params.a), x) * e
    return val


def kernel_lower_bound_field(params: ModelParams, grid: GridSpec, lam: float) -> ScalarField:
    t = grid.t[:, None]
    x = grid.x[None, :]
    return ScalarField(grid, np.asarray(kernel_lower_bound(params, np.broadcast_to(t, (grid.nt, grid.nx)), x, lam)))


def h_lower_bound(params: ModelParams, t: float, lam: float) -> float:
    """C t^b E_{b,b+1}(Upsilon t^b), the lower bound on H."""
    b = params.b
    return lower_constant(params, lam) * t**b * mittag_leffler(MLParams(b, b + 1), upsilon(params, lam) * t**b)


def upper_constant(params: ModelParams, lam: float, n_scan: int = 2000) -> float:
    """sup_t gamma E_{1/a*,1/a*}(gamma t^(1/a*)) / (1 + t^(1/a) exp(gamma^a* t)), with its t -> inf limit."""
    gam = gamma_rate(params, lam)
    ast = params.a_star
    ml = MLParams(1 / ast, 1 / ast)
    best = ast * gam**ast
    for t in np.geomspace(1e-8, 1e4, n_scan):
        denom_log = math.log1p(t ** (1 / params.a) * math.exp(min(gam**ast * t, 700.0)))
        e = mittag_leffler(ml, gam * t ** (1 / ast))
        if not math.isfinite(e):
            continue
        best = max(best, gam * e / math.exp(denom_log))
    return best


def heat_kernel_closed_form(t, x, lam: float, nu: float = 2.0):
    """Closed form of K for the operator (nu/2) d^2/dx^2, used as an oracle at a = 2."""
    from scipy.stats import norm

    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    g_half = np.exp(-(x**2) / (nu * t)) / np.sqrt(math.pi * nu * t)
    bracket = lam**2 / np.sqrt(4 * math.pi * nu * t) + lam**4 / (2 * nu) * np.exp(
        lam**4 * t / (4 * nu)
    ) * norm.cdf(lam**2 * np.sqrt(t / (2 * nu)))
    return g_half * bracket
