"""Initial data, J0 = G * mu, and the second-moment formulas built from the kernel K.

Space-time convolutions with K are done in Fourier space along x.  For each
quadrature time s the source field is sampled on a periodic lattice and
FFT'd, except for the narrow spikes that Dirac atoms create at small s: those
are removed from the samples and added back with their exact transforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from .errors import DomainError
from .kernel_k import (
    _jacobi,
    _pointwise_engine,
    c_nu,
    gamma_rate,
    h_values,
    kernel_profiles,
    truncation_index,
    upper_constant,
)
from .model import GridSpec, ModelParams, ScalarField
from .stable_green import c_tilde, g_a_kernel, green_profile, tail_constant

TAIL_MODELS = ("none", "constant", "power")
KERNEL_TOL = 1e-8


@dataclass(frozen=True)
class DensityPart:
    """A density sampled on a uniform window, extended outside by a tail model.

    constant: f = level beyond the window (the window samples should approach it).
    power: f(y) = f(edge) (|y|/|edge|)^(-eta) on each side.
    """

    x0: float
    dx: float
    values: np.ndarray = field(repr=False)
    tail: str = "none"
    level: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 4:
            raise DomainError("density needs at least 4 samples")
        if not np.all(np.isfinite(v)):
            raise DomainError("density samples must be finite")
        if self.tail not in TAIL_MODELS:
            raise DomainError(f"tail model must be one of {TAIL_MODELS}, got {self.tail!r}")
        if not self.dx > 0:
            raise DomainError("density spacing must be > 0")
        if self.tail == "power" and (self.x0 >= 0 or self.x_end <= 0):
            raise DomainError("power tails need a window straddling 0")
        object.__setattr__(self, "values", v)

    @property
    def x_end(self) -> float:
        return self.x0 + self.dx * (self.values.size - 1)

    @property
    def constant(self) -> float:
        return self.level if self.tail == "constant" else 0.0

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        spline = CubicSpline(self.x0 + self.dx * np.arange(self.values.size), self.values)
        out = np.where((y >= self.x0) & (y <= self.x_end), spline(np.clip(y, self.x0, self.x_end)), 0.0)
        left, right = y < self.x0, y > self.x_end
        if self.tail == "constant":
            out = np.where(left | right, self.level, out)
        elif self.tail == "power":
            with np.errstate(divide="ignore"):
                out = np.where(left, self.values[0] * (np.abs(y) / abs(self.x0)) ** (-self.eta), out)
                out = np.where(right, self.values[-1] * (np.abs(y) / self.x_end) ** (-self.eta), out)
        return out


@dataclass(frozen=True)
class InitialMeasure:
    """Signed measure mu = sum_i m_i delta_{x_i} + f(y) dy."""

    atoms: tuple = ()
    density: Optional[DensityPart] = None

    def __post_init__(self):
        atoms = tuple((float(x), float(m)) for x, m in self.atoms)
        for x, m in atoms:
            if not (math.isfinite(x) and math.isfinite(m)):
                raise DomainError("atoms must have finite location and mass")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def dirac(cls, x0: float = 0.0, mass: float = 1.0) -> "InitialMeasure":
        return cls(atoms=((x0, mass),))

    @classmethod
    def lebesgue(cls, level: float = 1.0, half_width: float = 1.0) -> "InitialMeasure":
        xs = np.linspace(-half_width, half_width, 9)
        return cls(density=DensityPart(float(xs[0]), float(xs[1] - xs[0]), np.full(9, level), "constant", level))

    @classmethod
    def from_density(cls, fn: Callable, lo: float, hi: float, n: int, tail: str = "none", eta: float = 0.0,
                     level: float = 0.0) -> "InitialMeasure":
        xs = np.linspace(lo, hi, n)
        return cls(density=DensityPart(lo, float(xs[1] - xs[0]), np.asarray(fn(xs), dtype=float), tail, level, eta))

    @property
    def is_zero(self) -> bool:
        no_atoms = all(m == 0 for _, m in self.atoms)
        no_density = self.density is None or (
            not np.any(self.density.values) and self.density.constant == 0
        )
        return no_atoms and no_density

    @property
    def nonnegative(self) -> bool:
        ok = all(m >= 0 for _, m in self.atoms)
        if self.density is not None:
            d = self.density
            ok = ok and bool(np.all(d.values >= 0)) and d.level >= 0
        return ok

    @property
    def constant(self) -> float:
        return 0.0 if self.density is None else self.density.constant

    @property
    def bounded_below(self) -> bool:
        """True when the density stays above a positive constant everywhere (no atoms needed)."""
        d = self.density
        return d is not None and d.tail == "constant" and d.level > 0 and bool(np.all(d.values > 0))

    def check_admissible(self, a: float):
        """Reject data whose growth makes int |mu|(dx)/(1+|x-y|^(1+a)) infinite."""
        d = self.density
        if d is not None and d.tail == "power" and not d.eta > -a:
            raise DomainError(f"power tail |x|^(-{d.eta}) is not admissible for a={a} (needs eta > -a)")


def admissibility_constant(mu: InitialMeasure, a: float, y_grid: Optional[np.ndarray] = None) -> float:
    """A_a = sup_y int |mu|(dz) / (1 + |y-z|^(1+a)), scanned on a y-grid plus the far-field limit."""
    mu.check_admissible(a)
    locs = [x for x, _ in mu.atoms]
    d = mu.density
    if d is not None:
        locs += [d.x0, d.x_end]
    centre = float(np.mean(locs)) if locs else 0.0
    spread = max([abs(v - centre) for v in locs] + [1.0])
    if y_grid is None:
        y_grid = centre + np.concatenate([np.linspace(-3 * spread, 3 * spread, 1201)])
        y_grid = np.concatenate([y_grid, [x for x, _ in mu.atoms]])
    best = 0.0
    weight_mass = 2 * math.pi / ((1 + a) * math.sin(math.pi / (1 + a)))  # int dz/(1+|z|^(1+a))
    zq, wq = _real_line_rule(a)
    for y in y_grid:
        val = sum(abs(m) / (1 + abs(y - x) ** (1 + a)) for x, m in mu.atoms)
        if d is not None:
            if d.tail == "constant" and not np.any(d.values - d.level):
                val += abs(d.level) * weight_mass
            else:
                val += float(np.sum(wq * np.abs(d(y + zq)) / (1 + np.abs(zq) ** (1 + a))))
        best = max(best, val)
    if d is not None and d.tail == "constant":
        best = max(best, abs(d.level) * weight_mass)
    return best


def _real_line_rule(a: float):
    """Gauss-Legendre panels on |z| <= 1e6, geometric away from 0."""
    from scipy.special import roots_legendre

    xg, wg = roots_legendre(16)
    edges = np.concatenate([np.linspace(-1, 1, 17), 2.0 ** np.arange(1, 21)])
    edges = np.unique(np.concatenate([edges, -edges]))
    lo, hi = edges[:-1], edges[1:]
    z = (0.5 * (hi - lo)[:, None] * xg + 0.5 * (hi + lo)[:, None]).ravel()
    w = (0.5 * (hi - lo)[:, None] * wg).ravel()
    return z, w


# ---------------------------------------------------------------------------
# periodic lattice used for every x-convolution


@dataclass(frozen=True)
class Lattice:
    h: float
    n: int

    @property
    def x(self) -> np.ndarray:
        """Node positions in FFT order (0, h, ..., then negatives)."""
        return np.fft.fftfreq(self.n, 1.0 / (self.n * self.h))

    @property
    def xi(self) -> np.ndarray:
        return 2 * math.pi * np.fft.fftfreq(self.n, self.h)

    def index(self, x: np.ndarray) -> np.ndarray:
        k = np.rint(np.asarray(x) / self.h).astype(int)
        if np.any(np.abs(k * self.h - x) > 1e-9 * max(1.0, self.h)):
            raise DomainError("points are not lattice nodes")
        return np.mod(k, self.n)

    def forward(self, f: np.ndarray) -> np.ndarray:
        return np.fft.fft(f) * self.h

    def inverse(self, fh: np.ndarray) -> np.ndarray:
        return np.fft.ifft(fh).real / self.h


def make_lattice(grid: GridSpec, mu: InitialMeasure, t_max: float, a: float, h: Optional[float] = None) -> Lattice:
    """Lattice containing every grid node, wide enough that wrap-around of G tails is small."""
    step = grid.dx if h is None else h
    if grid.nx > 1 and h is not None:
        ratio = grid.dx / h
        if abs(ratio - round(ratio)) > 1e-9:
            raise DomainError("lattice step must divide the grid spacing")
    reach = grid.x_half_width
    for x, _ in mu.atoms:
        reach = max(reach, abs(x))
    if mu.density is not None:
        reach = max(reach, abs(mu.density.x0), abs(mu.density.x_end))
    span = 16 * (reach + 10 * t_max ** (1 / a))
    n = 1 << max(12, int(math.ceil(math.log2(span / step))))
    return Lattice(step, n)


# ---------------------------------------------------------------------------
# J0


def _green_hat(params: ModelParams, s: float, xi: np.ndarray) -> np.ndarray:
    return np.exp(-s * np.abs(xi) ** params.a * np.exp(-1j * params.theta * np.sign(xi)))


def _density_residual(mu: InitialMeasure, lat: Lattice) -> np.ndarray:
    """Samples of f - c on the lattice (FFT order)."""
    d = mu.density
    if d is None:
        return np.zeros(lat.n)
    return d(lat.x) - d.constant


class J0Evaluator:
    """J0(s, .) for one measure: atoms exactly, density via FFT on a lattice."""

    def __init__(self, params: ModelParams, mu: InitialMeasure, lat: Lattice):
        mu.check_admissible(params.a)
        self.params = params
        self.mu = mu
        self.lat = lat
        self.prof = green_profile(params)
        self.c = mu.constant
        resid = _density_residual(mu, lat)
        self._has_resid = bool(np.any(resid))
        self._resid_hat = lat.forward(resid) if self._has_resid else None

    def atoms_at(self, s: float, x: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(x))
        for x0, m in self.mu.atoms:
            out += m * self.prof.density(s, np.asarray(x) - x0)
        return out

    def density_on_lattice(self, s: float) -> np.ndarray:
        base = np.full(self.lat.n, self.c)
        if self._has_resid:
            base += self.lat.inverse(self._resid_hat * _green_hat(self.params, s, self.lat.xi))
        return base

    def density_at(self, s: float, x: np.ndarray) -> np.ndarray:
        """Density part at arbitrary points by cubic interpolation of the lattice values."""
        x = np.asarray(x, dtype=float)
        if not self._has_resid:
            return np.full(x.shape, self.c)
        vals = np.fft.fftshift(self.density_on_lattice(s))
        xs = np.fft.fftshift(self.lat.x)
        return CubicSpline(xs, vals)(x)

    def on_lattice(self, s: float) -> np.ndarray:
        return self.density_on_lattice(s) + self.atoms_at(s, self.lat.x)

    def at(self, s: float, x: np.ndarray) -> np.ndarray:
        return self.density_at(s, x) + self.atoms_at(s, x)


def j0_field(params: ModelParams, mu: InitialMeasure, grid: GridSpec) -> ScalarField:
    """J0(t, x) = int mu(dy) G(t, x - y) on the grid."""
    lat = make_lattice(grid, mu, grid.t_max, params.a)
    ev = J0Evaluator(params, mu, lat)
    idx = lat.index(grid.x)
    vals = np.empty((grid.nt, grid.nx))
    for i, t in enumerate(grid.t):
        vals[i] = ev.density_on_lattice(t)[idx] + ev.atoms_at(t, grid.x)
    return ScalarField(grid, vals)


def j0_values(params: ModelParams, mu: InitialMeasure, t: float, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    grid = GridSpec(t, t, 1, max(1.0, float(np.max(np.abs(x)))), 3)
    lat = make_lattice(grid, mu, t, params.a, h=grid.dx / 64)
    return J0Evaluator(params, mu, lat).at(t, x)


# ---------------------------------------------------------------------------
# (J0^2 * K)


class KernelHat:
    """Khat(tau, xi) for a fixed lam and truncation, from the unit-time spectra."""

    def __init__(self, params: ModelParams, lam: float, n_trunc: int):
        self.prof = kernel_profiles(params)
        self.prof.ensure(n_trunc)
        self.params = params
        self.lam = lam
        self.n_trunc = n_trunc

    def __call__(self, tau: float, xi: np.ndarray) -> np.ndarray:
        prof = self.prof
        spec = prof.combined_spectrum(tau, self.lam, self.n_trunc)
        w = tau ** (1 / self.params.a) * np.abs(xi)
        inside = w <= prof.omega[-1]
        re = CubicSpline(prof.omega, spec.real)
        im = CubicSpline(prof.omega, spec.imag)
        wc = np.where(inside, w, 0.0)
        out = np.where(inside, re(wc) + 1j * np.sign(xi) * im(wc), 0.0)
        return out


def _time_rule(t: float, a: float, s_lo: float, nodes: int, left_singular: bool):
    """Nodes and weights in s on [s_lo, t] with exact handling of (t-s)^(-1/a) and, if asked, s^(-1/a).

    Returned weights already include the singular factor, i.e. they integrate
    g(s) * (t - s)^(-1/a) (right part) or g(s) * s^(-1/a) (left part) for smooth g;
    the second array flags which factor was absorbed.
    """
    mid = 0.5 * (s_lo + t)
    e = a - 2  # (t-s) = v^a: ds (t-s)^(-1/a) = a v^(a-2) dv
    x, w = _jacobi(nodes, e)
    V = (t - mid) ** (1 / a)
    v = V * (1 + x) / 2
    s_right = t - v**a
    w_right = a * (V / 2) ** (e + 1) * w
    if s_lo == 0 and left_singular:
        U = mid ** (1 / a)
        u = U * (1 + x) / 2
        s_left = u**a
        w_left = a * (U / 2) ** (e + 1) * w
        kind_left = np.full(nodes, 1)
    else:
        from scipy.special import roots_legendre

        xg, wg = roots_legendre(nodes)
        s_left = 0.5 * (mid - s_lo) * xg + 0.5 * (mid + s_lo)
        w_left = 0.5 * (mid - s_lo) * wg
        kind_left = np.zeros(nodes, dtype=int)
    s = np.concatenate([s_left, s_right])
    wts = np.concatenate([w_left, w_right])
    kind = np.concatenate([kind_left, np.full(nodes, 2)])
    return s, wts, kind


def _atom_source_hat(params, ev: J0Evaluator, s: float, xi: np.ndarray):
    """Exact transforms of the atom spikes in J0(s)^2, and their lattice samples to subtract."""
    prof0 = kernel_profiles(params).terms[0]
    a = params.a
    hat = np.zeros(xi.shape, dtype=complex)
    samples = np.zeros(ev.lat.n)
    atoms = ev.mu.atoms
    if not atoms:
        return hat, samples
    dens_at_atoms = ev.density_at(s, np.array([x for x, _ in atoms]))
    for i, (xi_, mi) in enumerate(atoms):
        # diagonal m_i^2 G(s, x - x_i)^2
        hat += mi**2 * np.exp(-1j * xi * xi_) * s ** (-1 / a) * prof0(s ** (1 / a) * xi)
        g = ev.prof.density(s, ev.lat.x - xi_)
        samples += mi**2 * g**2
        # linear spike m_i G(s, x - x_i) * (rest of 2 J0 evaluated at x_i)
        rest = 2 * dens_at_atoms[i]
        for j, (xj, mj) in enumerate(atoms):
            if j != i:
                rest += mj * float(ev.prof.density(s, np.array([xi_ - xj]))[0])
        if rest != 0:
            hat += mi * rest * np.exp(-1j * xi * xi_) * _green_hat(params, s, xi)
            samples += mi * rest * g
    return hat, samples


def lower_kernel_hat(params: ModelParams, lam: float) -> Callable:
    """Transform of the kernel lower bound C tau^(b-1) E_{b,b}(Upsilon tau^b) g_1(tau^(1/a), .)."""
    from .kernel_k import lower_constant, upsilon
    from .specfun import MLParams, mittag_leffler

    b, a = params.b, params.a
    c, ups = lower_constant(params, lam), upsilon(params, lam)
    ml = MLParams(b, b)

    def khat(tau, xi):
        return c * tau ** (b - 1) * mittag_leffler(ml, ups * tau**b) * np.exp(-tau ** (1 / a) * np.abs(xi))

    return khat


def _conv_with_kernel(params, khat: Callable, t, lat: Lattice, source_hat: Callable, s_lo: float = 0.0,
                      nodes: int = 40, left_singular: bool = True) -> np.ndarray:
    """(F * K)(t, .) on the lattice, given s -> Fhat_s(xi) and (tau, xi) -> Khat."""
    kh = khat
    xi = lat.xi
    s_nodes, wts, kind = _time_rule(t, params.a, s_lo, nodes, left_singular)
    total = np.zeros(lat.n, dtype=complex)
    a = params.a
    for s, w, k in zip(s_nodes, wts, kind):
        fh = source_hat(s)
        khat = kh(t - s, xi)
        if k == 1:
            factor = s ** (1 / a)
        elif k == 2:
            factor = (t - s) ** (1 / a)
        else:
            factor = 1.0
        total += w * factor * fh * khat
    return lat.inverse(total)


def _classify(mu: InitialMeasure):
    d = mu.density
    dens_zero = d is None or (not np.any(d.values - d.constant))
    if len(mu.atoms) == 1 and dens_zero and mu.constant == 0:
        return "atom"
    if not mu.atoms and dens_zero:
        return "constant"
    if not mu.atoms and d is None:
        return "zero"
    return "general"


def j0sq_conv_k(params: ModelParams, mu: InitialMeasure, lam: float, times, x, n_trunc: Optional[int] = None,
                method: str = "auto", tol: float = KERNEL_TOL) -> np.ndarray:
    """(J0^2 * K)(t, x) for each t in ``times`` at the points x (rows: times).

    One atom uses (J0^2 * K) = m^2 (K - L0) / lam^2, since L0 * K = K - L0.
    A constant density c gives c^2 H(t).  Anything else goes through the
    Fourier pipeline.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((times.size, x.size))
    if lam == 0 or mu.is_zero:
        return out
    if n_trunc is None:
        n_trunc = truncation_index(params, float(times.max()), lam, tol)
    kind = _classify(mu)
    if kind == "atom":
        (x0, m), = mu.atoms
        eng = _pointwise_engine(params, method)
        for i, t in enumerate(times):
            k = eng.kernel_values(t, x - x0, lam, n_trunc)
            l0 = lam**2 * green_profile(params).density(t, x - x0) ** 2
            out[i] = m**2 * np.maximum(k - l0, 0.0) / lam**2
        return out
    c = mu.constant
    out += c**2 * h_values(params, times, lam, n_trunc)[:, None]
    if kind == "constant":
        return out
    return out + _general_pipeline(params, mu, lam, times, x, n_trunc)


def _general_pipeline(params, mu, lam, times, x, n_trunc, nodes: int = 40) -> np.ndarray:
    """The J0^2 - c^2 part via lattice FFT plus exact atom spikes."""
    reach = float(np.max(np.abs(x))) if x.size else 1.0
    h = _lattice_step(x)
    grid = GridSpec(float(times.min()), float(times.max()), max(2, times.size) if times.min() != times.max() else 1,
                    max(reach, h), 3)
    lat = make_lattice(grid, mu, float(times.max()), params.a, h=h)
    ev = J0Evaluator(params, mu, lat)
    c = mu.constant
    xi = lat.xi
    khat = KernelHat(params, lam, n_trunc)

    def source_hat(s):
        spike_hat, spike_samples = _atom_source_hat(params, ev, s, xi)
        j0 = ev.on_lattice(s)
        resid = j0**2 - c**2 - spike_samples
        return lat.forward(resid) + spike_hat

    idx = np.mod(np.rint(x / lat.h).astype(int), lat.n)
    out = np.empty((times.size, x.size))
    for i, t in enumerate(times):
        vals = _conv_with_kernel(params, khat, t, lat, source_hat, nodes=nodes, left_singular=bool(mu.atoms))
        out[i] = vals[idx]
    return out


def _lattice_step(x: np.ndarray) -> float:
    """Largest step <= 0.05 that puts every requested x on the lattice when x is uniform; else 0.02."""
    xs = np.unique(np.round(x, 12))
    if xs.size > 1:
        d = float(np.min(np.diff(xs)))
        if np.allclose(np.round(xs / d), xs / d, atol=1e-9):
            r = max(1, int(math.ceil(d / 0.05)))
            return d / r
    if xs.size == 1 and xs[0] != 0:
        r = max(1, int(math.ceil(abs(xs[0]) / 0.05)))
        return abs(xs[0]) / r
    return 0.05


def conv_field_with_kernel(params: ModelParams, lam: float, source: Callable, times, x, s_lo: float,
                           n_trunc: Optional[int] = None, nodes: int = 40,
                           kernel: str = "series") -> np.ndarray:
    """(F * K)(t, x) for a smooth source F(s, x) that vanishes for s < s_lo (s_lo > 0).

    kernel="series" uses K itself, kernel="lower" its pointwise lower bound.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if lam == 0:
        return np.zeros((times.size, x.size))
    if kernel == "series":
        if n_trunc is None:
            n_trunc = truncation_index(params, float(times.max()), lam, KERNEL_TOL)
        khat = KernelHat(params, lam, n_trunc)
    elif kernel == "lower":
        khat = lower_kernel_hat(params, lam)
    else:
        raise DomainError(f"kernel must be 'series' or 'lower', got {kernel!r}")
    h = _lattice_step(x)
    grid = GridSpec(float(times.min()), float(times.max()), 2 if times.min() != times.max() else 1,
                    max(float(np.max(np.abs(x))), h), 3)
    lat = make_lattice(grid, InitialMeasure(), float(times.max()), params.a, h=h)
    idx = np.mod(np.rint(x / lat.h).astype(int), lat.n)
    out = np.zeros((times.size, x.size))
    for i, t in enumerate(times):
        if t <= s_lo:
            continue
        vals = _conv_with_kernel(params, khat, t, lat, lambda s: lat.forward(source(s, lat.x)),
                                 s_lo=s_lo, nodes=nodes, left_singular=False)
        out[i] = vals[idx]
    return out


# ---------------------------------------------------------------------------
# moment fields


def bdg_constant(p: int) -> float:
    """Upper value used for the BDG constant: z_2 = 1, z_p = 2 sqrt(p) otherwise."""
    _require_even(p)
    return 1.0 if p == 2 else 2.0 * math.sqrt(p)


def a_pv(p: int, vip: float) -> float:
    _require_even(p)
    if p == 2:
        return 1.0
    return 2 ** ((p - 1) / p) if vip != 0 else math.sqrt(2)


def hat_lambda(params: ModelParams, p: int) -> float:
    """Coupling of Khat_p: a_{p,V} z_p Lip."""
    return a_pv(p, params.vip_upper) * bdg_constant(p) * params.lip_upper


def _require_even(p):
    if int(p) != p or p < 2 or int(p) % 2:
        raise DomainError(f"p must be an even integer >= 2, got {p!r}")


def _moment_from_parts(params, mu, grid, lam, vv, j0_weight, conv_weight, method="auto"):
    j0 = j0_field(params, mu, grid).values
    vals = j0_weight * j0**2
    if lam != 0:
        n_trunc = truncation_index(params, grid.t_max, lam, KERNEL_TOL)
        if vv != 0:
            vals = vals + vv**2 * h_values(params, grid.t, lam, n_trunc)[:, None]
        vals = vals + conv_weight * j0sq_conv_k(params, mu, lam, grid.t, grid.x, n_trunc, method=method)
    return ScalarField(grid, vals)


def second_moment_exact(params: ModelParams, mu: InitialMeasure, grid: GridSpec, vv: float,
                        lam: Optional[float] = None) -> ScalarField:
    """E u^2 = J0^2 + ((v^2 + J0^2) * K) for rho(u)^2 = lam^2 (v^2 + u^2)."""
    lam = params.lam if lam is None else lam
    params.require_solution_regime()
    return _moment_from_parts(params, mu, grid, lam, vv, 1.0, 1.0)


def pth_moment_upper(params: ModelParams, mu: InitialMeasure, grid: GridSpec, p: int) -> ScalarField:
    """Upper bound on ||u||_p^2: uses Kbar for p=2 and Khat_p otherwise."""
    _require_even(p)
    params.require_solution_regime()
    if p == 2:
        return _moment_from_parts(params, mu, grid, params.lip_upper, params.vip_upper, 1.0, 1.0)
    return _moment_from_parts(params, mu, grid, hat_lambda(params, p), params.vip_upper, 2.0, 2.0)


def second_moment_lower(params: ModelParams, mu: InitialMeasure, grid: GridSpec) -> ScalarField:
    """Lower bound on E u^2 with the lower growth constants (Kunder at lam = l_rho)."""
    params.require_solution_regime()
    return _moment_from_parts(params, mu, grid, params.lip_lower, params.vip_lower, 1.0, 1.0)


# ---------------------------------------------------------------------------
# two-point correlation


def _peak_rule(centres, widths, n_gl: int = 16, max_doublings: int = 26):
    """Panels refined around each (centre, width) pair, geometric outwards."""
    from scipy.special import roots_legendre

    xg, wg = roots_legendre(n_gl)
    pts = []
    steps = np.concatenate([[0.0], 0.25 * 2.0 ** np.arange(max_doublings)])
    for c, w in zip(centres, widths):
        pts.append(c + w * steps)
        pts.append(c - w * steps)
    pts = np.unique(np.concatenate(pts))
    lo, hi = pts[:-1], pts[1:]
    keep = hi - lo > 1e-14 * (1 + np.abs(hi))
    lo, hi = lo[keep], hi[keep]
    z = (0.5 * (hi - lo)[:, None] * xg + 0.5 * (hi + lo)[:, None]).ravel()
    wz = (0.5 * (hi - lo)[:, None] * wg).ravel()
    return z, wz


def two_point_bound(params: ModelParams, mu: InitialMeasure, t: float, x: float, tau: float, y: float,
                    which: str = "exact", vv: Optional[float] = None, lam: Optional[float] = None,
                    variant: str = "printed", nodes: int = 20) -> float:
    """J0(t,x) J0(tau,y) + I(t,x,tau,y; v, lam).

    ``which`` picks the default (v, lam): upper -> (V, Lip), lower -> (v_low, l_rho),
    exact -> (params.vip_upper, params.lam).  The convolution term inside I is
    evaluated at (r, y) for variant "printed" and at (r, z) for variant "z".
    """
    if not (tau >= t > 0):
        raise DomainError("two_point_bound needs tau >= t > 0")
    if which not in ("upper", "lower", "exact"):
        raise DomainError(f"which must be upper, lower or exact, got {which!r}")
    if variant not in ("printed", "z"):
        raise DomainError(f"variant must be 'printed' or 'z', got {variant!r}")
    params.require_solution_regime()
    if lam is None:
        lam = {"upper": params.lip_upper, "lower": params.lip_lower, "exact": params.lam}[which]
    if vv is None:
        vv = {"upper": params.vip_upper, "lower": params.vip_lower, "exact": params.vip_upper}[which]
    j0x = float(j0_values(params, mu, t, [x])[0])
    j0y = float(j0_values(params, mu, tau, [y])[0])
    base = j0x * j0y
    if lam == 0:
        return base
    a = params.a
    prof = green_profile(params)
    n_trunc = truncation_index(params, tau, lam, KERNEL_TOL)
    r_nodes, r_w, kind = _time_rule(t, a, 0.0, nodes, left_singular=True)
    hs = h_values(params, r_nodes, lam, n_trunc)
    total = 0.0
    atoms = mu.atoms
    for r, w, k, hr in zip(r_nodes, r_w, kind, hs):
        centres = [x, y] + [xa for xa, _ in atoms]
        widths = [(t - r) ** (1 / a), (tau - r) ** (1 / a)] + [r ** (1 / a)] * len(atoms)
        if mu.density is not None:
            centres.append(0.5 * (mu.density.x0 + mu.density.x_end))
            widths.append(max(mu.density.x_end - mu.density.x0, 1.0))
        z, wz = _peak_rule(centres, widths)
        j0 = j0_values(params, mu, r, z) if (atoms or mu.density is not None) else np.zeros(z.size)
        if variant == "printed":
            conv = j0sq_conv_k(params, mu, lam, [r], [y], n_trunc)[0, 0]
        else:
            conv = _conv_at_points(params, mu, lam, r, z, n_trunc)
        src = j0**2 + conv + vv**2 * (hr + 1)
        gg = prof.density(t - r, x - z) * prof.density(tau - r, y - z)
        inner = float(np.sum(wz * src * gg))
        if k == 1:
            inner *= r ** (1 / a)
        elif k == 2:
            inner *= (t - r) ** (1 / a)
        total += w * inner
    return base + lam**2 * total


def _conv_at_points(params, mu, lam, r, z, n_trunc):
    """(J0^2 * K)(r, z) at scattered z; interpolates a lattice evaluation when needed."""
    kind = _classify(mu)
    if kind in ("atom", "constant", "zero"):
        return j0sq_conv_k(params, mu, lam, [r], z, n_trunc)[0]
    zmax = float(np.max(np.abs(z)))
    reach = min(zmax, 200.0)
    xs = np.linspace(-reach, reach, 2 * int(reach / 0.05) + 1)
    vals = j0sq_conv_k(params, mu, lam, [r], xs, n_trunc)[0]
    return np.interp(z, xs, vals, left=0.0, right=0.0)


# ---------------------------------------------------------------------------
# a-priori bounds


def j0_upper_bound(params: ModelParams, mu: InitialMeasure, s: float, t: float) -> float:
    """A_a K_{a,0} (t v 1)^(1+1/a) s^(-1/a), valid for 0 < s <= t."""
    if not 0 < s <= t:
        raise DomainError("j0_upper_bound needs 0 < s <= t")
    a = params.a
    return admissibility_constant(mu, a) * tail_constant(params) * max(t, 1.0) ** (1 + 1 / a) * s ** (-1 / a)


def j20k_growth_bound(params: ModelParams, mu: InitialMeasure, t: float, p: int = 2,
                      lam: Optional[float] = None) -> float:
    """C' (t v 1)^(2(1+1/a)) t^(1-2/a) [t^(-1/a) + exp(gamma^a* t)] bounding (J0^2 * K)(t, x)."""
    if not t > 0:
        raise DomainError("j20k_growth_bound needs t > 0")
    params.require_solution_regime()
    if lam is None:
        lam = params.lip_upper if p == 2 else hat_lambda(params, p)
    a, ast = params.a, params.a_star
    gam = gamma_rate(params, lam)
    c_up = upper_constant(params, lam)
    aa = admissibility_constant(mu, a)
    k0 = tail_constant(params)
    beta_ratio = math.exp(2 * special.gammaln(1 / ast) - special.gammaln(2 / ast))
    c_prime = c_up * aa**2 * k0**2 * max(ast, beta_ratio)
    return c_prime * max(t, 1.0) ** (2 * (1 + 1 / a)) * t ** (1 - 2 / a) * (t ** (-1 / a) + math.exp(gam**ast * t))


def j0_lower_envelope(params: ModelParams, mu: InitialMeasure, t, x, eps: float = 0.1):
    """C 1{t >= eps} g_a(t, sqrt(2) x), C = Ctilde pi^2 eps^(1/a) int mu(dy) g_a(eps, sqrt(2) y)."""
    params.require_strict()
    if not mu.nonnegative or mu.is_zero:
        raise DomainError("the lower envelope needs a nonnegative, non-vanishing measure")
    if not eps > 0:
        raise DomainError("eps must be > 0")
    return envelope_constant(params, mu, eps) * np.where(
        np.asarray(t) >= eps, g_a_kernel(params.a, np.maximum(np.asarray(t, dtype=float), eps), math.sqrt(2) * np.asarray(x)), 0.0
    )


def envelope_conv_field(params: ModelParams, mu: InitialMeasure, grid: GridSpec, eps: float = 0.1,
                        kernel: str = "lower") -> ScalarField:
    """(I^2 * K) with I the lower envelope of J0 and K at lam = l_rho (series or its lower bound)."""
    const = envelope_constant(params, mu, eps)
    a = params.a

    def source(s, x):
        return (const * g_a_kernel(a, s, math.sqrt(2) * x)) ** 2

    vals = conv_field_with_kernel(params, params.lip_lower, source, grid.t, grid.x, eps, kernel=kernel)
    return ScalarField(grid, vals)


def envelope_constant(params: ModelParams, mu: InitialMeasure, eps: float) -> float:
    a = params.a
    total = sum(m * g_a_kernel(a, eps, math.sqrt(2) * x0) for x0, m in mu.atoms)
    d = mu.density
    if d is not None:
        z, w = _real_line_rule(a)
        total += float(np.sum(w * d(z) * g_a_kernel(a, eps, math.sqrt(2) * z)))
    return c_tilde(params) * math.pi**2 * eps ** (1 / a) * total


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentConstants:
    gamma_bar: float
    gamma_low: float
    gamma_hat_p: float
    z_p: float
    a_pv: float


@dataclass(frozen=True)
class MomentReport:
    p: int
    upper_field: ScalarField
    lower_field: ScalarField
    constants: MomentConstants
    second_moment_exact: Optional[ScalarField] = None
    two_point_samples: tuple = ()


def moment_constants(params: ModelParams, p: int) -> MomentConstants:
    _require_even(p)
    base = gamma_rate(params, 1.0)
    return MomentConstants(
        gamma_bar=params.lip_upper**2 * base,
        gamma_low=params.lip_lower**2 * base,
        gamma_hat_p=hat_lambda(params, p) ** 2 * base,
        z_p=bdg_constant(p),
        a_pv=a_pv(p, params.vip_upper),
    )


def moment_report(params: ModelParams, mu: InitialMeasure, grid: GridSpec, p: int = 2,
                  exact_lam: Optional[float] = None, exact_v: Optional[float] = None,
                  two_point_points: tuple = ()) -> MomentReport:
    up = pth_moment_upper(params, mu, grid, p)
    lo = second_moment_lower(params, mu, grid)
    ex = None
    if exact_lam is not None:
        ex = second_moment_exact(params, mu, grid, exact_v or 0.0, exact_lam)
    samples = []
    for (t, x, tau, y) in two_point_points:
        samples.append((t, x, tau, y, two_point_bound(params, mu, t, x, tau, y, "upper"),
                        two_point_bound(params, mu, t, x, tau, y, "lower")))
    return MomentReport(p, up, lo, moment_constants(params, p), ex, tuple(samples))


__all__ = [
    "DensityPart",
    "InitialMeasure",
    "admissibility_constant",
    "j0_field",
    "j0_values",
    "j0sq_conv_k",
    "second_moment_exact",
    "pth_moment_upper",
    "second_moment_lower",
    "two_point_bound",
    "j20k_growth_bound",
    "j0_upper_bound",
    "j0_lower_envelope",
    "envelope_constant",
    "envelope_conv_field",
    "conv_field_with_kernel",
    "MomentReport",
    "MomentConstants",
    "moment_constants",
    "moment_report",
    "bdg_constant",
    "a_pv",
    "hat_lambda",
    "c_nu",
]
