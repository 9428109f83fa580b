"""The ten acceptance criteria at their stated tolerances.

Each test records a one-line verdict in OUTCOMES; conftest prints them after
the run, and ``python tests/test_acceptance.py`` prints them directly.
"""

import math
import time
import warnings

import numpy as np
from scipy import integrate, special

from fracshe.cli import main
from fracshe.growth import e_lower, e_upper, intermittency_lower, intermittency_upper
from fracshe.kernel_k import heat_kernel_closed_form, kernel_lower_bound_field, kernel_series, kernel_upper_bound_field
from fracshe.model import GridSpec, ModelParams
from fracshe.moments import InitialMeasure, pth_moment_upper, second_moment_exact, second_moment_lower
from fracshe.simulator import RhoSpec, SimConfig, simulate
from fracshe.specfun import MLParams, mittag_leffler, ml_time_integral
from fracshe.stable_green import green_density, green_field, green_profile, green_values, lambda_const
from fracshe.verify import DEFAULT_A, c1_constant, c2_constant, c3_constant, check_time_incr, verify_all

OUTCOMES: dict[int, str] = {}

ACCEPT_GRID = GridSpec(0.1, 2.0, 64, 4.0, 257)
PROBE_T = (15, 31, 47, 63)
PROBE_X = (64, 96, 128, 160, 192)


def record(n: int, ok: bool, detail: str, started: float):
    OUTCOMES[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - started:.1f} s) {detail}"
    assert ok, detail


def test_criterion_01_green_function():
    t0 = time.perf_counter()
    cases = [(2.0, 0.0, 0.1), (2.0, 0.0, 1.0), (1.5, 0.0, 0.5), (1.5, 0.1, 0.1), (1.5, 0.1, 2.0),
             (1.8, 0.05, 1.0), (1.25, 0.5, 0.5), (1.25, 0.0, 1.0), (1.75, -0.2, 0.3), (1.1, 0.8, 1.0)]
    mass_err = 0.0
    for a, d, t in cases:
        p = ModelParams(a, d)
        grid = GridSpec(t, t, 1, 50.0, 4001)
        inside = np.trapezoid(green_field(p, grid).values[0], grid.x)
        # mass beyond the tabulated window, from the same density
        right = integrate.quad(lambda x: green_density(p, t, x), 50.0, math.inf, limit=200)[0]
        left = integrate.quad(lambda x: green_density(p, t, -x), 50.0, math.inf, limit=200)[0]
        mass_err = max(mass_err, abs(inside + right + left - 1))

    heat_grid = GridSpec(0.1, 2.0, 20, 10.0, 401)
    vals = green_field(ModelParams(2.0), heat_grid).values
    t, x = heat_grid.t[:, None], heat_grid.x[None, :]
    gauss_err = float(np.abs(vals - np.exp(-x * x / (4 * t)) / np.sqrt(4 * np.pi * t)).max())

    rng = np.random.default_rng(1)
    z = np.linspace(-400, 400, 400001)
    semi_err = 0.0
    for k in range(20):
        p = ModelParams(*[(1.5, 0.1), (1.8, 0.05), (1.5, 0.0), (2.0, 0.0)][k % 4])
        prof = green_profile(p)
        s, u = rng.uniform(0.1, 1.5, 2)
        xx = rng.uniform(-3, 3)
        conv = np.trapezoid(prof.density(u, xx - z) * prof.density(s, z), z)
        semi_err = max(semi_err, abs(conv - float(green_values(p, u + s, xx))))

    ok = mass_err <= 1e-3 and gauss_err <= 1e-7 and semi_err <= 1e-4
    record(1, ok, f"mass {mass_err:.1e} <= 1e-3, gaussian {gauss_err:.1e} <= 1e-7, semigroup {semi_err:.1e} <= 1e-4", t0)


def test_criterion_02_lambda_constant():
    t0 = time.perf_counter()
    err = max(abs(lambda_const(ModelParams(a)) - special.gamma(1 + 1 / a) / math.pi) for a in (1.25, 1.5, 1.75, 2.0))
    record(2, err <= 1e-6, f"max |Lambda - Gamma(1+1/a)/pi| = {err:.1e} <= 1e-6", t0)


def test_criterion_03_kernel_sandwich():
    t0 = time.perf_counter()
    details, ok = [], True
    for ad in [(1.5, 0.1), (1.8, 0.05)]:
        p = ModelParams(*ad)
        est = kernel_series(p, ACCEPT_GRID, 1.0)
        k = est.field.values
        up = kernel_upper_bound_field(p, ACCEPT_GRID, 1.0).values + est.tail_bound_field[:, None]
        lo = kernel_lower_bound_field(p, ACCEPT_GRID, 1.0).values
        above = float(np.max(k - up))
        below = float(np.max(lo - k))
        bad = int(np.sum(lo - 1e-4 > k))
        ok &= above <= 1e-4 and below <= 1e-4
        details.append(f"{ad}: max(K-upper) {above:.1e}, max(lower-K) {below:.1e}, {bad} points under lower")
    record(3, ok, "; ".join(details), t0)


def test_criterion_04_heat_kernel_oracle():
    t0 = time.perf_counter()
    k = kernel_series(ModelParams(2.0), ACCEPT_GRID, 1.0).field.values
    exact = heat_kernel_closed_form(ACCEPT_GRID.t[:, None], ACCEPT_GRID.x[None, :], 1.0)
    inner = np.abs(ACCEPT_GRID.x) <= 3
    rel = float(np.max(np.abs(k[:, inner] / exact[:, inner] - 1)))
    record(4, rel <= 0.01, f"max relative error {rel:.1e} <= 1e-2", t0)


def _probe(m, se, lo, hi):
    good = 0
    for i in PROBE_T:
        for j in PROBE_X:
            tol_lo = 3 * se[i, j] + 0.05 * lo[i, j]
            tol_hi = 3 * se[i, j] + 0.05 * hi[i, j]
            good += lo[i, j] - tol_lo <= m[i, j] <= hi[i, j] + tol_hi
    return good


def test_criterion_05_exact_second_moment():
    t0 = time.perf_counter()
    lam = 0.5
    p = ModelParams(2.0, lam=lam, lip_upper=lam, lip_lower=lam)
    mu = InitialMeasure.lebesgue()
    em = simulate(p, mu, SimConfig(ACCEPT_GRID, 10_000, 2024, RhoSpec.linear(lam)))
    exact = second_moment_exact(p, mu, ACCEPT_GRID, 0.0, lam).values
    good = _probe(em.moment_fields[2].values, em.stderr_fields[2].values, exact, exact)
    record(5, good == 20, f"{good}/20 probes within 3 SE + 5% of the exact moment", t0)


def test_criterion_06_bound_envelope():
    t0 = time.perf_counter()
    p = ModelParams(1.5, 0.1)
    mu = InitialMeasure.dirac()
    em = simulate(p, mu, SimConfig(ACCEPT_GRID, 10_000, 2024, RhoSpec.linear(1.0)))
    lo = second_moment_lower(p, mu, ACCEPT_GRID).values
    up = pth_moment_upper(p, mu, ACCEPT_GRID, 2).values
    good = _probe(em.moment_fields[2].values, em.stderr_fields[2].values, lo, up)
    record(6, good == 20, f"{good}/20 probes inside [lower - tol, upper + tol]", t0)


def test_criterion_07_verification_suite():
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = verify_all()
    bad = [r for r in results if not (r.passed and r.worst_margin >= -1e-6)]
    heat = ModelParams(2.0)
    consts = [(c1_constant(heat), 0.5), (c2_constant(heat, "stated"), (math.sqrt(2) - 1) / math.sqrt(math.pi)),
              (c3_constant(heat, "stated"), 1 / math.sqrt(math.pi))]
    const_ok = all(abs(c - ref) <= 1e-12 * ref for c, ref in consts)
    sup_ok = all(abs(check_time_incr(a).constants["sup_g"] - (2 ** (1 / a) - 1)) <= 1e-6 for a in DEFAULT_A)
    ok = not bad and const_ok and sup_ok
    names = ", ".join(f"{r.name} ({r.worst_margin:.2e})" for r in bad)
    record(7, ok, f"{len(results) - len(bad)}/{len(results)} checks pass; a=2 constants "
                  f"{'match' if const_ok else 'differ'}; sup g {'matches' if sup_ok else 'differs'}"
                  + (f"; failing: {names}" if bad else ""), t0)


def test_criterion_08_growth_coherence():
    t0 = time.perf_counter()
    worst = []
    count = 0
    for a in (1.2, 1.4, 1.5, 1.6, 1.8, 1.9):
        for frac in (-0.9, -0.5, 0.0, 0.5, 0.9):
            p = ModelParams(a, frac * (2 - a), lip_upper=1.0, lip_lower=1.0)
            assert p.strict
            el = float(e_lower(p))
            for q in (2, 4, 6):
                count += 1
                if not (intermittency_lower(p, q) <= intermittency_upper(p, q) and el <= e_upper(p, q, 1 + a)):
                    worst.append((a, p.delta, q))
    record(8, not worst, f"{count - len(worst)}/{count} (a, delta, p) cases coherent", t0)


def test_criterion_09_mittag_leffler():
    t0 = time.perf_counter()
    z = np.linspace(-5, 30, 701)
    exp_err = max(abs(mittag_leffler(MLParams(1, 1), float(v)) / math.exp(v) - 1) for v in z)
    rng = np.random.default_rng(9)
    int_err = 0.0
    for _ in range(50):
        alpha, beta = rng.uniform(0.1, 1.0), rng.uniform(0.2, 3.0)
        lam, t = rng.uniform(-2, 3), rng.uniform(0.1, 3)
        ml = MLParams(alpha, beta)
        with warnings.catch_warnings():
            # QUADPACK flags the s^(beta-1) endpoint even with the algebraic weight
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            ref = integrate.quad(lambda s: mittag_leffler(ml, lam * s**alpha), 0, t, weight="alg",
                                 wvar=(beta - 1, 0), epsrel=1e-12, epsabs=0, limit=200)[0]
        int_err = max(int_err, abs(ml_time_integral(ml, lam, t) / ref - 1))
    ok = exp_err <= 1e-10 and int_err <= 1e-8
    record(9, ok, f"E_1,1 vs exp {exp_err:.1e} <= 1e-10, time integral {int_err:.1e} <= 1e-8 over 50 draws", t0)


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "det.cfg"
    cfg.write_text("model.a = 1.5\nmodel.delta = 0.1\ngrid.nt = 8\ngrid.nx = 65\nsim.n_paths = 40\n"
                   "sim.batch_size = 10\nsim.p_values = 2, 4\n")
    outs = []
    for threads in (1, 2, 1):
        out = tmp_path / f"out{len(outs)}"
        assert main(["simulate", "--config", str(cfg), "--out", str(out), "--seed", "5",
                     "--set", f"sim.threads={threads}", "--quiet"]) == 0
        outs.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
    ok = outs[0] == outs[1] == outs[2] and len(outs[0]) == 4
    record(10, ok, f"{len(outs[0])} CSV files byte-identical across threads 1, 2, 1", t0)


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn(Path(tempfile.mkdtemp())) if "tmp_path" in fn.__code__.co_varnames else fn()
            except AssertionError:
                pass
            n = int(name.split("_")[2])
            print(OUTCOMES.get(n, f"criterion {n:2d}: FAIL (error)"), flush=True)
    sys.exit(0 if all(" PASS " in v for v in OUTCOMES.values()) else 1)
