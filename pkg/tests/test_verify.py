import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fracshe.errors import DomainError
from fracshe.model import ModelParams
from fracshe.stable_green import g_a_kernel, green_profile, green_values
from fracshe.verify import (
    CheckResult,
    c1_constant,
    c2_constant,
    c3_constant,
    check_fourier_lower,
    check_g1_lemmas,
    check_prop_g,
    check_time_incr,
    fourier_closed_form,
    fourier_lhs,
    increment_t1,
    increment_t2,
    increment_x,
    suite_passed,
    time_incr_g,
    time_incr_lhs,
)


def test_heat_constants():
    p = ModelParams(2.0)
    assert c1_constant(p) == pytest.approx(0.5, rel=1e-14)
    assert c3_constant(p, "stated") == pytest.approx(1 / math.sqrt(math.pi), rel=1e-14)
    assert c2_constant(p, "stated") == pytest.approx((math.sqrt(2) - 1) / math.sqrt(math.pi), rel=1e-14)
    assert c3_constant(p) == pytest.approx(c3_constant(p, "stated") / math.sqrt(2), rel=1e-14)


def test_stated_constant_undefined_when_cosine_negative():
    # cos(2^(1/a) theta) <= 0 needs 2^(1/a) |theta| >= pi/2
    assert math.isnan(c3_constant(ModelParams(1.05, 0.94), "stated"))
    assert math.isfinite(c3_constant(ModelParams(1.05, 0.94)))


def test_trivial_increments_vanish():
    p = ModelParams(1.5, 0.1)
    assert increment_x(p, 1.0, 0.0) == 0.0
    assert increment_t1(p, 0.0, 1.0) == 0.0
    assert increment_t1(p, 1.0, 1.0) == 0.0
    assert increment_t2(p, 1.0, 1.0) == 0.0
    assert time_incr_lhs(1.5, 1.0, 1.0) == 0.0


def space_route_increment_x(params, t, h):
    # int G(r, z) G(r, z - h) dz is the symmetric density at time 2 r cos(theta), evaluated at h
    sym = ModelParams(params.a, 0.0)
    c = math.cos(params.theta)
    m0 = float(green_values(sym, 2 * c, 0.0))

    def f(r):
        return 2 * (m0 * r ** (-1 / params.a) - float(green_values(sym, 2 * c * r, h)))

    knee = min(t, abs(h) ** params.a)
    tail = integrate.quad(f, knee, t, limit=200, epsabs=1e-13, epsrel=1e-10)[0] if knee < t else 0.0
    # near r = 0 the overlap is negligible against the r^(-1/a) term; split it off exactly
    head = integrate.quad(lambda r: -2 * float(green_values(sym, 2 * c * r, h)), 0, knee, limit=200,
                          epsabs=1e-14, epsrel=1e-10)[0]
    head += 2 * m0 * knee ** (1 - 1 / params.a) / (1 - 1 / params.a)
    return head + tail


@pytest.mark.parametrize("ad", [(2.0, 0.0), (1.5, 0.1), (1.8, 0.05), (1.5, 0.0)])
@pytest.mark.parametrize("th", [(1.0, 0.3), (2.0, 1.5), (0.2, -0.7)])
def test_space_increment_matches_semigroup_route(ad, th):
    p = ModelParams(*ad)
    t, h = th
    assert increment_x(p, t, h) == pytest.approx(space_route_increment_x(p, t, h), rel=1e-7)


@pytest.mark.parametrize("ad", [(1.5, 0.1), (1.5, 0.0)])
def test_time_increment_matches_x_space_trapezoid(ad):
    p = ModelParams(*ad)
    a = p.a
    prof = green_profile(p)
    t, s = 1.0, 0.9

    def inner(r):
        tau1, tau2 = t - r, s - r
        w1, w2 = tau1 ** (1 / a), tau2 ** (1 / a)
        z = np.unique(np.concatenate([np.linspace(-80 * w1, 80 * w1, 40001), np.linspace(-80 * w2, 80 * w2, 40001),
                                      w2 * np.sinh(np.linspace(-12, 12, 20001))]))
        return np.trapezoid((prof.density(tau1, z) - prof.density(tau2, z)) ** 2, z)

    # s - r = q^3 flattens the (s - r)^(-1/a) singularity
    q, w = np.polynomial.legendre.leggauss(40)
    qmax = s ** (1 / 3)
    q, w = (q + 1) / 2 * qmax, w / 2 * qmax
    ref = sum(wi * inner(s - qi**3) * 3 * qi**2 for qi, wi in zip(q, w))
    assert increment_t1(p, s, t) == pytest.approx(ref, rel=1e-6)


@given(st.floats(0.01, 10), st.floats(0.01, 10))
@settings(max_examples=30, deadline=None)
def test_second_time_increment_closed_form(s, t):
    p = ModelParams(1.5, 0.1)
    s, t = min(s, t), max(s, t)
    m0 = float(green_values(p.__class__(1.5, 0.0), 2 * math.cos(p.theta), 0.0))
    expected = m0 * (t - s) ** (1 - 1 / 1.5) / (1 - 1 / 1.5)
    assert increment_t2(p, s, t) == pytest.approx(expected, rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("a", [1.25, 1.5, 2.0])
def test_time_incr_sup_is_the_constant(a):
    r = 1 - np.geomspace(1e-4, 1e-9, 20)
    assert float(np.max(time_incr_g(a, r))) == pytest.approx(2 ** (1 / a) - 1, abs=1e-4)
    res = check_time_incr(a, samples=40)
    assert res.passed
    assert res.constants["sup_g"] <= res.constants["sup_g_bound"] + 1e-9


@given(st.floats(0.5, 3.0), st.floats(0.1, 10), st.floats(-20, 20))
@settings(max_examples=100, deadline=None)
def test_fourier_quadrature_matches_bessel_form(nu, b, z):
    # both sides scale like b^(-2 nu); measure the error on that scale
    assert abs(fourier_lhs(nu, b, z) - fourier_closed_form(nu, b, z)) <= 1e-11 * b ** (-2 * nu)


def test_fourier_cauchy_case():
    assert fourier_lhs(0.5, 1.0, 0.0) == pytest.approx(math.pi, rel=1e-12)
    assert fourier_closed_form(0.5, 1.0, 2.0) == pytest.approx(math.pi * math.exp(-2.0), rel=1e-12)
    assert check_fourier_lower(1.0, samples=20).passed
    with pytest.raises(DomainError):
        check_fourier_lower(0.25)


def test_ga_product_bound_is_equality_at_origin_for_cauchy():
    for t in (0.5, 1.0, 4.0):
        lhs = g_a_kernel(1.0, t, 0.0)
        rhs = math.pi * t * g_a_kernel(1.0, t, 0.0) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-14)


def test_g1_lemma_checks_pass():
    res = check_g1_lemmas(1.5, samples=10, delta=0.1)
    names = [r.name for r in res]
    assert any(n.endswith(".tst") for n in names)
    assert any("J0LowB" in n for n in names)
    assert all(r.passed for r in res)
    assert not any(r.name.endswith(".tst") for r in check_g1_lemmas(2.5, samples=5))


def test_prop_g_heat_case_passes_and_is_deterministic():
    p = ModelParams(2.0)
    first = check_prop_g(p, samples=10, seed=4)
    again = check_prop_g(p, samples=10, seed=4)
    assert [(r.name, r.worst_margin) for r in first] == [(r.name, r.worst_margin) for r in again]
    assert suite_passed(first)
    by_name = {r.name: r for r in first}
    assert by_name["prop_g(a=2,delta=0).i"].constants["C1"] == 0.5


def test_prop_g_proof_constant_fails_with_skew():
    # the proof's time-increment constant assumes a symmetric kernel; with
    # skewness the supremum exceeds it, so this row fails by design
    res = {r.name: r for r in check_prop_g(ModelParams(1.5, 0.1), samples=10)}
    assert not res["prop_g(a=1.5,delta=0.1).ii.proof"].passed
    assert res["prop_g(a=1.5,delta=0.1).i"].passed
    assert res["prop_g(a=1.5,delta=0.1).iii.proof"].passed


def test_suite_passed_ignores_informational_rows():
    ok = CheckResult("a", 3, 0.0, 1e-6, True)
    info = CheckResult("b", 3, -1.0, 1e-6, False, required=False)
    bad = CheckResult("c", 3, -1.0, 1e-6, False)
    assert suite_passed([ok, info])
    assert not suite_passed([ok, bad])
