import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracshe.errors import DomainError
from fracshe.growth import (
    Infinite,
    decay_beta_from_measure,
    e_lower,
    e_upper,
    empirical_growth_curve,
    gamma_hat,
    growth_report,
    intermittency_lower,
    intermittency_upper,
    linear_indices,
    min_y_closed_form,
    min_y_grid,
    validate_min_y,
)
from fracshe.model import GridSpec, ModelParams, ScalarField
from fracshe.moments import InitialMeasure
from fracshe.simulator import EmpiricalMoments

strict_params = st.tuples(st.floats(1.2, 1.95), st.floats(0.0, 0.9), st.floats(0.2, 2.0)).map(
    lambda v: ModelParams(v[0], v[1] * (2 - v[0]), lip_upper=v[2], lip_lower=v[2])
)


def test_upper_lyapunov_heat_value():
    # Lambda Gamma(1/2) = 1/2 at a = 2, so the base is 8 and the bound 8^2/2 * p^3
    assert intermittency_upper(ModelParams(2.0), 2) == pytest.approx(256.0, rel=1e-12)
    assert intermittency_upper(ModelParams(2.0), 4) == pytest.approx(32 * 64, rel=1e-12)


@given(strict_params, st.integers(1, 6), st.floats(1.5, 4))
@settings(max_examples=60, deadline=None)
def test_lower_lyapunov_is_linear_in_p(params, k, q):
    p = 2 * k
    assert intermittency_lower(params, q * p) == pytest.approx(q * intermittency_lower(params, p), rel=1e-12)


@given(strict_params, st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_lower_bounds_never_exceed_upper_bounds(params, k):
    p = 2 * k
    assert intermittency_lower(params, p) <= intermittency_upper(params, p)
    assert float(e_lower(params)) <= e_upper(params, p, 1 + params.a)


def test_upper_exponent_grows_faster_than_p_squared():
    params = ModelParams(1.5)
    r = intermittency_upper(params, 8) / intermittency_upper(params, 4)
    assert r == pytest.approx(2 ** (2 + 1 / 0.5), rel=1e-12)


def test_e_upper_formula():
    params = ModelParams(1.5, 0.1, lip_upper=0.7, lip_lower=0.5)
    assert e_upper(params, 2, 2.5) == pytest.approx(gamma_hat(params, 2) ** 3 / 2.5, rel=1e-12)
    with pytest.raises(DomainError):
        e_upper(params, 2, 0.0)
    with pytest.raises(DomainError):
        e_upper(params, 3, 1.0)


def test_infinite_sentinels():
    params = ModelParams(1.5, 0.1, vip_lower=0.5)
    e = e_lower(params)
    assert isinstance(e, Infinite) and float(e) == math.inf and str(e) == "inf"
    assert isinstance(e_lower(ModelParams(1.5, 0.1), InitialMeasure.lebesgue()), Infinite)
    assert isinstance(linear_indices(e_lower(ModelParams(1.5, 0.1))), Infinite)
    assert linear_indices(0.0) is None


def test_lower_bounds_need_strict_regime_and_positive_data():
    with pytest.raises(DomainError):
        intermittency_lower(ModelParams(2.0), 2)
    with pytest.raises(DomainError):
        e_lower(ModelParams(1.5, 0.1), InitialMeasure.dirac(mass=-1.0))
    with pytest.raises(DomainError):
        intermittency_lower(ModelParams(1.5, 0.1), 1.0)
    assert intermittency_lower(ModelParams(1.5, 0.1, lip_lower=0.0), 2) == 0.0


def test_min_y_examples():
    assert min_y_closed_form(1.0, 2.0) == pytest.approx(0.75, rel=1e-14)
    assert min_y_closed_form(0.2, 2.0) == pytest.approx(0.04, rel=1e-14)
    with pytest.raises(DomainError):
        min_y_closed_form(1.0, 1.0)


@given(st.floats(-5, 5), st.floats(1.1, 4.0))
@settings(max_examples=60, deadline=None)
def test_min_y_closed_form_matches_grid_search(x, beta):
    assert abs(min_y_closed_form(x, beta) - min_y_grid(x, beta)) < 1e-6


def test_min_y_validation_passes():
    assert validate_min_y(draws=50, seed=3) < 1e-6


def test_decay_rate_from_data():
    params = ModelParams(1.5, 0.1)
    assert decay_beta_from_measure(params, InitialMeasure.dirac(), 3.0, validate=False) == 2.5
    assert decay_beta_from_measure(params, InitialMeasure.dirac(), 2.0, validate=False) == 2.0
    with pytest.raises(DomainError):
        decay_beta_from_measure(params, InitialMeasure.lebesgue(), 1.0, validate=False)
    heavy = InitialMeasure.from_density(lambda y: 1 / (1 + y * y), -5, 5, 101, tail="power", eta=2.0)
    with pytest.raises(DomainError):
        decay_beta_from_measure(params, heavy, 1.5, validate=False)
    assert decay_beta_from_measure(params, heavy, 0.5, validate=False) == 0.5


def test_growth_report_collects_bounds():
    params = ModelParams(1.5, 0.1)
    rep = growth_report(params, InitialMeasure.dirac(), 2, 3.0)
    assert rep.beta_decay == 2.5
    assert rep.upper_lyapunov_bound == intermittency_upper(params, 2)
    assert rep.e_lower_bound == e_lower(params)
    assert isinstance(rep.linear_type_indices, Infinite)
    assert rep.empirical_curves == []


def _field_em(grid, vals):
    return EmpiricalMoments((2,), {2: ScalarField(grid, vals)}, {2: ScalarField(grid, np.zeros_like(vals))}, 10, 0)


def test_growth_curve_on_synthetic_field():
    # log E = c t - log(1 + x^2): the sup over |x| >= e^(alpha t) is c t - log(1 + e^(2 alpha t))
    grid = GridSpec(1.0, 4.0, 31, 60.0, 12001)
    c = 3.0
    vals = np.exp(c * grid.t)[:, None] / (1 + grid.x[None, :] ** 2)
    curve = empirical_growth_curve(_field_em(grid, vals), 2, [0.5, 0.8, 2.0])
    late = grid.t >= 0.5 * (grid.t_min + grid.t_max)
    for pt in curve[:2]:
        exact = c * grid.t[late] - np.log1p(np.exp(2 * pt.alpha * grid.t[late]))
        assert pt.accepted
        assert pt.slope == pytest.approx(np.polyfit(grid.t[late], exact, 1)[0], abs=0.01)
        assert abs(pt.drift) < 0.05
    assert not curve[2].accepted
    with pytest.raises(DomainError):
        empirical_growth_curve(_field_em(grid, vals), 4, [0.5])
