"""Intermittency and growth-index bounds, plus estimators from simulated moments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import AccuracyError, DomainError
from .kernel_k import gamma_rate, upsilon
from .model import ModelParams
from .moments import InitialMeasure, hat_lambda
from .simulator import EmpiricalMoments
from .specfun import gamma_fn
from .stable_green import lambda_const


@dataclass(frozen=True)
class Infinite:
    """Tagged +infinity for indices that are infinite by theorem, not by overflow."""

    reason: str

    def __float__(self) -> float:
        return math.inf

    def __str__(self) -> str:
        return "inf"


Bound = Union[float, Infinite]


def _even(p):
    if int(p) != p or p < 2 or int(p) % 2:
        raise DomainError(f"p must be an even integer >= 2, got {p!r}")


def intermittency_upper(params: ModelParams, p: int) -> float:
    """(1/2) (16 Lip^2 Lambda Gamma(1 - 1/a))^(a/(a-1)) p^(2 + 1/(a-1))."""
    _even(p)
    a = params.a
    if not 1 < a <= 2:
        raise DomainError(f"intermittency_upper needs a in ]1,2], got {a!r}")
    base = 16 * params.lip_upper**2 * lambda_const(params) * gamma_fn(1 - 1 / a)
    return 0.5 * base ** (a / (a - 1)) * p ** (2 + 1 / (a - 1))


def _check_lower_data(params: ModelParams, mu: Optional[InitialMeasure]):
    if mu is None or params.vip_lower != 0:
        return
    if not mu.nonnegative or mu.is_zero:
        raise DomainError("lower bounds need nonnegative, non-vanishing initial data when v_low = 0")


def intermittency_lower(params: ModelParams, p: float, mu: Optional[InitialMeasure] = None) -> float:
    """(p/2) Upsilon(l_rho)^(1/b)."""
    params.require_strict()
    if not p >= 2:
        raise DomainError("intermittency_lower needs p >= 2")
    _check_lower_data(params, mu)
    if params.lip_lower == 0:
        return 0.0
    return p / 2 * upsilon(params, params.lip_lower) ** (1 / params.b)


def gamma_hat(params: ModelParams, p: int) -> float:
    """a_{p,V}^2 z_p^2 Lip^2 Lambda Gamma(1/a*)."""
    return gamma_rate(params, hat_lambda(params, p))


def e_upper(params: ModelParams, p: int, beta_decay: float) -> float:
    """gamma_hat_p^(a*) / beta."""
    _even(p)
    params.require_solution_regime()
    if not beta_decay > 0:
        raise DomainError("beta_decay must be > 0")
    return gamma_hat(params, p) ** params.a_star / beta_decay


def e_lower(params: ModelParams, mu: Optional[InitialMeasure] = None) -> Bound:
    """Upsilon^(1/b) / 2, or a tagged infinity when v_low != 0 or the data is bounded below."""
    params.require_strict()
    if params.vip_lower != 0:
        return Infinite("v_low != 0")
    if mu is not None and mu.bounded_below:
        return Infinite("initial data bounded below by a positive constant")
    _check_lower_data(params, mu)
    if params.lip_lower == 0:
        return 0.0
    return upsilon(params, params.lip_lower) ** (1 / params.b) / 2


def linear_indices(e_low: Bound) -> Optional[Infinite]:
    """Growth indices of linear type are infinite as soon as e_lower > 0."""
    if isinstance(e_low, Infinite) or e_low > 0:
        return Infinite("exponential-type index e_lower > 0")
    return None


# ---------------------------------------------------------------------------


def min_y_closed_form(x: float, beta: float) -> float:
    """min_y |x - y|^beta + |y| for beta > 1."""
    if not beta > 1:
        raise DomainError("min_y_closed_form needs beta > 1")
    knee = beta ** (1 / (1 - beta))
    ax = abs(x)
    if ax >= knee:
        return beta ** (beta / (1 - beta)) + abs(ax - knee)
    return ax**beta


def min_y_grid(x: float, beta: float, lo: float = -10.0, hi: float = 10.0, step: float = 1e-4) -> float:
    y = np.arange(lo, hi + step / 2, step)
    return float(np.min(np.abs(x - y) ** beta + np.abs(y)))


def validate_min_y(draws: int = 100, seed: int = 0, tol: float = 1e-6) -> float:
    """Worst |closed form - grid search| over random (x, beta); raises past ``tol``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for x, beta in zip(rng.uniform(-5, 5, draws), rng.uniform(1.1, 4.0, draws)):
        worst = max(worst, abs(min_y_closed_form(x, beta) - min_y_grid(x, beta)))
    if worst > tol:
        raise AccuracyError(f"min_y closed form differs from grid search by {worst:.3e}", residual=worst)
    return worst


def _eta_moment_finite(mu: InitialMeasure, eta: float) -> bool:
    d = mu.density
    if d is None:
        return True
    if d.tail == "none":
        return True
    if d.tail == "constant":
        return d.level == 0
    # k |y|^(-eta_tail) (1 + |y|^eta) integrable iff eta_tail - eta > 1
    edge_zero = d.values[0] == 0 and d.values[-1] == 0
    return edge_zero or d.eta - eta > 1


def decay_beta_from_measure(params: ModelParams, mu: InitialMeasure, eta: float, validate: bool = True) -> float:
    """min(eta, 1 + a) for data with a finite eta-moment."""
    if not eta > 0:
        raise DomainError("eta must be > 0")
    if not _eta_moment_finite(mu, eta):
        raise DomainError(f"int |mu|(dy)(1 + |y|^{eta}) diverges for this tail model")
    if validate:
        validate_min_y()
    return min(eta, 1 + params.a)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    alpha: float
    slope: float
    drift: float  # slope over the second half of the late window minus the first half
    accepted: bool
    reason: str = ""


def _late_slope(t: np.ndarray, s: np.ndarray) -> tuple[float, float]:
    keep = t >= 0.5 * (t[0] + t[-1])
    tt, ss = t[keep], s[keep]
    slope = float(np.polyfit(tt, ss, 1)[0]) if tt.size >= 2 else math.nan
    half = tt.size // 2
    if half >= 2 and tt.size - half >= 2:
        drift = float(np.polyfit(tt[half:], ss[half:], 1)[0] - np.polyfit(tt[:half], ss[:half], 1)[0])
    else:
        drift = math.nan
    return slope, drift


def empirical_growth_curve(em: EmpiricalMoments, p: int, alphas: Sequence[float]) -> list[CurvePoint]:
    """Late-time slope of sup_{|x| >= exp(alpha t)} log E|u(t,x)|^p for each alpha."""
    if p not in em.moment_fields:
        raise DomainError(f"p={p} was not simulated")
    grid = em.grid
    vals = em.moment_fields[p].values
    ax = np.abs(grid.x)
    out = []
    for alpha in alphas:
        if not alpha > 0:
            raise DomainError("alphas must be > 0")
        if grid.x_half_width < math.exp(alpha * grid.t_max):
            out.append(CurvePoint(alpha, math.nan, math.nan, False, "window narrower than exp(alpha t_max)"))
            continue
        s = np.empty(grid.nt)
        for i, t in enumerate(grid.t):
            region = vals[i, ax >= math.exp(alpha * t)]
            with np.errstate(divide="ignore"):
                s[i] = np.max(np.log(region)) if region.size else -math.inf
        if not np.all(np.isfinite(s)):
            out.append(CurvePoint(alpha, math.nan, math.nan, False, "zero moments in the region"))
            continue
        slope, drift = _late_slope(grid.t, s)
        out.append(CurvePoint(alpha, slope, drift, True))
    return out


@dataclass(frozen=True)
class GrowthReport:
    p: int
    upper_lyapunov_bound: float
    lower_lyapunov_bound: float
    e_upper_bound: float
    e_lower_bound: Bound
    beta_decay: float
    empirical_curves: list = field(default_factory=list)
    linear_type_indices: Optional[Infinite] = None


def growth_report(params: ModelParams, mu: InitialMeasure, p: int, eta: float,
                  em: Optional[EmpiricalMoments] = None, alphas: Sequence[float] = ()) -> GrowthReport:
    beta = decay_beta_from_measure(params, mu, eta)
    e_lo = e_lower(params, mu)
    curves = empirical_growth_curve(em, p, alphas) if em is not None and alphas else []
    return GrowthReport(
        p=p,
        upper_lyapunov_bound=intermittency_upper(params, p),
        lower_lyapunov_bound=intermittency_lower(params, p, mu),
        e_upper_bound=e_upper(params, p, beta),
        e_lower_bound=e_lo,
        beta_decay=beta,
        empirical_curves=curves,
        linear_type_indices=linear_indices(e_lo),
    )


__all__ = [
    "Infinite",
    "intermittency_upper",
    "intermittency_lower",
    "gamma_hat",
    "e_upper",
    "e_lower",
    "linear_indices",
    "min_y_closed_form",
    "min_y_grid",
    "validate_min_y",
    "decay_beta_from_measure",
    "CurvePoint",
    "empirical_growth_curve",
    "GrowthReport",
    "growth_report",
]
