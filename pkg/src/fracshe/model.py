"""Model constants, space-time grids and fields living on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

SKEW_SLACK = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Order ``a`` and skewness ``delta`` of the stable operator plus noise constants.

    ``lam`` is the coupling used for the kernel series.  The two growth
    conditions on the noise coefficient are ``rho(u)^2 <= lip_upper^2 (vip_upper^2 + u^2)``
    and ``rho(u)^2 >= lip_lower^2 (vip_lower^2 + u^2)``.
    """

    a: float
    delta: float = 0.0
    lam: float = 1.0
    lip_upper: float = 1.0
    vip_upper: float = 0.0
    lip_lower: float = 1.0
    vip_lower: float = 0.0

    def __post_init__(self):
        if not 0 < self.a <= 2:
            raise DomainError(f"order a must lie in ]0,2], got {self.a!r}")
        if abs(self.delta) > 2 - self.a + SKEW_SLACK:
            raise DomainError(f"skewness |delta|={abs(self.delta)!r} exceeds 2-a={2 - self.a!r}")
        if self.lip_upper < 0 or self.lip_lower < 0 or self.vip_upper < 0 or self.vip_lower < 0:
            raise DomainError("growth constants must be non-negative")
        if self.lip_upper < self.lip_lower:
            raise DomainError("lip_upper must dominate lip_lower")

    @property
    def a_star(self) -> float:
        """Dual exponent a/(a-1); infinite at a=1."""
        return math.inf if self.a == 1 else self.a / (self.a - 1)

    @property
    def b(self) -> float:
        return 2.0 - 2.0 / self.a

    @property
    def theta(self) -> float:
        """Rotation angle delta*pi/2 of the symbol."""
        return self.delta * math.pi / 2

    @property
    def strict(self) -> bool:
        """True in the regime 1 < a < 2, |delta| < 2 - a."""
        return 1 < self.a < 2 and abs(self.delta) < 2 - self.a

    def require_solution_regime(self):
        if not 1 < self.a <= 2:
            raise DomainError(f"this quantity needs a in ]1,2], got {self.a!r}")

    def require_strict(self):
        if not self.strict:
            raise DomainError(
                f"this bound needs 1 < a < 2 and |delta| < 2-a, got a={self.a!r}, delta={self.delta!r}"
            )

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class GridSpec:
    t_min: float
    t_max: float
    nt: int
    x_half_width: float
    nx: int
    xi_max: float = 0.0  # 0 lets the Green quadrature pick its own cutoff
    n_xi: int = 16  # Gauss-Legendre nodes per panel

    def __post_init__(self):
        if not self.t_min > 0:
            raise DomainError("grid t_min must be > 0")
        if self.t_max < self.t_min:
            raise DomainError("grid t_max must be >= t_min")
        if self.nt < 1 or (self.nt == 1 and self.t_max != self.t_min):
            raise DomainError("grid nt must be >= 1, and nt == 1 needs t_min == t_max")
        if self.nx < 1 or self.nx % 2 == 0:
            raise DomainError("grid nx must be odd so that x=0 is a node")
        if not self.x_half_width > 0:
            raise DomainError("grid x_half_width must be > 0")
        if self.n_xi < 2:
            raise DomainError("grid n_xi must be >= 2")

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.nt)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.x_half_width, self.x_half_width, self.nx)

    @property
    def dt(self) -> float:
        return 0.0 if self.nt == 1 else (self.t_max - self.t_min) / (self.nt - 1)

    @property
    def dx(self) -> float:
        return 2 * self.x_half_width / (self.nx - 1) if self.nx > 1 else 0.0


@dataclass(frozen=True)
class ScalarField:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.nt, self.grid.nx):
            raise DomainError(f"field shape {v.shape} does not match grid {(self.grid.nt, self.grid.nx)}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def rows(self):
        """Yield (t, x, value) triples in time-major order."""
        for i, t in enumerate(self.grid.t):
            for j, x in enumerate(self.grid.x):
                yield float(t), float(x), float(self.values[i, j])
