"""Cross-sectional area functions A(x) and their admissibility checks.

The solver accepts any strictly positive C^2 area function.  Builtin shapes
cover constant ducts, Gaussian bumps, algebraically closing ends,
exponential horns, and the spherical weight omega_n * x^(n-1).  Arbitrary
profiles come in as two-column tables and are interpolated with a cubic
spline so that A'/A stays smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, DomainError


class ProfileKind(Enum):
    CONSTANT = "constant"
    GAUSSIAN_BUMP = "gaussian_bump"
    POWER_LAW_CLOSING = "power_law_closing"
    EXPONENTIAL = "exponential"
    SPHERICAL = "spherical"
    TABULATED = "tabulated"


def unit_sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n (4*pi for n=3)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def sample_interval(a: float, b: float, n: int) -> np.ndarray:
    """Uniform samples of [a, b] plus geometric refinement toward both ends."""
    base = np.linspace(a, b, n)
    span = b - a
    tails = span * np.geomspace(1e-12, 1e-1, 23)
    pts = np.concatenate([base, a + tails, b - tails])
    return np.unique(np.clip(pts, a, b))


@dataclass(frozen=True)
class ConditionReport:
    """Numerically estimated admissibility data for A(x) on an interval."""

    interval: tuple[float, float]
    sup_dlog: float            # sup |A'/A| over the interval
    l1_dA_left: float          # integral of |A'| over the half-line x < 0 part
    l1_dA_right: float         # integral of |A'| over the half-line x > 0 part
    area_min: float            # A_0
    area_max: float            # A_1
    satisfies_13a: bool        # bounded A'/A with A' integrable on the left half-line
    satisfies_13b: bool        # same with the right half-line
    satisfies_14_15: bool      # two-sided positive bounds and C^2/L^1 control on [a, b]
    n_samples: int


class NozzleProfile:
    """Base class; subclasses provide A, A', A'' and the domain."""

    kind: ProfileKind
    xmin: float = -math.inf
    xmax: float = math.inf

    # -- raw shape callbacks (no domain checks) ----------------------------
    def _area(self, x):
        raise NotImplementedError

    def _d_area(self, x):
        raise NotImplementedError

    def _dd_area(self, x):
        raise NotImplementedError

    # -- public evaluations -------------------------------------------------
    def _check_domain(self, x) -> np.ndarray:
        xa = np.asarray(x, dtype=float)
        bad = (self.xmin > -math.inf and np.any(xa <= self.xmin)) or \
              (self.xmax < math.inf and np.any(xa >= self.xmax))
        if bad:
            raise DomainError(
                f"{self.kind.value} profile evaluated outside its domain "
                f"({self.xmin}, {self.xmax})")
        return xa

    def area(self, x):
        xa = self._check_domain(x)
        out = self._area(xa)
        return out if np.ndim(x) else float(out)

    def d_area(self, x):
        xa = self._check_domain(x)
        out = self._d_area(xa)
        return out if np.ndim(x) else float(out)

    def dd_area(self, x):
        xa = self._check_domain(x)
        out = self._dd_area(xa)
        return out if np.ndim(x) else float(out)

    def dlog(self, x):
        """A'(x)/A(x)."""
        xa = self._check_domain(x)
        out = self._d_area(xa) / self._area(xa)
        return out if np.ndim(x) else float(out)

    def dlog_prime(self, x):
        """(A'/A)'(x) = A''/A - (A'/A)^2."""
        xa = self._check_domain(x)
        a = self._area(xa)
        g = self._d_area(xa) / a
        out = self._dd_area(xa) / a - g * g
        return out if np.ndim(x) else float(out)

    # -- admissibility -------------------------------------------------------
    def _half_line_integrability(self) -> tuple[bool, bool]:
        """Whether |A'/A| is globally bounded with A' in L^1 on each half-line."""
        raise NotImplementedError

    def validate_conditions(self, interval, n_samples: int = 10_000) -> ConditionReport:
        a, b = float(interval[0]), float(interval[1])
        if not (a < b):
            raise DomainError(f"invalid interval [{a}, {b}]")
        if a <= self.xmin or b >= self.xmax:
            raise DomainError(f"interval [{a}, {b}] leaves the profile domain")
        xs = sample_interval(a, b, n_samples)
        area = self._area(xs)
        dA = self._d_area(xs)
        ddA = self._dd_area(xs)
        sup_dlog = float(np.max(np.abs(dA / area)))
        absdA = np.abs(dA)
        left = xs <= 0.0
        l1_left = float(np.trapezoid(absdA[left], xs[left])) if left.sum() > 1 else 0.0
        right = xs >= 0.0
        l1_right = float(np.trapezoid(absdA[right], xs[right])) if right.sum() > 1 else 0.0
        ok_13a, ok_13b = self._half_line_integrability()
        finite = (np.all(np.isfinite(area)) and np.all(np.isfinite(dA))
                  and np.all(np.isfinite(ddA)))
        return ConditionReport(
            interval=(a, b),
            sup_dlog=sup_dlog,
            l1_dA_left=l1_left,
            l1_dA_right=l1_right,
            area_min=float(np.min(area)),
            area_max=float(np.max(area)),
            satisfies_13a=ok_13a,
            satisfies_13b=ok_13b,
            satisfies_14_15=bool(finite and np.min(area) > 0.0),
            n_samples=len(xs),
        )


@dataclass(frozen=True)
class ConstantProfile(NozzleProfile):
    value: float = 1.0
    kind = ProfileKind.CONSTANT

    def __post_init__(self):
        if self.value <= 0:
            raise ConfigError("constant area must be positive")

    def _area(self, x):
        return np.full_like(x, self.value, dtype=float)

    def _d_area(self, x):
        return np.zeros_like(x, dtype=float)

    def _dd_area(self, x):
        return np.zeros_like(x, dtype=float)

    def _half_line_integrability(self):
        return True, True


@dataclass(frozen=True)
class GaussianBumpProfile(NozzleProfile):
    """A(x) = base + amp * exp(-rate * x^2)."""

    base: float = 1.0
    amp: float = 1.0
    rate: float = 1.0
    kind = ProfileKind.GAUSSIAN_BUMP

    def __post_init__(self):
        if self.base <= 0 or self.rate <= 0 or self.base + min(self.amp, 0.0) <= 0:
            raise ConfigError("gaussian bump needs base > 0, rate > 0, base + amp > 0")

    def _area(self, x):
        return self.base + self.amp * np.exp(-self.rate * x * x)

    def _d_area(self, x):
        return -2.0 * self.rate * x * self.amp * np.exp(-self.rate * x * x)

    def _dd_area(self, x):
        e = self.amp * np.exp(-self.rate * x * x)
        return e * (4.0 * self.rate ** 2 * x * x - 2.0 * self.rate)

    def _half_line_integrability(self):
        return True, True


@dataclass(frozen=True)
class PowerLawClosingProfile(NozzleProfile):
    """A(x) = (1 + x^2)^(-alpha): both ends close algebraically."""

    alpha: float = 1.0
    kind = ProfileKind.POWER_LAW_CLOSING

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError("power-law closing needs alpha > 0")

    def _area(self, x):
        return (1.0 + x * x) ** (-self.alpha)

    def _d_area(self, x):
        return -2.0 * self.alpha * x * (1.0 + x * x) ** (-self.alpha - 1.0)

    def _dd_area(self, x):
        # d/dx of -2 a x (1+x^2)^(-a-1)
        return (-2.0 * self.alpha * (1.0 + x * x) ** (-self.alpha - 2.0)
                * (1.0 - (2.0 * self.alpha + 1.0) * x * x))

    def _half_line_integrability(self):
        # |A'/A| = 2 a |x| / (1+x^2) peaks at alpha; A' integrates to A(0) on
        # each half-line.
        return True, True


@dataclass(frozen=True)
class ExponentialProfile(NozzleProfile):
    """A(x) = exp(rate * x): unbounded at one end, closing at the other."""

    rate: float = 1.0
    kind = ProfileKind.EXPONENTIAL

    def _area(self, x):
        return np.exp(self.rate * x)

    def _d_area(self, x):
        return self.rate * np.exp(self.rate * x)

    def _dd_area(self, x):
        return self.rate ** 2 * np.exp(self.rate * x)

    def _half_line_integrability(self):
        if self.rate > 0:
            return True, False
        if self.rate < 0:
            return False, True
        return True, True


@dataclass(frozen=True)
class SphericalProfile(NozzleProfile):
    """A(x) = omega_n x^(n-1) on x > 0; omega_n defaults to the unit-sphere area."""

    n_dim: int = 3
    omega_n: float = 0.0
    kind = ProfileKind.SPHERICAL
    xmin = 0.0

    def __post_init__(self):
        if self.n_dim < 2:
            raise ConfigError("spherical profile needs dimension n >= 2")
        if self.omega_n <= 0.0:
            object.__setattr__(self, "omega_n", unit_sphere_area(self.n_dim))

    def _area(self, x):
        return self.omega_n * x ** (self.n_dim - 1)

    def _d_area(self, x):
        return self.omega_n * (self.n_dim - 1) * x ** (self.n_dim - 2)

    def _dd_area(self, x):
        n = self.n_dim
        return self.omega_n * (n - 1) * (n - 2) * x ** (n - 3)

    def dlog(self, x):
        xa = self._check_domain(x)
        out = (self.n_dim - 1) / xa
        return out if np.ndim(x) else float(out)

    def dlog_prime(self, x):
        xa = self._check_domain(x)
        out = -(self.n_dim - 1) / (xa * xa)
        return out if np.ndim(x) else float(out)

    def _half_line_integrability(self):
        # A'/A = (n-1)/x is unbounded toward the origin.
        return False, False


@dataclass(frozen=True)
class TabulatedProfile(NozzleProfile):
    """Cubic-spline interpolant of (x, A) samples; derivatives come from the spline."""

    x_samples: np.ndarray = field(default_factory=lambda: np.array([]))
    a_samples: np.ndarray = field(default_factory=lambda: np.array([]))
    kind = ProfileKind.TABULATED

    def __post_init__(self):
        xs = np.asarray(self.x_samples, dtype=float)
        As = np.asarray(self.a_samples, dtype=float)
        if xs.ndim != 1 or xs.size < 4 or As.shape != xs.shape:
            raise ConfigError("tabulated profile needs >= 4 matching (x, A) samples")
        if np.any(np.diff(xs) <= 0):
            raise ConfigError("tabulated x samples must be strictly increasing")
        if np.any(As <= 0):
            raise ConfigError("tabulated areas must be strictly positive")
        spline = CubicSpline(xs, As)
        dense = np.linspace(xs[0], xs[-1], 4 * xs.size)
        if np.any(spline(dense) <= 0):
            raise ConfigError("tabulated area interpolant dips below zero")
        object.__setattr__(self, "x_samples", xs)
        object.__setattr__(self, "a_samples", As)
        object.__setattr__(self, "_spline", spline)
        object.__setattr__(self, "xmin", float(xs[0]))
        object.__setattr__(self, "xmax", float(xs[-1]))

    def _check_domain(self, x):
        xa = np.asarray(x, dtype=float)
        if np.any(xa < self.xmin) or np.any(xa > self.xmax):
            raise DomainError(
                f"tabulated profile evaluated outside [{self.xmin}, {self.xmax}]")
        return xa

    def _area(self, x):
        return self._spline(x)

    def _d_area(self, x):
        return self._spline(x, 1)

    def _dd_area(self, x):
        return self._spline(x, 2)

    def _half_line_integrability(self):
        # Only the tabulated window is known; both conditions hold on it.
        return True, True

    @classmethod
    def from_columns(cls, x, a, d_a=None, dd_a=None) -> "TabulatedProfile":
        """Build from sample columns, validating optional derivative columns.

        Supplied A' values must match the centered difference of A at the
        sample spacing to 1e-6 (relative to the derivative scale); they are
        then discarded in favor of the spline derivative, which is what the
        solver needs to be C^2.
        """
        x = np.asarray(x, dtype=float)
        a = np.asarray(a, dtype=float)
        if d_a is not None:
            d_a = np.asarray(d_a, dtype=float)
            fd = (a[2:] - a[:-2]) / (x[2:] - x[:-2])
            scale = max(1.0, float(np.max(np.abs(fd))))
            if np.max(np.abs(d_a[1:-1] - fd)) > 1e-6 * scale:
                raise ConfigError("supplied A' samples disagree with centered "
                                  "differences of A beyond 1e-6")
        if dd_a is not None:
            dd_a = np.asarray(dd_a, dtype=float)
            fd2 = (a[2:] - 2 * a[1:-1] + a[:-2]) / ((0.5 * (x[2:] - x[:-2])) ** 2)
            scale = max(1.0, float(np.max(np.abs(fd2))))
            if np.max(np.abs(dd_a[1:-1] - fd2)) > 1e-4 * scale:
                raise ConfigError("supplied A'' samples disagree with second "
                                  "differences of A")
        return cls(x_samples=x, a_samples=a)

    @classmethod
    def from_file(cls, path) -> "TabulatedProfile":
        """Read a whitespace-delimited (x, A[, A'[, A'']]) table; '#' comments."""
        data = np.loadtxt(path, comments="#", ndmin=2)
        if data.shape[1] < 2:
            raise ConfigError(f"{path}: need at least two columns (x, A)")
        cols = [data[:, i] for i in range(min(data.shape[1], 4))]
        return cls.from_columns(*cols)


_BUILTIN = {
    ProfileKind.CONSTANT: ConstantProfile,
    ProfileKind.GAUSSIAN_BUMP: GaussianBumpProfile,
    ProfileKind.POWER_LAW_CLOSING: PowerLawClosingProfile,
    ProfileKind.EXPONENTIAL: ExponentialProfile,
    ProfileKind.SPHERICAL: SphericalProfile,
}


def make_profile(kind: str, **params) -> NozzleProfile:
    """Construct a profile from its config-file kind name and parameters."""
    try:
        pk = ProfileKind(kind)
    except ValueError:
        raise ConfigError(f"unknown profile kind {kind!r}") from None
    if pk is ProfileKind.TABULATED:
        path = params.get("file")
        if path is None:
            raise ConfigError("tabulated profile needs file=<path>")
        return TabulatedProfile.from_file(path)
    return _BUILTIN[pk](**params)
