"""Polytropic gas law with a quadratic stiffener and derived wave quantities.

The pressure is p(rho) = kappa * rho^gamma + delta * rho^2.  The quadratic
term (delta > 0) keeps the parabolic runs away from vacuum and is sent to
zero together with the viscosity.  With the normalized kappa the integrated
wave variable R(rho) collapses to rho^theta, which several closed-form
checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, QuadratureError

RHO_FLOOR = 1e-12


def default_kappa(gamma: float) -> float:
    """Normalized pressure constant (gamma-1)^2 / (4 gamma)."""
    return (gamma - 1.0) ** 2 / (4.0 * gamma)


def _match(x, out):
    return out if np.ndim(x) else float(out)


@dataclass(frozen=True)
class GasLaw:
    """gamma-law gas with optional quadratic pressure modification.

    kappa defaults to the normalization that makes R(rho) = rho^theta exact
    when delta = 0; override it for physical units at the cost of those
    closed forms.
    """

    gamma: float
    kappa: float = -1.0
    delta: float = 0.0
    rho_floor: float = RHO_FLOOR

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise DomainError(f"gamma must exceed 1, got {self.gamma}")
        if self.kappa < 0.0:
            object.__setattr__(self, "kappa", default_kappa(self.gamma))
        if self.kappa <= 0.0:
            raise DomainError("kappa must be positive")
        if self.delta < 0.0:
            raise DomainError("delta must be nonnegative")

    # -- derived exponents ---------------------------------------------------
    @property
    def theta(self) -> float:
        return (self.gamma - 1.0) / 2.0

    @property
    def lambda_exp(self) -> float:
        """Kernel weight exponent (3 - gamma) / (2 (gamma - 1)); always > -1/2."""
        return (3.0 - self.gamma) / (2.0 * (self.gamma - 1.0))

    # -- pressure family -----------------------------------------------------
    def _rho(self, rho) -> np.ndarray:
        r = np.asarray(rho, dtype=float)
        if np.any(r < 0.0):
            raise DomainError("density must be nonnegative")
        return r

    def pressure(self, rho):
        r = self._rho(rho)
        return _match(rho, self.kappa * r ** self.gamma + self.delta * r * r)

    def pressure_gamma(self, rho):
        """Pure gamma-law part kappa * rho^gamma (no quadratic term)."""
        r = self._rho(rho)
        return _match(rho, self.kappa * r ** self.gamma)

    def pressure_prime(self, rho):
        r = self._rho(rho)
        return _match(rho, self.kappa * self.gamma * r ** (self.gamma - 1.0)
                      + 2.0 * self.delta * r)

    def sound_speed(self, rho):
        r = self._rho(rho)
        return _match(rho, np.sqrt(self.kappa * self.gamma * r ** (self.gamma - 1.0)
                                   + 2.0 * self.delta * r))

    # -- internal energy -----------------------------------------------------
    def h_delta(self, rho):
        """h(rho) = rho * int_0^rho p(s)/s^2 ds = kappa rho^gamma/(gamma-1) + delta rho^2."""
        r = self._rho(rho)
        return _match(rho, self.kappa * r ** self.gamma / (self.gamma - 1.0)
                      + self.delta * r * r)

    def e_delta(self, rho):
        """Specific internal energy h(rho)/rho, extended by 0 at vacuum."""
        r = self._rho(rho)
        return _match(rho, self.kappa * r ** (self.gamma - 1.0) / (self.gamma - 1.0)
                      + self.delta * r)

    def h_delta_prime(self, rho):
        r = self._rho(rho)
        return _match(rho, self.kappa * self.gamma * r ** (self.gamma - 1.0)
                      / (self.gamma - 1.0) + 2.0 * self.delta * r)

    def h_delta_second(self, rho):
        """h''(rho) = p'(rho)/rho = kappa gamma rho^(gamma-2) + 2 delta."""
        r = self._rho(rho)
        return _match(rho, self.kappa * self.gamma * r ** (self.gamma - 2.0)
                      + 2.0 * self.delta)

    # -- wave variable R and invariants ---------------------------------------
    def _r_integrand_log(self, y: float) -> float:
        s = np.exp(y)
        return np.sqrt(self.kappa * self.gamma * s ** (self.gamma - 1.0)
                       + 2.0 * self.delta * s)

    def _riemann_quad(self, rho: float) -> float:
        if rho <= 0.0:
            return 0.0
        # log substitution removes the s -> 0 endpoint; below the cutoff the
        # integrand decays at least like exp(min(theta, 1/2) y)
        hi = np.log(rho)
        lo = hi - 45.0 / min(self.theta, 0.5)
        val, _ = quad(self._r_integrand_log, lo, hi,
                      epsabs=1e-13, epsrel=1e-12, limit=400)
        return val

    @cached_property
    def _riemann_table(self) -> PchipInterpolator:
        """Monotone log-log interpolant of R (delta > 0 runs).

        log R is asymptotically linear in log rho in both power-law regimes,
        so the interpolation error concentrates in the small crossover zone.
        """
        nodes = np.geomspace(1e-9, 1e4, 1536)
        y = np.log(nodes)
        vals = np.empty_like(nodes)
        vals[0] = self._riemann_quad(nodes[0])
        for k in range(1, len(nodes)):
            seg, _ = quad(self._r_integrand_log, y[k - 1], y[k],
                          epsabs=1e-13, epsrel=1e-12, limit=200)
            vals[k] = vals[k - 1] + seg
        table = PchipInterpolator(y, np.log(vals), extrapolate=False)
        probe = np.geomspace(3e-9, 3e3, 13)
        for r in probe:
            exact = self._riemann_quad(r)
            if abs(np.exp(float(table(np.log(r)))) - exact) > 1e-7 * (1.0 + exact):
                raise QuadratureError("wave-variable table failed its tolerance check")
        return table

    def riemann_R(self, rho):
        """R(rho) = int_0^rho sqrt(p'(s))/s ds via adaptive quadrature.

        Closed form rho^theta * sqrt(kappa gamma)/theta when delta = 0;
        otherwise one adaptive quadrature per point (absolute tolerance
        1e-10 class).  Use riemann_R_table for bulk grid evaluation.
        """
        r = self._rho(rho)
        if self.delta == 0.0:
            coeff = np.sqrt(self.kappa * self.gamma) / self.theta
            return _match(rho, coeff * r ** self.theta)
        flat = np.atleast_1d(r).ravel()
        out = np.array([self._riemann_quad(float(s)) for s in flat])
        out = out.reshape(np.shape(r))
        return _match(rho, out)

    def riemann_R_table(self, rho):
        """Vectorized R via the cached monotone table (1e-7 relative class)."""
        r = self._rho(rho)
        if self.delta == 0.0:
            return self.riemann_R(rho)
        table = self._riemann_table
        flat = np.atleast_1d(np.asarray(r, dtype=float))
        lo, hi = 1e-9, 1e4
        clipped = np.clip(flat, lo, hi)
        out = np.exp(np.asarray(table(np.log(clipped)), dtype=float))
        small = flat < lo
        out[small] *= 0.0  # R(rho < 1e-9) is below the table resolution anyway
        big = flat > hi
        if np.any(big):
            out[big] = [self._riemann_quad(float(s)) for s in flat[big]]
        out = out.reshape(np.shape(r))
        return _match(rho, out)

    def riemann_invariants(self, rho, u):
        """w = u + R(rho), z = u - R(rho); requires rho > 0."""
        r = self._rho(rho)
        if np.any(r <= 0.0):
            raise DomainError("Riemann invariants need strictly positive density")
        R = self.riemann_R_table(r) if self.delta > 0.0 else self.riemann_R(r)
        ua = np.asarray(u, dtype=float)
        w = ua + R
        z = ua - R
        if np.ndim(rho) or np.ndim(u):
            return w, z
        return float(w), float(z)

    def velocity(self, rho, m):
        """u = m / rho with the vacuum guard: u = 0 wherever rho <= rho_floor."""
        r = np.asarray(rho, dtype=float)
        ma = np.asarray(m, dtype=float)
        out = np.where(r > self.rho_floor, ma / np.maximum(r, self.rho_floor), 0.0)
        return out if (np.ndim(rho) or np.ndim(m)) else float(out)
