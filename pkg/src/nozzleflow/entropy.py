"""Entropy pairs of the isentropic system via kernel quadrature.

Every entropy that vanishes at vacuum arises from a scalar generator psi
through the averaging

    eta(rho, m) = rho * int_{-1}^{1} psi(u + rho^theta s) (1 - s^2)^lam ds,
    q(rho, m)   = rho * int_{-1}^{1} (u + theta rho^theta s) psi(...) (1 - s^2)^lam ds,

with u = m/rho, theta = (gamma-1)/2 and lam = (3-gamma)/(2(gamma-1)).
Nodes and weights for the weight (1-s^2)^lam come from the Golub-Welsch
eigenvalue method, which stays accurate for lam in (-1/2, 0) where the
weight blows up at s = +-1 (gamma > 3).  lam = 0 degenerates to plain
Gauss-Legendre.

Generators whose curvature jumps (the shifted half-signed square) are
integrated piecewise with one-sided Jacobi rules split at the jump, so the
node-doubling certification retains spectral accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DomainError, QuadratureError
from .thermo import GasLaw

# ---------------------------------------------------------------------------
# Gauss-Jacobi rules (Golub-Welsch)
# ---------------------------------------------------------------------------


def jacobi_recurrence(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """First n three-term recurrence coefficients for the weight (1-x)^a (1+x)^b."""
    alpha = np.zeros(n)
    beta = np.zeros(n)
    apb = a + b
    alpha[0] = (b - a) / (apb + 2.0)
    beta[0] = (2.0 ** (apb + 1.0) * math.gamma(a + 1.0) * math.gamma(b + 1.0)
               / math.gamma(apb + 2.0))
    if n > 1:
        k = np.arange(1, n, dtype=float)
        alpha[1:] = (b * b - a * a) / ((2.0 * k + apb) * (2.0 * k + apb + 2.0))
        beta[1:] = (4.0 * k * (k + a) * (k + b) * (k + apb)
                    / ((2.0 * k + apb) ** 2 * (2.0 * k + apb + 1.0)
                       * (2.0 * k + apb - 1.0)))
    return alpha, beta


def gauss_jacobi(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1] for the weight (1-x)^a (1+x)^b."""
    if min(a, b) <= -1.0:
        raise DomainError("Jacobi exponents must exceed -1")
    alpha, beta = jacobi_recurrence(n, a, b)
    nodes, vec = eigh_tridiagonal(alpha, np.sqrt(beta[1:]))
    weights = beta[0] * vec[0] ** 2
    return nodes, weights


def weight_moment(lam: float, k: int) -> float:
    """int_{-1}^{1} s^k (1-s^2)^lam ds in closed form (0 for odd k)."""
    if k % 2 == 1:
        return 0.0
    return math.gamma((k + 1) / 2.0) * math.gamma(lam + 1.0) / math.gamma(lam + k / 2.0 + 1.5)


def kernel_total_mass(lam: float) -> float:
    """c_lam = sqrt(pi) Gamma(lam+1) / Gamma(lam+3/2)."""
    return weight_moment(lam, 0)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyGenerator:
    """Scalar generator psi with analytic first and second derivatives.

    ``kinks`` lists the velocity-space locations where psi'' jumps; the
    kernel quadrature splits its integration there.
    """

    name: str
    psi: Callable[[np.ndarray], np.ndarray]
    dpsi: Callable[[np.ndarray], np.ndarray]
    d2psi: Callable[[np.ndarray], np.ndarray]
    convex: bool = False
    kinks: tuple[float, ...] = ()


def gen_one() -> EntropyGenerator:
    return EntropyGenerator(
        "one",
        lambda v: np.ones_like(v),
        lambda v: np.zeros_like(v),
        lambda v: np.zeros_like(v),
        convex=True,
    )


def gen_linear() -> EntropyGenerator:
    return EntropyGenerator(
        "linear",
        lambda v: v,
        lambda v: np.ones_like(v),
        lambda v: np.zeros_like(v),
        convex=True,
    )


def gen_half_square() -> EntropyGenerator:
    """psi = v^2/2; its entropy is the mechanical energy up to the factor c_lam."""
    return EntropyGenerator(
        "half_square",
        lambda v: 0.5 * v * v,
        lambda v: v,
        lambda v: np.ones_like(v),
        convex=True,
    )


def gen_quartic() -> EntropyGenerator:
    return EntropyGenerator(
        "quartic",
        lambda v: v ** 4,
        lambda v: 4.0 * v ** 3,
        lambda v: 12.0 * v * v,
        convex=True,
    )


def gen_half_signed_square(u_minus: float) -> EntropyGenerator:
    """psi(v) = (v - u_minus)|v - u_minus| / 2: the flux-dominating generator.

    Odd about u_minus, hence not convex; its value is that the companion
    flux grows a power faster than the entropy itself.
    """
    return EntropyGenerator(
        f"half_signed_square[{u_minus:g}]",
        lambda v: 0.5 * (v - u_minus) * np.abs(v - u_minus),
        lambda v: np.abs(v - u_minus),
        lambda v: np.sign(v - u_minus),
        convex=False,
        kinks=(float(u_minus),),
    )


def gen_smoothed_abs(center: float = 0.0, width: float = 0.5) -> EntropyGenerator:
    """Smooth convex regularization of |v - center| with linear growth."""
    c, w = float(center), float(width)
    return EntropyGenerator(
        f"smoothed_abs[{c:g},{w:g}]",
        lambda v: np.sqrt((v - c) ** 2 + w * w),
        lambda v: (v - c) / np.sqrt((v - c) ** 2 + w * w),
        lambda v: w * w / ((v - c) ** 2 + w * w) ** 1.5,
        convex=True,
    )


def gen_convex_spline(center: float = 0.0, width: float = 1.0) -> EntropyGenerator:
    """Convex C^3 generator whose curvature (1-t^2)^2 is compactly supported.

    Linear outside [center - width, center + width], so sub-quadratic growth
    holds with room to spare.
    """
    c, w = float(center), float(width)
    slope = 8.0 / 15.0  # psi'(c + w)/w

    def psi(v):
        t = np.clip((v - c) / w, -1.0, 1.0)
        core = w * w * (t * t / 2.0 - t ** 4 / 6.0 + t ** 6 / 30.0)
        outer = np.maximum(np.abs(v - c) - w, 0.0)
        return core + slope * w * outer

    def dpsi(v):
        t = np.clip((v - c) / w, -1.0, 1.0)
        return w * (t - 2.0 * t ** 3 / 3.0 + t ** 5 / 5.0) \
            + slope * w * (np.sign(v - c) * (np.abs(v - c) > w))

    def d2psi(v):
        t = (v - c) / w
        return np.where(np.abs(t) < 1.0, (1.0 - t * t) ** 2, 0.0)

    return EntropyGenerator(
        f"convex_spline[{c:g},{w:g}]", psi, dpsi, d2psi,
        convex=True, kinks=(c - w, c + w),
    )


def gen_bump(center: float = 0.0, width: float = 1.0) -> EntropyGenerator:
    """Compactly supported C-infinity bump exp(-1/(1-t^2)); not convex."""
    c, w = float(center), float(width)

    def _core(v):
        t = (v - c) / w
        inside = np.abs(t) < 1.0
        t = np.where(inside, t, 0.0)
        val = np.where(inside, np.exp(-1.0 / (1.0 - t * t)), 0.0)
        return t, inside, val

    def psi(v):
        return _core(v)[2]

    def dpsi(v):
        t, inside, val = _core(v)
        g = -2.0 * t / (1.0 - t * t) ** 2
        return np.where(inside, val * g / w, 0.0)

    def d2psi(v):
        t, inside, val = _core(v)
        om = 1.0 - t * t
        g = -2.0 * t / om ** 2
        gp = -2.0 / om ** 2 - 8.0 * t * t / om ** 3
        return np.where(inside, val * (g * g + gp) / (w * w), 0.0)

    return EntropyGenerator(f"bump[{c:g},{w:g}]", psi, dpsi, d2psi, convex=False)


def gen_custom(name, psi, dpsi, d2psi, convex=False, kinks=()) -> EntropyGenerator:
    return EntropyGenerator(name, psi, dpsi, d2psi, convex=convex, kinks=tuple(kinks))


GENERATOR_FACTORIES = {
    "one": gen_one,
    "linear": gen_linear,
    "half_square": gen_half_square,
    "quartic": gen_quartic,
    "half_signed_square": gen_half_signed_square,
    "smoothed_abs": gen_smoothed_abs,
    "convex_spline": gen_convex_spline,
    "bump": gen_bump,
}


# ---------------------------------------------------------------------------
# Kernel evaluation
# ---------------------------------------------------------------------------

_EDGE = 1e-10  # kinks this close to s = +-1 are treated as outside


def _flat_states(rho, m):
    """Broadcast (rho, m) to a common shape and flatten; remember the shape."""
    r = np.asarray(rho, dtype=float)
    mm = np.asarray(m, dtype=float)
    shape = np.broadcast_shapes(r.shape, mm.shape)
    rf = np.ascontiguousarray(np.broadcast_to(r, shape), dtype=float).ravel()
    mf = np.ascontiguousarray(np.broadcast_to(mm, shape), dtype=float).ravel()
    return rf, mf, shape


def _shaped(shape, *arrs):
    if shape == ():
        out = tuple(float(a[0]) for a in arrs)
    else:
        out = tuple(a.reshape(shape) for a in arrs)
    return out if len(out) > 1 else out[0]


class EntropyKernel:
    """Quadrature engine for one gas law; rules are cached per node count."""

    def __init__(self, g: GasLaw, n_nodes: int = 64):
        if g.lambda_exp <= -0.5:
            raise DomainError("kernel exponent must exceed -1/2")
        self.g = g
        self.lam = g.lambda_exp
        self.theta = g.theta
        self.n_default = int(n_nodes)
        self._rules: dict[tuple[str, int], tuple[np.ndarray, np.ndarray]] = {}

    def _rule(self, kind: str, n: int) -> tuple[np.ndarray, np.ndarray]:
        key = (kind, n)
        if key not in self._rules:
            lam = self.lam
            ab = {"full": (lam, lam), "left": (0.0, lam),
                  "right": (lam, 0.0), "interior": (0.0, 0.0)}[kind]
            self._rules[key] = gauss_jacobi(n, *ab)
        return self._rules[key]

    # -- piece maps: return (S, W) with all weight factors folded into W ----
    def _piece_full(self, npts: int, n: int):
        s, w = self._rule("full", n)
        return (np.broadcast_to(s, (npts, n)), np.broadcast_to(w, (npts, n)))

    def _piece_left(self, hi: np.ndarray, n: int):
        t, w = self._rule("left", n)
        half = 0.5 * (1.0 + hi)[:, None]
        S = -1.0 + half * (1.0 + t)[None, :]
        W = half ** (self.lam + 1.0) * w[None, :] * (1.0 - S) ** self.lam
        return S, W

    def _piece_right(self, lo: np.ndarray, n: int):
        t, w = self._rule("right", n)
        half = 0.5 * (1.0 - lo)[:, None]
        S = 1.0 - half * (1.0 - t)[None, :]
        W = half ** (self.lam + 1.0) * w[None, :] * (1.0 + S) ** self.lam
        return S, W

    def _piece_interior(self, lo: np.ndarray, hi: np.ndarray, n: int):
        t, w = self._rule("interior", n)
        mid = 0.5 * (lo + hi)[:, None]
        half = 0.5 * (hi - lo)[:, None]
        S = mid + half * t[None, :]
        W = half * w[None, :] * (1.0 - S * S) ** self.lam
        return S, W

    def _accumulate(self, gen, u, rt, pieces, max_order, out, idx):
        for S, W in pieces:
            V = u[:, None] + rt[:, None] * S
            for j in range(max_order + 1):
                PW = (gen.psi, gen.dpsi, gen.d2psi)[j](V) * W
                out[(j, 0)][idx] += PW.sum(axis=1)
                out[(j, 1)][idx] += (PW * S).sum(axis=1)
                out[(j, 2)][idx] += (PW * S * S).sum(axis=1)

    def moments(self, gen: EntropyGenerator, rho_f: np.ndarray, m_f: np.ndarray,
                max_order: int = 0,
                n: Optional[int] = None) -> dict[tuple[int, int], np.ndarray]:
        """M[(j, k)] = int s^k psi^(j)(u + rho^theta s) (1-s^2)^lam ds per state.

        Takes flat state arrays; vacuum states (rho <= floor) contribute zero
        to every moment.
        """
        n = n or self.n_default
        if np.any(rho_f < 0.0):
            raise DomainError("density must be nonnegative")
        out = {(j, k): np.zeros(rho_f.size)
               for j in range(max_order + 1) for k in range(3)}
        pos = rho_f > self.g.rho_floor
        if not pos.any():
            return out
        r = rho_f[pos]
        u = m_f[pos] / r
        rt = r ** self.theta
        kv = np.asarray(gen.kinks, dtype=float)
        pos_idx = np.flatnonzero(pos)
        if kv.size == 0:
            self._accumulate(gen, u, rt, [self._piece_full(r.size, n)],
                             max_order, out, pos_idx)
            return out
        # group states by which kinks land strictly inside (-1, 1)
        S_k = (kv[None, :] - u[:, None]) / rt[:, None]
        inside = (S_k > -1.0 + _EDGE) & (S_k < 1.0 - _EDGE)
        codes = inside.dot(1 << np.arange(kv.size))
        for code in np.unique(codes):
            sel = codes == code
            sub = np.flatnonzero(sel)
            uu, rr = u[sel], rt[sel]
            pattern = inside[sub[0]]
            ks = np.sort(S_k[sel][:, pattern], axis=1)
            n_in = ks.shape[1]
            if n_in == 0:
                pieces = [self._piece_full(uu.size, n)]
            else:
                pieces = [self._piece_left(ks[:, 0], n),
                          self._piece_right(ks[:, -1], n)]
                for j in range(n_in - 1):
                    pieces.append(self._piece_interior(ks[:, j], ks[:, j + 1], n))
            self._accumulate(gen, uu, rr, pieces, max_order, out, pos_idx[sel])
        return out

    # -- assembled quantities -------------------------------------------------
    def pair(self, gen, rho, m, n: Optional[int] = None):
        """(eta, q) for one generator, vectorized over states of any shape."""
        rf, mf, shape = _flat_states(rho, m)
        M = self.moments(gen, rf, mf, 0, n)
        eta = rf * M[(0, 0)]
        q = mf * M[(0, 0)] + self.theta * rf ** (1.0 + self.theta) * M[(0, 1)]
        return _shaped(shape, eta, q)

    def grad(self, gen, rho, m, n: Optional[int] = None):
        """(eta_rho, eta_m) by differentiating under the integral."""
        rf, mf, shape = _flat_states(rho, m)
        M = self.moments(gen, rf, mf, 1, n)
        u = np.where(rf > self.g.rho_floor, mf / np.maximum(rf, 1e-300), 0.0)
        rt = rf ** self.theta
        eta_rho = M[(0, 0)] - u * M[(1, 0)] + self.theta * rt * M[(1, 1)]
        eta_m = M[(1, 0)]
        return _shaped(shape, eta_rho, eta_m)

    def hessian(self, gen, rho, m, n: Optional[int] = None):
        """(eta_rr, eta_rm, eta_mm); states must be away from vacuum."""
        rf, mf, shape = _flat_states(rho, m)
        if np.any(rf <= self.g.rho_floor):
            raise DomainError("entropy Hessian needs rho above the vacuum floor")
        M = self.moments(gen, rf, mf, 2, n)
        u = mf / rf
        rt = rf ** self.theta
        th = self.theta
        eta_mm = M[(2, 0)] / rf
        eta_rm = (th * rt * M[(2, 1)] - u * M[(2, 0)]) / rf
        eta_rr = (th * (1.0 + th) * rf ** (th - 1.0) * M[(1, 1)]
                  + (th * th * rt * rt * M[(2, 2)]
                     - 2.0 * u * th * rt * M[(2, 1)] + u * u * M[(2, 0)]) / rf)
        return _shaped(shape, eta_rr, eta_rm, eta_mm)

    def pair_certified(self, gen, rho, m, rtol: float = 1e-10,
                       max_nodes: int = 4096):
        """(eta, q) with a node-doubling certificate.

        Starts from the default node count, doubles until consecutive rules
        agree to ``rtol`` (relative, with a scale floor so symmetric zeros do
        not trip it), and returns the finer evaluation.
        """
        rf, mf, shape = _flat_states(rho, m)
        u = np.where(rf > self.g.rho_floor, mf / np.maximum(rf, 1e-300), 0.0)
        scale = rf * (1.0 + u * u + rf ** (2.0 * self.theta)) + 1e-300
        n = self.n_default
        eta_c, q_c = self.pair(gen, rf, mf, n)
        while True:
            eta_f, q_f = self.pair(gen, rf, mf, 2 * n)
            tol_eta = rtol * (np.abs(eta_f) + 1e-3 * scale)
            tol_q = rtol * (np.abs(q_f) + 1e-3 * scale)
            if (np.all(np.abs(eta_f - eta_c) <= tol_eta)
                    and np.all(np.abs(q_f - q_c) <= tol_q)):
                return _shaped(shape, eta_f, q_f)
            n *= 2
            if 2 * n > max_nodes:
                raise QuadratureError(
                    f"entropy pair for generator {gen.name!r} failed the "
                    f"node-doubling check at {max_nodes} nodes")
            eta_c, q_c = eta_f, q_f


@lru_cache(maxsize=64)
def get_kernel(g: GasLaw, n_nodes: int = 64) -> EntropyKernel:
    return EntropyKernel(g, n_nodes)


def weak_entropy_pair(g: GasLaw, gen: EntropyGenerator, rho, m,
                      n_nodes: int = 64, certify: bool = True,
                      rtol: float = 1e-10, max_nodes: int = 4096):
    """Kernel entropy pair (eta, q); certified against node doubling by default."""
    kern = get_kernel(g, n_nodes)
    if certify:
        return kern.pair_certified(gen, rho, m, rtol=rtol, max_nodes=max_nodes)
    return kern.pair(gen, rho, m)


# ---------------------------------------------------------------------------
# Mechanical energy and relative energies
# ---------------------------------------------------------------------------


def mechanical_energy(g: GasLaw, rho, m):
    """(eta*, q*) = (m^2/2rho + kappa rho^gamma/(gamma-1), m^3/2rho^2 + ...m rho^(gamma-1))."""
    rf, mf, shape = _flat_states(rho, m)
    if np.any(rf < 0.0):
        raise DomainError("density must be nonnegative")
    pos = rf > g.rho_floor
    rs = np.maximum(rf, 1e-300)
    coeff = g.kappa / (g.gamma - 1.0)
    eta = np.where(pos, 0.5 * mf * mf / rs + coeff * rf ** g.gamma, 0.0)
    q = np.where(pos, 0.5 * mf ** 3 / rs ** 2
                 + g.gamma * coeff * mf * rf ** (g.gamma - 1.0), 0.0)
    return _shaped(shape, eta, q)


def modified_energy_gradient(g: GasLaw, rho, m):
    """Gradient of eta_delta* = m^2/2rho + h_delta(rho) in (rho, m)."""
    r = np.maximum(np.asarray(rho, dtype=float), g.rho_floor)
    ma = np.asarray(m, dtype=float)
    u = ma / r
    return g.h_delta_prime(r) - 0.5 * u * u, u


@dataclass(frozen=True)
class ReferenceState:
    """Smooth monotone interpolation between prescribed far states.

    Constant equal to (rho_minus, u_minus) for x <= -L_halo and to
    (rho_plus, u_plus) for x >= L_halo, with a C^2 monotone blend between.
    """

    rho_minus: float
    u_minus: float
    rho_plus: float
    u_plus: float
    L0: float = 2.0

    def __post_init__(self):
        if self.rho_minus < 0.0 or self.rho_plus < 0.0:
            raise DomainError("reference densities must be nonnegative")
        if not self.L0 > 1.0:
            raise DomainError("blend half-width L0 must exceed 1")

    @classmethod
    def constant(cls, rho_bar: float, u_bar: float = 0.0, L0: float = 2.0):
        return cls(rho_bar, u_bar, rho_bar, u_bar, L0)

    def _blend(self, x):
        t = np.clip((np.asarray(x, dtype=float) + self.L0) / (2.0 * self.L0), 0.0, 1.0)
        return t * t * t * (t * (6.0 * t - 15.0) + 10.0)

    def rho_bar(self, x):
        out = self.rho_minus + (self.rho_plus - self.rho_minus) * self._blend(x)
        return out if np.ndim(x) else float(out)

    def u_bar(self, x):
        out = self.u_minus + (self.u_plus - self.u_minus) * self._blend(x)
        return out if np.ndim(x) else float(out)

    def m_bar(self, x):
        out = np.asarray(self.rho_bar(x)) * np.asarray(self.u_bar(x))
        return out if np.ndim(x) else float(out)


def relative_energy_density(g: GasLaw, ref: ReferenceState, x, rho, m):
    """rho|u - u_bar|^2/2 + h(rho) - h(rho_bar) - h'(rho_bar)(rho - rho_bar) >= 0."""
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0.0):
        raise DomainError("density must be nonnegative")
    ma = np.asarray(m, dtype=float)
    rb = np.asarray(ref.rho_bar(x), dtype=float)
    ub = np.asarray(ref.u_bar(x), dtype=float)
    pos = r > g.rho_floor
    u = np.where(pos, ma / np.maximum(r, 1e-300), 0.0)
    kinetic = np.where(pos, 0.5 * r * (u - ub) ** 2, 0.0)
    out = kinetic + g.h_delta(r) - g.h_delta(rb) - g.h_delta_prime(rb) * (r - rb)
    scalar = not (np.ndim(x) or np.ndim(rho) or np.ndim(m))
    return float(out) if scalar else np.asarray(out)


def quartic_entropy(g: GasLaw, rho, m, n_nodes: int = 64):
    """eta for psi = s^4; controls rho u^4 + rho^(2 gamma - 1)."""
    eta, _ = get_kernel(g, n_nodes).pair(gen_quartic(), rho, m)
    return eta


# ---------------------------------------------------------------------------
# The flux-dominating shifted pair and its inequality battery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpecialPairReport:
    """Numerical survey of the shifted-pair inequalities on a state sample."""

    q_tilde_at_ref: float
    fitted: dict[str, float]
    margins: Optional[dict[str, float]]
    n_points: int


def special_pair_fields(g: GasLaw, ref: ReferenceState, rho, m,
                        n_nodes: int = 256):
    """(eta_check, q_check, eta_tilde, q_tilde) for the shifted generator.

    The pair is built for the pure gamma-law pressure (the quadratic
    stiffener plays no role here); the linearization is taken at the left
    far state (rho_minus, rho_minus * u_minus).
    """
    g0 = GasLaw(g.gamma, g.kappa, 0.0, rho_floor=g.rho_floor)
    kern = get_kernel(g0, n_nodes)
    gen = gen_half_signed_square(ref.u_minus)
    rho_a, m_a, _ = _flat_states(rho, m)
    eta_c, q_c = kern.pair(gen, rho_a, m_a)
    rm = ref.rho_minus
    mm = rm * ref.u_minus
    gr, gm = kern.grad(gen, rm, mm)
    eta_t = eta_c - gr * (rho_a - rm) - gm * (m_a - mm)
    rs = np.maximum(rho_a, g.rho_floor)
    flux_m = np.where(rho_a > g.rho_floor, m_a * m_a / rs, 0.0) + g0.pressure(rho_a)
    q_t = q_c - gr * m_a - gm * flux_m
    return eta_c, q_c, eta_t, q_t


def special_pair_check(g: GasLaw, ref: ReferenceState, rho, m,
                       M: Optional[float] = None,
                       n_nodes: int = 256) -> SpecialPairReport:
    """Fit/verify the growth and domination inequalities of the shifted pair.

    For each inequality the minimal constant that makes it hold on the given
    sample is fitted; if ``M`` is supplied, the worst margin (right side
    minus left side) at that constant is also reported.
    """
    rho_a, m_a, _ = _flat_states(rho, m)
    if np.any(rho_a < 0.0):
        raise DomainError("density must be nonnegative")
    g0 = GasLaw(g.gamma, g.kappa, 0.0, rho_floor=g.rho_floor)
    kern = get_kernel(g0, n_nodes)
    gen = gen_half_signed_square(ref.u_minus)

    eta_c, q_c, eta_t, q_t = special_pair_fields(g, ref, rho_a, m_a, n_nodes)
    etc_r, etc_m = kern.grad(gen, rho_a, m_a)
    rm, um = ref.rho_minus, ref.u_minus
    _, gm_ref = kern.grad(gen, rm, rm * um)
    q_t_ref = float(special_pair_fields(g, ref, rm, rm * um, n_nodes)[3][0])

    th = g.theta
    pos = rho_a > g.rho_floor
    rs = np.maximum(rho_a, 1e-300)
    u = np.where(pos, m_a / rs, 0.0)
    du = np.abs(u - um)
    drt = np.abs(rho_a ** th - rm ** th)
    G1 = rho_a * du ** 2 + rho_a * drt ** 2
    G2p = rho_a * du ** 3 + rho_a ** (g.gamma + th)
    G2n = rho_a + rho_a * du ** 2 + rho_a ** g.gamma
    source = np.where(pos, -q_c + m_a * etc_r + (m_a * m_a / rs) * etc_m, 0.0)
    eta_tm = etc_m - gm_ref

    def _ratio(num, den):
        mask = den > 1e-14 * (1.0 + np.abs(num))
        return float(np.max(num[mask] / den[mask])) if mask.any() else 0.0

    fitted: dict[str, float] = {}
    fitted["eta_tilde_bound"] = _ratio(np.abs(eta_t), G1)
    mask = G2n > 1e-300
    mfit = (-q_t[mask] + np.sqrt(q_t[mask] ** 2 + 4.0 * G2n[mask] * G2p[mask])) \
        / (2.0 * G2n[mask])
    fitted["q_tilde_growth"] = float(np.max(mfit)) if mask.any() else 0.0
    mask = (q_t + 1.0) > 1e-12
    fitted["source_domination"] = _ratio(np.abs(source[mask]), q_t[mask] + 1.0)
    fitted["eta_tilde_m_bound"] = _ratio(np.abs(eta_tm), du + drt)
    fitted["m_eta_tilde_m_bound"] = _ratio(
        np.abs(m_a * eta_tm), rho_a * du ** 2 + rho_a * drt ** 2 + rho_a)

    margins = None
    if M is not None:
        margins = {
            "eta_tilde_bound": float(np.min(M * G1 - np.abs(eta_t))),
            "q_tilde_growth": float(np.min(q_t - G2p / M + M * G2n)),
            "source_domination": float(np.min(M * (q_t + 1.0) - np.abs(source))),
            "eta_tilde_m_bound": float(np.min(M * (du + drt) - np.abs(eta_tm))),
            "m_eta_tilde_m_bound": float(np.min(
                M * (rho_a * du ** 2 + rho_a * drt ** 2 + rho_a)
                - np.abs(m_a * eta_tm))),
        }
    return SpecialPairReport(q_tilde_at_ref=q_t_ref, fitted=fitted,
                             margins=margins, n_points=rho_a.size)
