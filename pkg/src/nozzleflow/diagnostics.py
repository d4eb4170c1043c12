"""Monitored functionals and inequality residuals for solver runs.

Everything here is computed from field snapshots: the relative-energy
budget and its viscous dissipation, the corrected invariant extremes whose
monotonicity is the testable form of the parabolic maximum principle, the
windowed higher-integrability integrals, the vacuum functional, and the
weak-form residuals of the limit system (mass/momentum forms and the
entropy inequality for convex generators).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .entropy import (EntropyGenerator, ReferenceState, gen_convex_spline,
                      gen_half_square, gen_smoothed_abs, get_kernel,
                      modified_energy_gradient, quartic_entropy,
                      relative_energy_density)
from .errors import CavitationError, ConfigError
from .geometry import NozzleProfile, ProfileKind
from .solver import FluidField
from .thermo import GasLaw

# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------


@dataclass
class SnapshotSet:
    """Fields sampled on a fixed grid at a set of times."""

    t: np.ndarray          # (nt,)
    x: np.ndarray          # (nx,)
    rho: np.ndarray        # (nt, nx)
    m: np.ndarray          # (nt, nx)
    meta: dict = dc_field(default_factory=dict)

    def window(self, lo: float, hi: float) -> "SnapshotSet":
        mask = (self.x >= lo - 1e-12) & (self.x <= hi + 1e-12)
        if mask.sum() < 2:
            raise ConfigError(f"window [{lo}, {hi}] holds fewer than 2 nodes")
        return SnapshotSet(self.t.copy(), self.x[mask], self.rho[:, mask],
                           self.m[:, mask], dict(self.meta))

    def interp_x(self, xq: np.ndarray) -> "SnapshotSet":
        xq = np.asarray(xq, dtype=float)
        rho = np.vstack([np.interp(xq, self.x, r) for r in self.rho])
        m = np.vstack([np.interp(xq, self.x, v) for v in self.m])
        return SnapshotSet(self.t.copy(), xq, rho, m, dict(self.meta))


# ---------------------------------------------------------------------------
# Report container
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticsReport:
    """Time series of the monitored quantities plus the check verdicts."""

    t: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    energy: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    dissipation: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    diss_rate_hessian: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    diss_rate_geometric: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    llf_rate: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    llf_cumulative: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    max_w: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    min_z: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    correction: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    vacuum_phi: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    min_rho: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    quartic: np.ndarray = dc_field(default_factory=lambda: np.array([]))
    undershoots: int = 0
    checks: dict = dc_field(default_factory=dict)
    notes: list = dc_field(default_factory=list)
    snapshots: Optional[SnapshotSet] = None
    label: str = ""

    @classmethod
    def empty(cls) -> "DiagnosticsReport":
        return cls()

    @property
    def corrected_max_w(self) -> np.ndarray:
        return self.max_w - self.correction

    @property
    def corrected_min_z(self) -> np.ndarray:
        return self.min_z + self.correction

    def all_checks_pass(self) -> bool:
        return all(bool(v) for v in self.checks.values())

    def merge(self, other: "DiagnosticsReport") -> "DiagnosticsReport":
        """Associative aggregation of reports from independent runs."""
        out = DiagnosticsReport.empty()
        out.label = f"{self.label}+{other.label}"
        out.undershoots = self.undershoots + other.undershoots
        out.notes = self.notes + other.notes
        keys = set(self.checks) | set(other.checks)
        out.checks = {k: self.checks.get(k, True) and other.checks.get(k, True)
                      for k in keys}
        return out

    def to_csv(self, path) -> None:
        series = [
            ("t", self.t), ("E", self.energy), ("D", self.dissipation),
            ("diss_rate_hessian", self.diss_rate_hessian),
            ("diss_rate_geometric", self.diss_rate_geometric),
            ("llf_rate", self.llf_rate), ("llf_cumulative", self.llf_cumulative),
            ("max_w", self.max_w), ("min_z", self.min_z),
            ("correction", self.correction),
            ("vacuum_phi", self.vacuum_phi), ("min_rho", self.min_rho),
            ("quartic", self.quartic),
        ]
        present = [(name, arr) for name, arr in series if len(arr)]
        with open(path, "w", newline="") as fh:
            fh.write(f"# diagnostics report label={self.label}\n")
            fh.write(f"# undershoots={self.undershoots}\n")
            for key, val in sorted(self.checks.items()):
                fh.write(f"# check {key} = {'pass' if val else 'FAIL'}\n")
            for note in self.notes:
                fh.write(f"# note: {note}\n")
            writer = csv.writer(fh)
            writer.writerow([name for name, _ in present])
            for row in zip(*[arr for _, arr in present]):
                writer.writerow([f"{v:.12g}" for v in row])


# ---------------------------------------------------------------------------
# Pointwise budgets
# ---------------------------------------------------------------------------


def _trap_weights(x: np.ndarray) -> np.ndarray:
    w = np.full_like(x, x[1] - x[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def energy_budget(field: FluidField, g: GasLaw, profile: NozzleProfile,
                  ref: ReferenceState, eps: float,
                  gronwall_M: Optional[float] = None,
                  E0: Optional[float] = None, D_accumulated: float = 0.0,
                  sharp: bool = False, tol: float = 1e-3) -> tuple[float, dict]:
    """Relative energy E and the instantaneous dissipation-rate components.

    E integrates the relative energy density against A(x) dx (trapezoid).
    The dissipation rate integrates eps*(h''(rho) rho_x^2 + rho u_x^2 + geo)
    with centered differences; the geometric piece is (n-1) rho u^2 / x^2 in
    the spherical geometry and |(A'/A)' rho u (u - u_bar)| otherwise.

    With ``gronwall_M`` (and the run's E0 plus the dissipation accumulated so
    far) the components also carry the bound verdict E + D <= M (E0 + 1), or
    the sharp form E + D <= E0 (1 + tol) when ``sharp`` is set.
    """
    x = field.grid.x
    w = _trap_weights(x)
    A = profile.area(x)
    dens = relative_energy_density(g, ref, x, field.rho, field.m)
    E = float(np.sum(dens * A * w))

    u = field.velocity(g)
    dx = field.grid.dx
    rho_x = np.gradient(field.rho, dx)
    u_x = np.gradient(u, dx)
    hess = g.h_delta_second(np.maximum(field.rho, g.rho_floor)) * rho_x ** 2 \
        + field.rho * u_x ** 2
    if profile.kind is ProfileKind.SPHERICAL:
        geo = (profile.n_dim - 1) * field.rho * u * u / (x * x)
    else:
        ub = ref.u_bar(x)
        geo = np.abs(profile.dlog_prime(x) * field.rho * u * (u - ub))
    rate_h = eps * float(np.sum(hess * A * w))
    rate_g = eps * float(np.sum(geo * A * w))
    comp = {"rate_hessian": rate_h, "rate_geometric": rate_g,
            "rate_total": rate_h + rate_g}
    if gronwall_M is not None or sharp:
        base = E if E0 is None else E0
        bound = base * (1.0 + tol) + 1e-14 if sharp \
            else float(gronwall_M) * (base + 1.0)
        comp["energy_bound"] = bound
        comp["gronwall_ok"] = bool(E + D_accumulated <= bound)
    return E, comp


def llf_dissipation_rate(field: FluidField, g: GasLaw, profile: NozzleProfile,
                         eps: float, bc, ref: ReferenceState,
                         limiter_theta: float = 1.5) -> float:
    """Energy drain of the interface dissipation (scheme-internal estimate).

    Sums alpha/2 * A * (jump of grad eta_bar) . (jump of state) over the
    interfaces; nonnegative by convexity.  Heuristic in the sense that it
    describes the scheme, not the equations.
    """
    from .solver import hyperbolic_interface_data, make_context

    ctx = make_context(field.grid, g, profile, eps, bc)
    data = hyperbolic_interface_data(ctx, field.rho, field.m, field.t,
                                     limiter_theta)
    gl_r, gl_m = modified_energy_gradient(g, data["rho_L"], data["m_L"])
    gr_r, gr_m = modified_energy_gradient(g, data["rho_R"], data["m_R"])
    # reference part of grad eta_bar cancels in the jump
    jump = ((gr_r - gl_r) * (data["rho_R"] - data["rho_L"])
            + (gr_m - gl_m) * (data["m_R"] - data["m_L"]))
    return float(np.sum(0.5 * data["alpha"] * ctx.Ah_full * jump))


@dataclass
class RiemannHistory:
    """Running record for the corrected invariant extremes."""

    t: list = dc_field(default_factory=list)
    max_w: list = dc_field(default_factory=list)
    min_z: list = dc_field(default_factory=list)
    integrand: list = dc_field(default_factory=list)
    correction: list = dc_field(default_factory=list)

    def corrected_max_w(self) -> np.ndarray:
        """max_x w minus the accumulated correction: the monotone claimant."""
        return np.array(self.max_w) - np.array(self.correction)

    def corrected_min_z(self) -> np.ndarray:
        return np.array(self.min_z) + np.array(self.correction)


def riemann_monitor(field: FluidField, g: GasLaw, profile: NozzleProfile,
                    eps: float, history: Optional[RiemannHistory] = None
                    ) -> RiemannHistory:
    """Append (max w, min z, correction integral) for the current field.

    The correction accumulates the sup-norm of u sqrt(p') A'/A - eps (A'/A)' u
    in time; subtracting it from max w is what should be non-increasing.
    """
    if history is None:
        history = RiemannHistory()
    if np.min(field.rho) < g.rho_floor:
        raise CavitationError("invariants undefined: density at the vacuum floor")
    x = field.grid.x
    u = field.m / field.rho
    w, z = g.riemann_invariants(field.rho, u)
    c = g.sound_speed(field.rho)
    integrand = float(np.max(np.abs(
        u * c * profile.dlog(x) - eps * profile.dlog_prime(x) * u)))
    if history.t:
        dt = field.t - history.t[-1]
        corr = history.correction[-1] \
            + 0.5 * dt * (history.integrand[-1] + integrand)
    else:
        corr = 0.0
    history.t.append(field.t)
    history.max_w.append(float(np.max(w)))
    history.min_z.append(float(np.min(z)))
    history.integrand.append(integrand)
    history.correction.append(corr)
    return history


def vacuum_functional(field: FluidField, rho_tilde: float) -> float:
    """Trapezoid integral of 1/rho - 1/rho_t + (rho - rho_t)/rho_t^2 on {rho < rho_t}."""
    if rho_tilde <= 0.0:
        raise ConfigError("rho_tilde must be positive")
    r = np.maximum(field.rho, 1e-300)
    phi = np.where(field.rho < rho_tilde,
                   1.0 / r - 1.0 / rho_tilde + (field.rho - rho_tilde) / rho_tilde ** 2,
                   0.0)
    return float(np.trapezoid(phi, field.grid.x))


# ---------------------------------------------------------------------------
# Windowed integrability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegrabilityRecord:
    window: tuple[float, float]
    t_span: tuple[float, float]
    rho_gamma_plus_one: float      # integral of rho^(gamma+1)
    delta_rho_cubed: float         # integral of delta rho^3
    rho_u_cubed: float             # integral of rho |u|^3
    rho_gamma_theta: float         # integral of rho^(gamma+theta)
    eps_rho_cubed_area: float      # eps * integral of rho^3 A (if available)

    @property
    def density_total(self) -> float:
        return self.rho_gamma_plus_one + self.delta_rho_cubed

    @property
    def velocity_total(self) -> float:
        return self.rho_u_cubed + self.rho_gamma_theta


def _spacetime_integral(history: SnapshotSet, values: np.ndarray,
                        tmask: np.ndarray, xmask: np.ndarray) -> float:
    tt = history.t[tmask]
    xx = history.x[xmask]
    per_t = np.trapezoid(values[np.ix_(tmask, xmask)], xx, axis=1)
    return float(np.trapezoid(per_t, tt))


def integrability_window(history: SnapshotSet, g: GasLaw, K, t_span=None,
                         profile: Optional[NozzleProfile] = None,
                         eps: Optional[float] = None) -> IntegrabilityRecord:
    """Space-time integrals of the higher-integrability densities over K."""
    lo, hi = float(K[0]), float(K[1])
    if not (history.x[0] - 1e-12 < lo < hi < history.x[-1] + 1e-12):
        raise ConfigError(f"window [{lo}, {hi}] is not inside the stored grid")
    if t_span is None:
        t_span = (float(history.t[0]), float(history.t[-1]))
    t1, t2 = map(float, t_span)
    tmask = (history.t >= t1 - 1e-12) & (history.t <= t2 + 1e-12)
    xmask = (history.x >= lo - 1e-12) & (history.x <= hi + 1e-12)
    if tmask.sum() < 2 or xmask.sum() < 2:
        raise ConfigError("integrability window needs at least 2 samples per axis")
    rho = history.rho
    u = g.velocity(rho, history.m)
    rec = {}
    rec["rho_gamma_plus_one"] = _spacetime_integral(
        history, rho ** (g.gamma + 1.0), tmask, xmask)
    rec["delta_rho_cubed"] = _spacetime_integral(
        history, g.delta * rho ** 3, tmask, xmask)
    rec["rho_u_cubed"] = _spacetime_integral(
        history, rho * np.abs(u) ** 3, tmask, xmask)
    rec["rho_gamma_theta"] = _spacetime_integral(
        history, rho ** (g.gamma + g.theta), tmask, xmask)
    if profile is not None and eps is not None:
        A = np.asarray(profile.area(history.x), dtype=float)
        rec["eps_rho_cubed_area"] = eps * _spacetime_integral(
            history, rho ** 3 * A[None, :], tmask, xmask)
    else:
        rec["eps_rho_cubed_area"] = float("nan")
    return IntegrabilityRecord(window=(lo, hi), t_span=(t1, t2), **rec)


# ---------------------------------------------------------------------------
# Weak-form residuals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpaceTimeBump:
    """Tensor-product C-infinity bump used as a test function."""

    t0: float
    rt: float
    x0: float
    rx: float

    @staticmethod
    def _b(s):
        inside = np.abs(s) < 1.0
        ss = np.where(inside, s, 0.0)
        return np.where(inside, np.exp(-1.0 / (1.0 - ss * ss)), 0.0)

    @staticmethod
    def _db(s):
        inside = np.abs(s) < 1.0
        ss = np.where(inside, s, 0.0)
        val = np.where(inside, np.exp(-1.0 / (1.0 - ss * ss)), 0.0)
        return val * (-2.0 * ss / np.maximum((1.0 - ss * ss) ** 2, 1e-300))

    def phi(self, t, x):
        return self._b((t - self.t0) / self.rt)[:, None] \
            * self._b((x - self.x0) / self.rx)[None, :]

    def phi_t(self, t, x):
        return (self._db((t - self.t0) / self.rt) / self.rt)[:, None] \
            * self._b((x - self.x0) / self.rx)[None, :]

    def phi_x(self, t, x):
        return self._b((t - self.t0) / self.rt)[:, None] \
            * (self._db((x - self.x0) / self.rx) / self.rx)[None, :]


def default_test_functions(t1: float, t2: float, K, nt: int = 4, nx: int = 8,
                           fill: float = 3.5) -> list[SpaceTimeBump]:
    """nt x nx lattice of bumps supported strictly inside (t1, t2) x K.

    ``fill`` widens each bump relative to the lattice spacing (overlap is
    fine and keeps the supports well resolved by the snapshot cadence).
    """
    lo, hi = float(K[0]), float(K[1])
    tc = t1 + (np.arange(nt) + 0.5) * (t2 - t1) / nt
    xc = lo + (np.arange(nx) + 0.5) * (hi - lo) / nx
    rt = min(fill * (t2 - t1) / (2 * nt), 0.499 * (t2 - t1))
    rx = min(fill * (hi - lo) / (2 * nx), 0.499 * (hi - lo))
    out = []
    for t0 in tc:
        rt0 = min(rt, (t0 - t1) * 0.999, (t2 - t0) * 0.999)
        for x0 in xc:
            rx0 = min(rx, (x0 - lo) * 0.999, (hi - x0) * 0.999)
            out.append(SpaceTimeBump(float(t0), float(rt0), float(x0), float(rx0)))
    return out


def default_generator_family(u_centers: Sequence[float] = (-1.0, 0.0, 1.0),
                             width: float = 0.5) -> list[EntropyGenerator]:
    """Convex generators with sub-quadratic growth for the entropy inequality."""
    gens = [gen_half_square()]
    gens += [gen_smoothed_abs(c, width) for c in u_centers]
    gens.append(gen_convex_spline(0.0, 1.0))
    return gens


@dataclass
class WeakResidualRecord:
    test_functions: list
    generators: list
    mass: np.ndarray                # (n_phi,)
    momentum: np.ndarray            # (n_phi,)
    entropy: np.ndarray             # (n_gen, n_phi)
    norms: np.ndarray               # (n_phi,) W^{1,1} norms of the tests

    @property
    def mass_normalized(self) -> np.ndarray:
        return self.mass / self.norms

    @property
    def momentum_normalized(self) -> np.ndarray:
        return self.momentum / self.norms

    @property
    def entropy_normalized(self) -> np.ndarray:
        return self.entropy / self.norms[None, :]

    @property
    def max_entropy_violation(self) -> float:
        """Largest positive normalized entropy-inequality residual."""
        return float(np.max(np.maximum(self.entropy_normalized, 0.0)))


def weak_residual(history: SnapshotSet, g: GasLaw, profile: NozzleProfile,
                  test_set: Sequence[SpaceTimeBump],
                  gen_set: Sequence[EntropyGenerator],
                  n_nodes: int = 64) -> WeakResidualRecord:
    """Residuals of the limit-system weak forms over stored snapshots.

    Mass:      int (rho phi_t + m phi_x) A
    Momentum:  int (m phi_t + (m^2/rho + p) phi_x + p (A'/A) phi) A
    Entropy:   int (-eta A phi_t - q A phi_x + A'(m eta_rho + (m^2/rho) eta_m - q) phi)
               which must be <= 0 for convex generators as the viscosity
               vanishes.  The gamma-law pressure (no quadratic term) is used:
               these are the target system's forms, not the regularized one's.
    """
    for gen in gen_set:
        if not gen.convex:
            raise ConfigError(f"generator {gen.name!r} is not convex")
    t, x = history.t, history.x
    if len(t) < 4:
        raise ConfigError("need at least 4 snapshot times for weak residuals")
    rho, m = history.rho, history.m
    A = np.asarray(profile.area(x), dtype=float)[None, :]
    dA = np.asarray(profile.d_area(x), dtype=float)[None, :]
    pos = rho > g.rho_floor
    u = np.where(pos, m / np.maximum(rho, g.rho_floor), 0.0)
    p = g.pressure_gamma(rho)
    mom_flux = m * u + p

    kern = get_kernel(g, n_nodes)
    fields = []
    for gen in gen_set:
        eta, q = kern.pair(gen, rho, m)
        eta_r, eta_m = kern.grad(gen, rho, m)
        fields.append((eta, q, eta_r, eta_m))

    def _integrate(vals):
        per_t = np.trapezoid(vals, x, axis=1)
        return float(np.trapezoid(per_t, t))

    n_phi = len(test_set)
    mass = np.zeros(n_phi)
    momentum = np.zeros(n_phi)
    entropy = np.zeros((len(gen_set), n_phi))
    norms = np.zeros(n_phi)
    for j, tf in enumerate(test_set):
        if not (t[0] <= tf.t0 - tf.rt and tf.t0 + tf.rt <= t[-1]
                and x[0] <= tf.x0 - tf.rx and tf.x0 + tf.rx <= x[-1]):
            raise ConfigError("test function support leaves the snapshot window")
        phi = tf.phi(t, x)
        phi_t = tf.phi_t(t, x)
        phi_x = tf.phi_x(t, x)
        norms[j] = _integrate((np.abs(phi) + np.abs(phi_t) + np.abs(phi_x)) * A)
        mass[j] = _integrate((rho * phi_t + m * phi_x) * A)
        momentum[j] = _integrate((m * phi_t + mom_flux * phi_x) * A
                                 + p * dA * phi)
        for i, (eta, q, eta_r, eta_m) in enumerate(fields):
            src = dA * (m * eta_r + m * u * eta_m - q)
            entropy[i, j] = _integrate(-eta * A * phi_t - q * A * phi_x + src * phi)
    return WeakResidualRecord(list(test_set), list(gen_set), mass, momentum,
                              entropy, norms)


# ---------------------------------------------------------------------------
# Recorder driving a run
# ---------------------------------------------------------------------------


@dataclass
class RecorderOptions:
    sample_count: int = 32
    collect_snapshots: bool = True
    snapshot_window: Optional[tuple[float, float]] = None
    energy: bool = True
    riemann: bool = True
    vacuum: bool = True
    llf: bool = True
    quartic: bool = False
    gronwall_M: float = 10.0
    sharp_energy: bool = False     # spherical Dirichlet form E + D <= E0 (1 + tol)
    energy_tol: float = 1e-3
    riemann_tol: float = 1e-3      # slack per unit time, relative to osc(w_0)
    rho_tilde: Optional[float] = None


class Recorder:
    """Samples a run at fixed times and accumulates the report."""

    def __init__(self, g: GasLaw, profile: NozzleProfile, eps: float,
                 bc, t_end: float, ref: Optional[ReferenceState] = None,
                 options: Optional[RecorderOptions] = None, label: str = ""):
        self.g = g
        self.profile = profile
        self.eps = eps
        self.bc = bc
        self.ref = ref
        self.opt = options or RecorderOptions()
        self.label = label
        self.sample_times = np.linspace(0.0, t_end, self.opt.sample_count)
        self._t: list[float] = []
        self._E: list[float] = []
        self._rate_h: list[float] = []
        self._rate_g: list[float] = []
        self._D: list[float] = []
        self._llf: list[float] = []
        self._llf_cum: list[float] = []
        self._riemann = RiemannHistory()
        self._phi: list[float] = []
        self._minrho: list[float] = []
        self._quartic: list[float] = []
        self._snap_rho: list[np.ndarray] = []
        self._snap_m: list[np.ndarray] = []
        self._snap_x: Optional[np.ndarray] = None
        self._rho_tilde: Optional[float] = self.opt.rho_tilde

    # -- sampling ------------------------------------------------------------
    def sample(self, field: FluidField) -> None:
        opt = self.opt
        t = field.t
        self._t.append(t)
        if opt.energy and self.ref is not None:
            E, comp = energy_budget(field, self.g, self.profile, self.ref,
                                    self.eps)
            rate = comp["rate_total"]
            if self._E:
                dt = t - self._t[-2]
                self._D.append(self._D[-1] + 0.5 * dt
                               * (self._rate_h[-1] + self._rate_g[-1] + rate))
            else:
                self._D.append(0.0)
            self._E.append(E)
            self._rate_h.append(comp["rate_hessian"])
            self._rate_g.append(comp["rate_geometric"])
        if opt.llf and self.ref is not None:
            rate = llf_dissipation_rate(field, self.g, self.profile, self.eps,
                                        self.bc, self.ref)
            if self._llf:
                dt = t - self._t[-2]
                self._llf_cum.append(self._llf_cum[-1]
                                     + 0.5 * dt * (self._llf[-1] + rate))
            else:
                self._llf_cum.append(0.0)
            self._llf.append(rate)
        if opt.riemann:
            riemann_monitor(field, self.g, self.profile, self.eps, self._riemann)
        if opt.vacuum:
            if self._rho_tilde is None:
                self._rho_tilde = float(np.min(field.rho))
            self._phi.append(vacuum_functional(field, self._rho_tilde))
            self._minrho.append(float(np.min(field.rho)))
        if opt.quartic:
            x = field.grid.x
            A = self.profile.area(x)
            vals = quartic_entropy(self.g, field.rho, field.m)
            self._quartic.append(float(np.sum(vals * A * _trap_weights(x))))
        if opt.collect_snapshots:
            if self._snap_x is None:
                x = field.grid.x
                if opt.snapshot_window is not None:
                    lo, hi = opt.snapshot_window
                    self._snap_mask = (x >= lo) & (x <= hi)
                else:
                    self._snap_mask = np.ones_like(x, dtype=bool)
                self._snap_x = x[self._snap_mask]
            self._snap_rho.append(field.rho[self._snap_mask].copy())
            self._snap_m.append(field.m[self._snap_mask].copy())

    # -- wrap-up ---------------------------------------------------------------
    def finalize(self) -> DiagnosticsReport:
        rep = DiagnosticsReport.empty()
        rep.label = self.label
        rep.t = np.array(self._t)
        opt = self.opt
        if self._E:
            rep.energy = np.array(self._E)
            rep.dissipation = np.array(self._D)
            rep.diss_rate_hessian = np.array(self._rate_h)
            rep.diss_rate_geometric = np.array(self._rate_g)
            scale = rep.energy[0] + 1.0  # rounding floor even for E0 = 0 runs
            rep.checks["energy_nonnegative"] = bool(
                np.all(rep.energy >= -1e-12 * scale))
            rep.checks["dissipation_monotone"] = bool(
                np.all(np.diff(rep.dissipation) >= -1e-12 * scale))
            total = rep.energy + rep.dissipation
            if opt.sharp_energy:
                bound = rep.energy[0] * (1.0 + opt.energy_tol) + 1e-14
                rep.checks["energy_inequality_sharp"] = bool(np.all(total <= bound))
            else:
                bound = opt.gronwall_M * (rep.energy[0] + 1.0)
                rep.checks["energy_inequality"] = bool(np.all(total <= bound))
        if self._llf:
            rep.llf_rate = np.array(self._llf)
            rep.llf_cumulative = np.array(self._llf_cum)
            rep.notes.append("llf series estimates the scheme's interface "
                             "dissipation; heuristic, not an estimate of the "
                             "equations")
        if opt.riemann and self._riemann.t:
            rep.max_w = np.array(self._riemann.max_w)
            rep.min_z = np.array(self._riemann.min_z)
            rep.correction = np.array(self._riemann.correction)
            wt = rep.corrected_max_w
            zt = rep.corrected_min_z
            osc = max(rep.max_w[0] - rep.min_z[0], 1e-300)
            dts = np.diff(rep.t)
            slack = opt.riemann_tol * osc * dts + 1e-12 * osc
            rep.checks["max_w_corrected_nonincreasing"] = bool(
                np.all(np.diff(wt) <= slack))
            rep.checks["min_z_corrected_nondecreasing"] = bool(
                np.all(np.diff(zt) >= -slack))
        if self._phi:
            rep.vacuum_phi = np.array(self._phi)
            rep.min_rho = np.array(self._minrho)
            rep.checks["vacuum_functional_finite"] = bool(
                np.all(np.isfinite(rep.vacuum_phi)))
        if self._quartic:
            rep.quartic = np.array(self._quartic)
            q0 = self._quartic[0]
            rep.checks["quartic_energy_nonincreasing"] = bool(
                np.all(np.diff(rep.quartic) <= 1e-3 * abs(q0) + 1e-14))
        if opt.collect_snapshots and self._snap_rho:
            rep.snapshots = SnapshotSet(
                t=np.array(self._t), x=self._snap_x.copy(),
                rho=np.vstack(self._snap_rho), m=np.vstack(self._snap_m),
                meta={"label": self.label, "eps": self.eps,
                      "gamma": self.g.gamma, "delta": self.g.delta})
        return rep
