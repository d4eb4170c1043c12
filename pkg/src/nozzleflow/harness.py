"""Run orchestration: configs, single runs, viscosity sweeps, distances.

A sweep runs the solver once per ladder rung on its own expanding domain
(common grid spacing, so the rung-to-rung comparison isolates the
viscosity), interpolates the stored snapshots onto a shared comparison
window, and measures pairwise space-time L^p distances.  The qualitative
verdict is Cauchy-style: successive distances should shrink.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import (DiagnosticsReport, Recorder, RecorderOptions,
                          SnapshotSet, WeakResidualRecord,
                          default_generator_family, default_test_functions,
                          integrability_window, weak_residual)
from .entropy import ReferenceState
from .errors import ConfigError, SolverError, SweepError
from .geometry import NozzleProfile, make_profile
from .schedule import CertificateReport, ViscositySchedule, certify
from .solver import (BoundarySpec, FluidField, Grid, InitialData,
                     prepare_initial_data, run)
from .thermo import GasLaw

# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_BOOL = {"true": True, "false": False, "yes": True, "no": False,
         "on": True, "off": False, "1": True, "0": False}


@dataclass
class RunConfig:
    """Flat configuration for runs and sweeps (see README for the file keys)."""

    # gas
    gamma: float = 2.0
    kappa: Optional[float] = None
    delta: Optional[float] = None          # None: delta(eps) from the ladder rule
    # geometry
    profile: str = "constant"
    profile_area: float = 1.0
    profile_base: float = 1.0
    profile_amp: float = 1.0
    profile_rate: float = 1.0
    profile_alpha: float = 1.0
    profile_n: int = 3
    profile_omega: Optional[float] = None
    profile_file: Optional[str] = None
    # far states / reference
    rho_minus: float = 1.0
    u_minus: float = 0.0
    rho_plus: float = 0.125
    u_plus: float = 0.0
    L0: float = 2.0
    # boundary mode
    bc: str = "dirichlet_nozzle"
    rho_bar: Optional[float] = None        # spherical modes; None: ladder rule
    # initial data
    init: str = "riemann"                  # riemann | bump | constant
    init_amp: float = 0.5
    init_center: float = 0.0
    init_width: float = 1.0
    # mollifying a jump trades ~ width * jump^2 * h'' of relative energy, so
    # the width must stay small against the data's energy content
    mollify_width: float = 0.02
    blend_width: float = 1.0
    # solver
    eps: float = 0.05
    t_end: float = 0.5
    cfl: float = 0.4
    dx: float = 1.0 / 128.0
    a: Optional[float] = None              # None: ladder rule a(eps)
    b: Optional[float] = None
    limiter_theta: float = 1.5
    # ladder / sweep
    eps0: float = 0.1
    n_eps: int = 4
    delta_exponent: Optional[float] = None  # None: 1 + beta_max
    beta_max: float = 4.0
    M_budget: float = 10.0
    window_lo: float = -1.0
    window_hi: float = 1.0
    p_rho: float = 1.0
    q_mom: float = 1.0
    snapshots: int = 32
    snapshot_margin: float = 0.5
    workers: int = 1                       # 0: one per processor
    seed: int = 0
    force: bool = False
    # diagnostics
    check_energy: bool = True
    check_riemann: bool = True
    check_quartic: bool = False
    gronwall_M: float = 10.0
    energy_tol: float = 1e-3
    riemann_tol: float = 1e-3
    weak_residuals: bool = False
    output_dir: str = "out"

    # -- parsing --------------------------------------------------------------
    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        cfg = cls()
        fields = {f: type_ for f, type_ in cls.__annotations__.items()}
        for key, raw in data.items():
            if key not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            cur = getattr(cfg, key)
            if isinstance(raw, str):
                val = _coerce(key, raw, cur)
            else:
                val = raw
            setattr(cfg, key, val)
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        data: dict[str, str] = {}
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, val = (part.strip() for part in stripped.split("=", 1))
                data[key] = val
        return cls.from_mapping(data)

    # -- object builders --------------------------------------------------------
    def build_profile(self) -> NozzleProfile:
        kind = self.profile
        if kind == "constant":
            return make_profile(kind, value=self.profile_area)
        if kind == "gaussian_bump":
            return make_profile(kind, base=self.profile_base,
                                amp=self.profile_amp, rate=self.profile_rate)
        if kind == "power_law_closing":
            return make_profile(kind, alpha=self.profile_alpha)
        if kind == "exponential":
            return make_profile(kind, rate=self.profile_rate)
        if kind == "spherical":
            omega = self.profile_omega if self.profile_omega else 0.0
            return make_profile(kind, n_dim=self.profile_n, omega_n=omega)
        if kind == "tabulated":
            return make_profile(kind, file=self.profile_file)
        raise ConfigError(f"unknown profile kind {self.profile!r}")

    def build_schedule(self) -> ViscositySchedule:
        spherical = self.bc in ("dirichlet_spherical", "neumann_spherical")
        q = self.delta_exponent if self.delta_exponent is not None \
            else 1.0 + self.beta_max
        eps = tuple(self.eps0 * 0.5 ** k for k in range(self.n_eps))
        return ViscositySchedule(
            eps, q=q, beta_max=self.beta_max, M_budget=self.M_budget,
            L0=self.L0, spherical=spherical, n_dim=self.profile_n,
            gamma=self.gamma)

    def build_gas(self, eps: Optional[float] = None) -> GasLaw:
        if self.delta is not None:
            delta = self.delta
        else:
            q = self.delta_exponent if self.delta_exponent is not None \
                else 1.0 + self.beta_max
            delta = (self.eps if eps is None else eps) ** q
        kappa = self.kappa if self.kappa is not None else -1.0
        return GasLaw(self.gamma, kappa, delta)

    def build_reference(self) -> ReferenceState:
        if self.bc in ("dirichlet_spherical", "neumann_spherical"):
            rb = self.rho_bar
            if rb is None:
                sched = self.build_schedule()
                rb = sched.rho_bar_of(self.eps)
            return ReferenceState.constant(rb, 0.0, self.L0)
        return ReferenceState(self.rho_minus, self.u_minus,
                              self.rho_plus, self.u_plus, self.L0)

    def domain_of(self, eps: float) -> tuple[float, float]:
        sched = self.build_schedule()
        a = self.a if self.a is not None else sched.a_of(eps)
        b = self.b if self.b is not None else sched.b_of(eps)
        return float(a), float(b)

    def build_bc(self, eps: float) -> BoundarySpec:
        if self.bc == "dirichlet_nozzle":
            return BoundarySpec.dirichlet_nozzle(
                self.rho_minus, self.rho_minus * self.u_minus,
                self.rho_plus, self.rho_plus * self.u_plus)
        rb = self.rho_bar
        if rb is None:
            rb = self.build_schedule().rho_bar_of(eps)
        if self.bc == "dirichlet_spherical":
            return BoundarySpec.dirichlet_spherical(rb)
        if self.bc == "neumann_spherical":
            return BoundarySpec.neumann_spherical(rb)
        raise ConfigError(f"unknown bc mode {self.bc!r}")

    def build_initial(self, eps: float) -> InitialData:
        ref = self.build_reference()
        if self.init == "riemann":
            def rho0(x):
                return np.where(x < self.init_center, self.rho_minus, self.rho_plus)

            def m0(x):
                return np.where(x < self.init_center,
                                self.rho_minus * self.u_minus,
                                self.rho_plus * self.u_plus)
        elif self.init == "bump":
            rb = self.rho_bar
            if rb is None and self.bc != "dirichlet_nozzle":
                rb = self.build_schedule().rho_bar_of(eps)
            amp, x0, wdt = self.init_amp, self.init_center, self.init_width

            def rho0(x):
                base = ref.rho_bar(x) if rb is None else rb
                s = (x - x0) / wdt
                bump = np.where(np.abs(s) < 1.0,
                                np.exp(1.0 - 1.0 / np.maximum(1.0 - s * s, 1e-12)),
                                0.0)
                return base + amp * bump

            def m0(x):
                return np.asarray(ref.m_bar(x)) if rb is None \
                    else np.zeros_like(np.asarray(x, dtype=float))
        elif self.init == "constant":
            def rho0(x):
                return np.asarray(ref.rho_bar(x))

            def m0(x):
                return np.asarray(ref.m_bar(x))
        else:
            raise ConfigError(f"unknown init kind {self.init!r}")
        return InitialData(rho0, m0, self.mollify_width, self.blend_width)


def _coerce(key: str, raw: str, current):
    raw = raw.strip()
    if raw == "" or raw.lower() == "none":
        return None
    if isinstance(current, bool):
        if raw.lower() not in _BOOL:
            raise ConfigError(f"{key}: cannot parse boolean from {raw!r}")
        return _BOOL[raw.lower()]
    if isinstance(current, int) and not isinstance(current, bool):
        return int(raw)
    if isinstance(current, float) or current is None:
        try:
            return float(raw)
        except ValueError:
            return raw
    return raw


# ---------------------------------------------------------------------------
# Single runs
# ---------------------------------------------------------------------------


@dataclass
class RunOutput:
    eps: float
    delta: float
    field: FluidField
    report: DiagnosticsReport
    snapshots: Optional[SnapshotSet]
    label: str = ""


def single_run(cfg: RunConfig, eps: Optional[float] = None,
               label: str = "run", collect_snapshots: bool = True) -> RunOutput:
    eps = cfg.eps if eps is None else eps
    g = cfg.build_gas(eps)
    profile = cfg.build_profile()
    a, b = cfg.domain_of(eps)
    n_cells = max(8, int(round((b - a) / cfg.dx)))
    grid = Grid(a, b, n_cells)
    bc = cfg.build_bc(eps)
    raw = cfg.build_initial(eps)
    field = prepare_initial_data(raw, bc, g, profile, grid)
    ref = cfg.build_reference()
    if cfg.bc in ("dirichlet_spherical", "neumann_spherical"):
        rb = bc.right_values(0.0)[0]
        ref = ReferenceState.constant(rb, 0.0, cfg.L0)
    margin = cfg.snapshot_margin
    window = (cfg.window_lo - margin, cfg.window_hi + margin)
    window = (max(window[0], a), min(window[1], b))
    opts = RecorderOptions(
        sample_count=cfg.snapshots,
        collect_snapshots=collect_snapshots,
        snapshot_window=window,
        energy=cfg.check_energy,
        riemann=cfg.check_riemann,
        quartic=cfg.check_quartic or cfg.bc == "neumann_spherical",
        gronwall_M=cfg.gronwall_M,
        sharp_energy=cfg.bc == "dirichlet_spherical",
        energy_tol=cfg.energy_tol,
        riemann_tol=cfg.riemann_tol,
    )
    rec = Recorder(g, profile, eps, bc, cfg.t_end, ref=ref, options=opts,
                   label=label)
    field, report = run(field, g, profile, eps, bc, cfg.t_end, hooks=rec,
                        cfl=cfg.cfl, limiter_theta=cfg.limiter_theta)
    return RunOutput(eps=eps, delta=g.delta, field=field, report=report,
                     snapshots=report.snapshots, label=label)


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


def lp_distance(snap_a: SnapshotSet, snap_b: SnapshotSet, K, p: float = 1.0,
                which: str = "rho") -> float:
    """Space-time L^p distance of one field over K x [t0, t1].

    Both snapshot sets must share their sample times; the comparison grid is
    the finer of the two restricted to K, the coarser run interpolating
    linearly onto it.
    """
    if p < 1.0:
        raise ConfigError("p must be at least 1")
    if snap_a.t.shape != snap_b.t.shape or not np.allclose(snap_a.t, snap_b.t,
                                                           atol=1e-10):
        raise ConfigError("snapshot sets cover different time windows")
    lo, hi = float(K[0]), float(K[1])
    wa = snap_a.window(lo, hi)
    wb = snap_b.window(lo, hi)
    xq = wa.x if wa.x.size >= wb.x.size else wb.x
    fa = getattr(wa.interp_x(xq), which)
    fb = getattr(wb.interp_x(xq), which)
    diff = np.abs(fa - fb) ** p
    per_t = np.trapezoid(diff, xq, axis=1)
    return float(np.trapezoid(per_t, snap_a.t) ** (1.0 / p))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    eps_list: tuple
    certificate: CertificateReport
    runs: list                     # RunOutput per successful rung
    failures: list                 # (eps, message)
    d_rho: np.ndarray
    d_m: np.ndarray
    ratios_rho: np.ndarray
    ratios_m: np.ndarray
    converging_rho: bool
    converging_m: bool
    integrability: list            # IntegrabilityRecord per run
    weak: list                     # WeakResidualRecord per run (optional)

    @property
    def converging(self) -> bool:
        return self.converging_rho and self.converging_m

    def summary(self) -> str:
        lines = [f"sweep over eps = {tuple(round(e, 6) for e in self.eps_list)}"]
        lines.append(self.certificate.summary())
        for eps, msg in self.failures:
            lines.append(f"  run eps={eps:g} FAILED: {msg}")
        if len(self.d_rho):
            lines.append("  pairwise L^p distances (rho): "
                         + ", ".join(f"{d:.5g}" for d in self.d_rho))
            lines.append("  pairwise L^q distances (m):   "
                         + ", ".join(f"{d:.5g}" for d in self.d_m))
        lines.append(f"  verdict: rho {'converging' if self.converging_rho else 'NOT converging'}, "
                     f"m {'converging' if self.converging_m else 'NOT converging'}")
        checks_ok = all(r.report.all_checks_pass() for r in self.runs)
        lines.append(f"  per-run inequality checks: {'pass' if checks_ok else 'FAIL'}")
        return "\n".join(lines)


def _verdict(distances: np.ndarray) -> bool:
    """Cauchy verdict: successive ratios below 0.9, one violation allowed."""
    if len(distances) < 2:
        return True
    if np.max(distances) <= 1e-14:
        return True
    ratios = distances[1:] / np.maximum(distances[:-1], 1e-300)
    return int(np.sum(ratios >= 0.9)) <= 1


def _sweep_worker(args) -> RunOutput:
    cfg, eps, label = args
    return single_run(cfg, eps=eps, label=label)


def sweep(cfg: RunConfig) -> SweepResult:
    """Run the ladder, measure pairwise distances, and aggregate verdicts."""
    gam = cfg.gamma
    if cfg.p_rho >= gam + 1.0:
        raise ConfigError(f"p must stay below gamma + 1 = {gam + 1}")
    if cfg.q_mom >= 3.0 * (gam + 1.0) / (gam + 3.0):
        raise ConfigError("q must stay below 3(gamma+1)/(gamma+3) "
                          f"= {3.0 * (gam + 1.0) / (gam + 3.0):.4g}")
    sched = cfg.build_schedule()
    profile = cfg.build_profile()
    cert = certify(sched, profile, GasLaw(cfg.gamma,
                                          cfg.kappa if cfg.kappa is not None else -1.0))
    if not cert.passed and not cfg.force:
        raise ConfigError("schedule failed its certificate "
                          f"({cert.failing()}); pass force=true to override")
    jobs = [(cfg, eps, f"eps={eps:g}") for eps in sched.eps_list]
    runs: list[RunOutput] = []
    failures: list[tuple[float, str]] = []
    workers = cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sweep_worker, job) for job in jobs]
            for job, fut in zip(jobs, futures):
                try:
                    runs.append(fut.result())
                except (SolverError, ConfigError) as err:
                    failures.append((job[1], str(err)))
    else:
        for job in jobs:
            try:
                runs.append(_sweep_worker(job))
            except (SolverError, ConfigError) as err:
                failures.append((job[1], str(err)))
    if len(runs) < 2:
        raise SweepError(f"only {len(runs)} of {len(jobs)} runs succeeded")

    K = (cfg.window_lo, cfg.window_hi)
    d_rho = np.array([lp_distance(runs[k].snapshots, runs[k + 1].snapshots,
                                  K, cfg.p_rho, "rho")
                      for k in range(len(runs) - 1)])
    d_m = np.array([lp_distance(runs[k].snapshots, runs[k + 1].snapshots,
                                K, cfg.q_mom, "m")
                    for k in range(len(runs) - 1)])
    integ = [integrability_window(r.snapshots, cfg.build_gas(r.eps), K,
                                  profile=profile, eps=r.eps) for r in runs]
    weak: list[WeakResidualRecord] = []
    if cfg.weak_residuals:
        t1, t2 = 0.02 * cfg.t_end, 0.98 * cfg.t_end
        tests = default_test_functions(t1, t2, K)
        u_span = max(abs(cfg.u_minus), abs(cfg.u_plus), 1.0)
        gens = default_generator_family((-u_span, 0.0, u_span))
        for r in runs:
            weak.append(weak_residual(r.snapshots, cfg.build_gas(r.eps),
                                      profile, tests, gens))
    return SweepResult(
        eps_list=sched.eps_list, certificate=cert, runs=runs,
        failures=failures, d_rho=d_rho, d_m=d_m,
        ratios_rho=d_rho[1:] / np.maximum(d_rho[:-1], 1e-300),
        ratios_m=d_m[1:] / np.maximum(d_m[:-1], 1e-300),
        converging_rho=_verdict(d_rho), converging_m=_verdict(d_m),
        integrability=integ, weak=weak)


# ---------------------------------------------------------------------------
# File output
# ---------------------------------------------------------------------------


def write_snapshot_csv(path, field: FluidField, g: GasLaw,
                       profile: NozzleProfile, eps: float, bc_mode: str,
                       cfl: float = 0.4) -> None:
    x = field.grid.x
    A = profile.area(x)
    u = field.velocity(g)
    with open(path, "w") as fh:
        fh.write(f"# t={field.t:.10g} gamma={g.gamma:.10g} kappa={g.kappa:.10g} "
                 f"delta={g.delta:.10g} eps={eps:.10g}\n")
        fh.write(f"# a={field.grid.a:.10g} b={field.grid.b:.10g} "
                 f"n_cells={field.grid.n_cells} cfl={cfl:g} bc={bc_mode}\n")
        fh.write("x,rho,m,u,A\n")
        for vals in zip(x, field.rho, field.m, u, A):
            fh.write(",".join(f"{v:.12g}" for v in vals) + "\n")


def write_sweep_outputs(result: SweepResult, cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    profile = cfg.build_profile()
    for r in result.runs:
        g = cfg.build_gas(r.eps)
        write_snapshot_csv(out / f"final_{r.label.replace('=', '_')}.csv",
                           r.field, g, profile, r.eps, cfg.bc, cfg.cfl)
        r.report.to_csv(out / f"report_{r.label.replace('=', '_')}.csv")
    (out / "summary.txt").write_text(result.summary() + "\n")
    return out
