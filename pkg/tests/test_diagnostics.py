import numpy as np
import pytest

from helpers import single_shock_states
from nozzleflow.diagnostics import (Recorder, RecorderOptions, SnapshotSet,
                                    SpaceTimeBump, default_generator_family,
                                    default_test_functions, energy_budget,
                                    integrability_window, riemann_monitor,
                                    vacuum_functional, weak_residual)
from nozzleflow.entropy import (ReferenceState, gen_half_square, gen_linear,
                                kernel_total_mass)
from nozzleflow.errors import CavitationError, ConfigError
from nozzleflow.geometry import ConstantProfile, GaussianBumpProfile
from nozzleflow.solver import (BoundarySpec, FluidField, Grid, InitialData,
                               prepare_initial_data, run)
from nozzleflow.thermo import GasLaw


def _constant_field(grid, rho_bar, m_bar=0.0):
    n = grid.n_nodes
    return FluidField(grid, np.full(n, rho_bar), np.full(n, m_bar))


def _constant_snapshots(rho_bar, m_bar, K=(-2.0, 2.0), T=1.0, nt=9, nx=65):
    t = np.linspace(0.0, T, nt)
    x = np.linspace(K[0], K[1], nx)
    return SnapshotSet(t, x, np.full((nt, nx), rho_bar), np.full((nt, nx), m_bar))


# ---------------------------------------------------------------------------
# energy budget
# ---------------------------------------------------------------------------


def test_energy_budget_vanishes_at_reference():
    g = GasLaw(2.0, delta=0.0)
    ref = ReferenceState.constant(1.0, 0.0)
    grid = Grid(-2.0, 2.0, 64)
    E, comp = energy_budget(_constant_field(grid, 1.0), g, ConstantProfile(),
                            ref, eps=0.05)
    assert E == pytest.approx(0.0, abs=1e-14)
    assert comp["rate_total"] == pytest.approx(0.0, abs=1e-14)


def test_energy_budget_single_node_contribution():
    # one interior node at (2, 0) against reference (1, 0) adds 0.125 dx
    g = GasLaw(2.0, delta=0.0)
    ref = ReferenceState.constant(1.0, 0.0)
    grid = Grid(-2.0, 2.0, 64)
    f = _constant_field(grid, 1.0)
    f.rho[30] = 2.0
    E, _ = energy_budget(f, g, ConstantProfile(), ref, eps=0.05)
    assert E == pytest.approx(0.125 * grid.dx, rel=1e-12)


def test_vacuum_functional_values():
    grid = Grid(0.0, 1.0, 10)
    f = _constant_field(grid, 0.5)
    assert vacuum_functional(f, 0.5) == pytest.approx(0.0)
    # single interior node at rho_tilde / 2 contributes dx / (2 rho_tilde)
    f.rho[4] = 0.25
    assert vacuum_functional(f, 0.5) == pytest.approx(grid.dx / (2 * 0.5) , rel=1e-12)
    with pytest.raises(ConfigError):
        vacuum_functional(f, 0.0)
    rho = np.linspace(0.05, 1.0, 40)
    phi = np.where(rho < 0.5, 1 / rho - 2.0 + (rho - 0.5) / 0.25, 0.0)
    assert np.all(phi >= 0.0)
    assert np.all(np.diff(phi, 2)[rho[1:-1] < 0.45] >= -1e-12)  # convex branch


def test_riemann_monitor_constant_state():
    g = GasLaw(2.0, delta=1e-3)
    grid = Grid(-2.0, 2.0, 32)
    hist = None
    for t in (0.0, 0.1, 0.2):
        f = _constant_field(grid, 1.0)
        f.t = t
        hist = riemann_monitor(f, g, ConstantProfile(), 0.05, hist)
    assert np.ptp(hist.max_w) < 1e-12
    assert hist.correction[-1] == 0.0  # A'/A = 0 kills the integrand
    f = _constant_field(grid, 1.0)
    f.rho[3] = 0.0
    with pytest.raises(CavitationError):
        riemann_monitor(f, g, ConstantProfile(), 0.05, None)


def test_riemann_monitor_correction_positive_on_bump():
    g = GasLaw(2.0, delta=1e-3)
    grid = Grid(-2.0, 2.0, 32)
    f = _constant_field(grid, 1.0, m_bar=0.5)
    hist = riemann_monitor(f, g, GaussianBumpProfile(), 0.05, None)
    assert hist.integrand[0] > 0.0


# ---------------------------------------------------------------------------
# integrability windows
# ---------------------------------------------------------------------------


def test_integrability_constant_state():
    g = GasLaw(2.0, delta=0.2)
    rho_bar = 0.8
    snap = _constant_snapshots(rho_bar, 0.0, T=1.0)
    rec = integrability_window(snap, g, (-1.0, 1.0))
    assert rec.rho_gamma_plus_one == pytest.approx(2.0 * rho_bar ** 3.0, rel=1e-12)
    assert rec.delta_rho_cubed == pytest.approx(2.0 * 0.2 * rho_bar ** 3, rel=1e-12)
    assert rec.rho_u_cubed == pytest.approx(0.0, abs=1e-15)
    assert rec.rho_gamma_theta == pytest.approx(2.0 * rho_bar ** 2.5, rel=1e-12)


def test_integrability_vacuum_adjacent():
    g = GasLaw(2.0)
    snap = _constant_snapshots(1e-12, 0.0)
    rec = integrability_window(snap, g, (-1.0, 1.0))
    assert rec.density_total < 1e-23
    assert rec.velocity_total < 1e-17


def test_integrability_window_validation():
    g = GasLaw(2.0)
    snap = _constant_snapshots(1.0, 0.0, K=(-1.0, 1.0))
    with pytest.raises(ConfigError):
        integrability_window(snap, g, (-3.0, 1.0))


# ---------------------------------------------------------------------------
# weak residuals
# ---------------------------------------------------------------------------


def test_weak_residual_constant_state_all_zero():
    # constant states solve the limit system exactly; the residual is pure
    # quadrature noise, which decays superalgebraically with the sampling
    g = GasLaw(2.0)
    tests = default_test_functions(0.05, 0.95, (-1.5, 1.5), nt=2, nx=3)
    gens = default_generator_family()

    def worst(nt, nx):
        snap = _constant_snapshots(0.7, 0.21, K=(-2.0, 2.0), T=1.0, nt=nt, nx=nx)
        rec = weak_residual(snap, g, ConstantProfile(), tests, gens)
        return max(np.max(np.abs(rec.mass)), np.max(np.abs(rec.momentum)),
                   np.max(np.abs(rec.entropy))) / np.max(rec.norms)

    coarse = worst(33, 129)
    fine = worst(257, 257)
    assert fine < 1e-7
    assert fine < 1e-3 * coarse


def test_weak_residual_rejects_nonconvex_generator():
    from nozzleflow.entropy import gen_half_signed_square
    g = GasLaw(2.0)
    snap = _constant_snapshots(1.0, 0.0)
    tests = default_test_functions(0.1, 0.9, (-1.0, 1.0), nt=1, nx=1)
    with pytest.raises(ConfigError):
        weak_residual(snap, g, ConstantProfile(), tests,
                      [gen_half_signed_square(0.0)])


def test_weak_residual_support_validation():
    g = GasLaw(2.0)
    snap = _constant_snapshots(1.0, 0.0, K=(-1.0, 1.0), T=0.5)
    bad = [SpaceTimeBump(t0=0.25, rt=0.3, x0=0.0, rx=0.5)]
    with pytest.raises(ConfigError):
        weak_residual(snap, g, ConstantProfile(), bad, [gen_half_square()])


def _shock_snapshots():
    g = GasLaw(2.0, delta=1e-4)
    prof = ConstantProfile()
    rm, um, rp, up = single_shock_states(2.0)
    bc = BoundarySpec.dirichlet_nozzle(rm, rm * um, rp, rp * up)
    grid = Grid(-6.0, 6.0, 512)
    raw = InitialData(lambda x: np.where(x < 0, rm, rp),
                      lambda x: np.where(x < 0, rm * um, rp * up),
                      mollify_width=0.02, blend_width=0.5)
    field = prepare_initial_data(raw, bc, g, prof, grid)
    opts = RecorderOptions(sample_count=65, snapshot_window=(-2.0, 2.0),
                           energy=False, riemann=False, vacuum=False, llf=False)
    rec = Recorder(g, prof, 0.025, bc, 0.5, options=opts)
    _, rep = run(field, g, prof, 0.025, bc, 0.5, hooks=rec)
    return rep.snapshots, g


def test_linear_generator_reduces_to_momentum_form():
    snap, g = _shock_snapshots()
    tests = default_test_functions(0.02, 0.48, (-1.5, 1.5), nt=2, nx=4)
    rec = weak_residual(snap, g, ConstantProfile(), tests, [gen_linear()])
    c = kernel_total_mass(g.lambda_exp)
    lhs = rec.entropy[0]
    rhs = -c * rec.momentum
    scale = np.max(np.abs(rhs)) + np.max(rec.norms) * 1e-16
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * scale


def test_half_square_pairing_matches_scaled_mechanical_form():
    # for psi = s^2/2 the kernel pairing is c_lam times the mechanical-energy
    # pairing built from the closed-form pair
    from nozzleflow.entropy import mechanical_energy
    snap, g = _shock_snapshots()
    tests = default_test_functions(0.02, 0.48, (-1.5, 1.5), nt=2, nx=4)
    rec = weak_residual(snap, g, ConstantProfile(), tests, [gen_half_square()])
    c = kernel_total_mass(g.lambda_exp)
    eta_s, q_s = mechanical_energy(g, snap.rho, snap.m)
    t, x = snap.t, snap.x
    for j, tf in enumerate(tests):
        phi_t = tf.phi_t(t, x)
        phi_x = tf.phi_x(t, x)
        direct = -np.trapezoid(np.trapezoid(eta_s * phi_t + q_s * phi_x,
                                            x, axis=1), t)
        assert rec.entropy[0][j] == pytest.approx(c * direct,
                                                  rel=1e-10, abs=1e-14)


def test_mass_residual_refinement_order():
    # against a fixed test function the mass defect is the viscous flux
    # pairing and decays at first order under simultaneous (eps, dx) halving
    g0 = GasLaw(2.0)
    prof = ConstantProfile()
    rm, um, rp, up = single_shock_states(2.0)
    phi = SpaceTimeBump(t0=0.25, rt=0.22, x0=0.2, rx=0.7)
    vals = []
    for eps, n in [(0.1, 64 * 12), (0.05, 128 * 12), (0.025, 256 * 12)]:
        g = GasLaw(2.0, delta=eps ** 5)
        bc = BoundarySpec.dirichlet_nozzle(rm, rm * um, rp, rp * up)
        grid = Grid(-6.0, 6.0, n)
        raw = InitialData(lambda x: np.where(x < 0, rm, rp),
                          lambda x: np.where(x < 0, rm * um, rp * up),
                          mollify_width=0.02, blend_width=0.5)
        field = prepare_initial_data(raw, bc, g, prof, grid)
        opts = RecorderOptions(sample_count=97, snapshot_window=(-2.0, 2.0),
                               energy=False, riemann=False, vacuum=False,
                               llf=False)
        rec = Recorder(g, prof, eps, bc, 0.5, options=opts)
        _, rep = run(field, g, prof, eps, bc, 0.5, hooks=rec)
        wk = weak_residual(rep.snapshots, g, prof, [phi], [gen_half_square()])
        vals.append(abs(float(wk.mass[0])))
    orders = np.log2(np.array(vals[:-1]) / np.array(vals[1:]))
    assert np.all(orders >= 1.0), orders


# ---------------------------------------------------------------------------
# recorder plumbing
# ---------------------------------------------------------------------------


def test_recorder_full_run_checks():
    g = GasLaw(2.0, delta=1e-4)
    prof = ConstantProfile()
    rm, um, rp, up = single_shock_states(2.0)
    ref = ReferenceState(rm, um, rp, up)
    bc = BoundarySpec.dirichlet_nozzle(rm, rm * um, rp, rp * up)
    grid = Grid(-6.0, 6.0, 256)
    raw = InitialData(lambda x: np.where(x < 0, rm, rp),
                      lambda x: np.where(x < 0, rm * um, rp * up),
                      mollify_width=0.0, blend_width=0.5)
    field = prepare_initial_data(raw, bc, g, prof, grid)
    rec = Recorder(g, prof, 0.05, bc, 0.4, ref=ref,
                   options=RecorderOptions(sample_count=17), label="shock")
    _, rep = run(field, g, prof, 0.05, bc, 0.4, hooks=rec)
    assert len(rep.t) == 17
    assert rep.checks["energy_nonnegative"]
    assert rep.checks["dissipation_monotone"]
    assert rep.checks["energy_inequality"]
    assert np.all(np.diff(rep.dissipation) >= 0.0)
    assert np.all(rep.llf_rate >= -1e-14)
    assert rep.snapshots is not None
    assert rep.snapshots.rho.shape == (17, grid.n_nodes)


def test_energy_budget_gronwall_verdict():
    g = GasLaw(2.0, delta=0.0)
    ref = ReferenceState.constant(1.0, 0.0)
    grid = Grid(-2.0, 2.0, 64)
    f = _constant_field(grid, 1.0)
    f.rho[20] = 2.0
    E, comp = energy_budget(f, g, ConstantProfile(), ref, 0.05,
                            gronwall_M=10.0)
    assert E > 0.0 and comp["gronwall_ok"]
    _, comp = energy_budget(f, g, ConstantProfile(), ref, 0.05,
                            sharp=True, E0=1e-9, D_accumulated=0.0)
    assert not comp["gronwall_ok"]  # a real bump cannot fit a near-zero budget


def test_quartic_energy_nonincreasing_neumann_collapse():
    # axis-end mode: the quartic-generator energy must not grow (within 1e-3
    # of its initial value) while a bump collapses inward
    from nozzleflow.geometry import SphericalProfile
    g = GasLaw(2.0, delta=1e-4)
    prof = SphericalProfile(n_dim=3)
    grid = Grid(0.2, 8.2, 400)
    bc = BoundarySpec.neumann_spherical(0.05)
    x = grid.x
    s = (x - 2.0) / 1.0
    rho = 0.05 + 0.8 * np.where(np.abs(s) < 1,
                                np.exp(1.0 - 1.0 / np.maximum(1 - s * s, 1e-12)),
                                0.0)
    f = FluidField(grid, rho, np.zeros_like(x))
    ref = ReferenceState.constant(0.05)
    opts = RecorderOptions(sample_count=17, quartic=True, energy=False,
                           riemann=False, vacuum=False, llf=False,
                           collect_snapshots=False)
    rec = Recorder(g, prof, 0.05, bc, 0.5, ref=ref, options=opts)
    _, rep = run(f, g, prof, 0.05, bc, 0.5, hooks=rec)
    assert rep.checks["quartic_energy_nonincreasing"]
    assert np.all(np.diff(rep.quartic) <= 1e-3 * rep.quartic[0] + 1e-14)


def test_report_csv_and_merge(tmp_path):
    g = GasLaw(2.0, delta=1e-4)
    prof = ConstantProfile()
    bc = BoundarySpec.dirichlet_nozzle(1.0, 0.0, 1.0, 0.0)
    grid = Grid(-2.0, 2.0, 64)
    ref = ReferenceState.constant(1.0)
    f = _constant_field(grid, 1.0)
    rec = Recorder(g, prof, 0.05, bc, 0.2, ref=ref,
                   options=RecorderOptions(sample_count=5), label="a")
    _, rep_a = run(f, g, prof, 0.05, bc, 0.2, hooks=rec)
    path = tmp_path / "report.csv"
    rep_a.to_csv(path)
    text = path.read_text()
    assert "# check energy_nonnegative = pass" in text
    assert text.count("\n") > 5
    rec2 = Recorder(g, prof, 0.025, bc, 0.2, ref=ref,
                    options=RecorderOptions(sample_count=5), label="b")
    f2 = _constant_field(grid, 1.0)
    _, rep_b = run(f2, g, prof, 0.025, bc, 0.2, hooks=rec2)
    merged = rep_a.merge(rep_b)
    assert merged.label == "a+b"
    assert merged.all_checks_pass()
