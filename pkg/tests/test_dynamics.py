import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cascade_lab.dynamics import (
    BasinError, DynamicsError, IntegrationError, LatticeSystem, PerturbationModel, ToyState,
    find_traversal_orbit, growth_target, integrate, integrate_toy, lift_and_rescale, norm_report,
    resonant_rhs, simulate_perturbed, stage_times, toy_conserved, toy_hamiltonian, toy_rhs,
)
from cascade_lab.lattice import Mode

from oracles import lattice_gradient_rhs, toy_gradient_rhs

phases = st.floats(0, 2 * math.pi, allow_nan=False)


def rand_state(seed, n, scale=0.5):
    rng = np.random.default_rng(seed)
    return scale * (rng.normal(size=n) + 1j * rng.normal(size=n))


# ---------------------------------------------------------------- toy model

def test_toy_zero_state():
    assert np.all(toy_rhs(np.zeros(5)) == 0)


@pytest.mark.parametrize("g", [2, 3, 6])
def test_toy_rhs_is_gradient(g):
    b = rand_state(g, g)
    assert toy_rhs(b) == pytest.approx(toy_gradient_rhs(b), rel=1e-6, abs=1e-7)


def test_toy_single_mode_closed_form():
    tol = 1e-10
    for amp in (1.0, 0.6):
        tr = integrate_toy(ToyState(np.array([amp, 0, 0, 0], dtype=complex)), 5.0, tol=tol,
                           t_eval=np.linspace(0, 5, 11))
        exact = amp * np.exp(1j * amp ** 2 * tr.t)
        assert np.max(np.abs(tr.y[:, 0] - exact)) <= 10 * tol
        assert np.all(tr.y[:, 1:] == 0)


def test_toy_conserved_examples():
    m, h = toy_conserved(np.array([1, 0, 0, 0], dtype=complex))
    assert (m, h) == (1.0, -0.5)


@given(phases, st.integers(0, 1000))
def test_toy_gauge_invariance(phi, seed):
    b = rand_state(seed, 6)
    m, h = toy_conserved(b)
    m2, h2 = toy_conserved(np.exp(1j * phi) * b)
    assert m2 == pytest.approx(m, rel=1e-13) and h2 == pytest.approx(h, rel=1e-12, abs=1e-14)


def test_toy_conservation_along_trajectory():
    b = rand_state(1, 6)
    tr = integrate_toy(ToyState(b), 10.0, tol=1e-10, t_eval=np.linspace(0, 10, 50))
    m0, h0 = toy_conserved(b)
    for y in tr.y:
        m, h = toy_conserved(y)
        assert abs(m - m0) / m0 <= 1e-8 and abs(h - h0) / abs(h0) <= 1e-8


def test_invariant_circle_does_not_move():
    b = np.zeros(6, dtype=complex)
    b[2] = 1.0
    tr = integrate_toy(ToyState(b), 50.0, tol=1e-10, t_eval=np.linspace(0, 50, 20))
    assert np.all(np.abs(tr.y[:, [0, 1, 3, 4, 5]]) == 0)
    with pytest.raises(DynamicsError):
        find_traversal_orbit(6, 0.0)


def test_toy_state_checks():
    with pytest.raises(DynamicsError):
        ToyState(np.array([np.nan, 0]))
    assert ToyState(np.array([0.6, 0.8j])).mass == pytest.approx(1.0)


# ---------------------------------------------------------------- integrator

def test_zero_time_is_identity():
    y0 = rand_state(2, 4)
    tr = integrate(lambda t, y: toy_rhs(y), y0, 0.0)
    assert np.array_equal(tr.y[0], y0) and np.array_equal(tr.at(0.0), y0)


def test_tighter_tolerance_helps():
    b = rand_state(3, 5)
    ref = integrate_toy(ToyState(b), 4.0, tol=1e-13).y[-1]
    errs = [np.max(np.abs(integrate_toy(ToyState(b), 4.0, tol=tol).y[-1] - ref)) for tol in (1e-5, 1e-7, 1e-9)]
    assert errs[0] > errs[1] > errs[2]


def test_integration_failure_keeps_state():
    with pytest.raises(IntegrationError) as e:
        integrate(lambda t, y: y * y, np.array([1.0 + 0j]), 2.0, tol=1e-8)
    assert e.value.t < 1.0 + 1e-6 and np.isfinite(e.value.state).all()


def test_tol_must_be_positive():
    with pytest.raises(DynamicsError):
        integrate(lambda t, y: y, np.ones(1), 1.0, tol=0.0)


def test_integration_deterministic():
    b = rand_state(8, 6)
    a1 = integrate_toy(ToyState(b), 3.0).y
    a2 = integrate_toy(ToyState(b), 3.0).y
    assert np.array_equal(a1, a2)


# ---------------------------------------------------------------- traversal

def test_stage_times_hysteresis():
    ts = np.arange(5.0)
    masses = np.array([[1, 0], [0.52, 0.48], [0.48, 0.52], [0.4, 0.6], [0.1, 0.9]])
    assert stage_times(ts, masses) == {1: 0.0, 2: 3.0}


def test_traversal_g5(orbit5):
    assert orbit5.mass_in >= 0.99 and orbit5.peak_out >= 0.90
    st_ = orbit5.stage_times
    assert sorted(st_) == list(st_)
    times = [st_[k] for k in sorted(st_)]
    assert times == sorted(times) and len(set(times)) == len(times)
    assert 3 in st_ and 4 in st_


def test_traversal_g6(orbit6):
    assert orbit6.mass_in >= 0.99 and orbit6.peak_out >= 0.90
    ks = sorted(orbit6.stage_times)
    assert [orbit6.stage_times[k] for k in ks] == sorted(orbit6.stage_times[k] for k in ks)
    assert ks[-1] == 5
    d = orbit6.to_dict()
    assert d["T0"] == orbit6.T0 and len(d["b0"]) == 6


def test_traversal_argument_errors():
    with pytest.raises(DynamicsError):
        find_traversal_orbit(4, 1e-2)
    with pytest.raises(DynamicsError):
        find_traversal_orbit(6, 1.5)


# ---------------------------------------------------------------- lattice system

def test_resonant_rhs_is_gradient(lam4):
    sysm = LatticeSystem(lam4)
    beta = rand_state(4, sysm.n, 0.3)
    got = resonant_rhs(beta, sysm)
    want = lattice_gradient_rhs(beta, sysm.modes, lam4.families)
    assert got == pytest.approx(want, rel=1e-6, abs=1e-7)


def test_resonant_rhs_zero_and_leak(lam4):
    sysm = LatticeSystem(lam4)
    assert np.all(resonant_rhs(np.zeros(sysm.n), sysm) == 0)
    with pytest.raises(DynamicsError, match="support leak"):
        resonant_rhs({Mode(10 ** 9 + 1, 3): 1.0}, sysm)


def test_generation_constant_reduces_to_toy(lam5):
    sysm = LatticeSystem(lam5)
    b = rand_state(5, 5)
    got = resonant_rhs(sysm.generation_constant(b), sysm)
    assert got == pytest.approx(sysm.generation_constant(toy_rhs(b)), rel=1e-14, abs=1e-15)


def test_single_family_excitation(lam4):
    sysm = LatticeSystem(lam4)
    f = lam4.families[3]
    fam = {sysm.index[j] for j in f.modes()}
    beta = np.zeros(sysm.n, dtype=complex)
    for i, z in zip(sorted(fam), rand_state(9, 4)):
        beta[i] = z
    d = resonant_rhs(beta, sysm)
    outside = [i for i in range(sysm.n) if i not in fam]
    assert np.all(d[outside] == 0)
    self_phase = -1j * (-beta * np.abs(beta) ** 2)
    assert np.max(np.abs((d - self_phase)[sorted(fam)])) > 0


def _flow(sysm, beta0, T, tol=1e-11):
    return integrate(lambda t, y: resonant_rhs(y, sysm), beta0, T, tol, t_eval=np.linspace(0, T, 9))


def test_resonant_flow_conservation(lam4):
    sysm = LatticeSystem(lam4)
    beta0 = rand_state(6, sysm.n, 0.4)
    tr = _flow(sysm, beta0, 5.0)
    mass = [np.sum(np.abs(y) ** 2) for y in tr.y]
    px = [np.sum(sysm.m * np.abs(y) ** 2) for y in tr.y]
    py = [np.sum(sysm.nn * np.abs(y) ** 2) for y in tr.y]
    for series in (mass, px, py):
        assert np.max(np.abs(np.array(series) - series[0])) <= 1e-8 * abs(series[0])


def test_generation_constant_states_invariant(lam5):
    sysm = LatticeSystem(lam5)
    b = rand_state(7, 5, 0.45)
    tr = _flow(sysm, sysm.generation_constant(b), 4.0)
    for y in tr.y:
        for vals in sysm.generation_values(y):
            assert np.max(np.abs(vals - vals[0])) <= 1e-9


@given(phases, st.integers(0, 100))
def test_gauge_covariance(phi, seed):
    from cascade_lab.lattice import build_prototype
    sysm = _GAUGE_SYS
    beta = rand_state(seed, sysm.n, 0.5)
    u = np.exp(1j * phi)
    assert resonant_rhs(u * beta, sysm) == pytest.approx(u * resonant_rhs(beta, sysm), rel=1e-12, abs=1e-14)


def _gauge_system():
    from cascade_lab.lattice import build_prototype, scale_and_certify
    return LatticeSystem(scale_and_certify(build_prototype(4, 2, spread=1e3), 32))


_GAUGE_SYS = _gauge_system()


def test_rescaling_covariance(lam4):
    sysm = LatticeSystem(lam4)
    beta0 = rand_state(10, sysm.n, 0.4)
    T, nu = 2.0, 3.0
    a = integrate(lambda t, y: resonant_rhs(y, sysm), beta0, T, 1e-12).y[-1]
    b = integrate(lambda t, y: resonant_rhs(y, sysm), beta0 / nu, nu ** 2 * T, 1e-12).y[-1]
    assert np.max(np.abs(b - a / nu)) <= 1e-9


# ---------------------------------------------------------------- lift

def test_lift_unit_scale(orbit6, lam6):
    path = lift_and_rescale(orbit6, 1.0, lam6)
    for t in (0.0, 0.5 * orbit6.T0, orbit6.T0):
        vals = path.beta(t)
        assert np.array_equal(vals, orbit6.b_at(t)[path.system.generation])


def test_lift_mass_formula(orbit6, lam6):
    nu = 7.0
    path = lift_and_rescale(orbit6, nu, lam6)
    t = 0.3 * path.T
    mass = np.sum(np.abs(path.beta(t)) ** 2)
    b = orbit6.b_at(t / nu ** 2)
    assert mass == pytest.approx(nu ** -2 * 2 ** (6 - 1) * np.sum(np.abs(b) ** 2), rel=1e-13)


def test_lift_solves_resonant_equations(orbit6, lam6):
    nu = 4.0
    path = lift_and_rescale(orbit6, nu, lam6)
    t, h = 0.4 * path.T, 1e-3
    deriv = (path.beta(t + h) - path.beta(t - h)) / (2 * h)
    assert deriv == pytest.approx(resonant_rhs(path.beta(t), path.system), rel=1e-5, abs=1e-9)


def test_lift_errors(orbit6, lam5):
    with pytest.raises(DynamicsError):
        lift_and_rescale(orbit6, 50.0, lam5)
    with pytest.raises(DynamicsError):
        lift_and_rescale(orbit6, 0.0, lam5)


# ---------------------------------------------------------------- perturbed system

@pytest.fixture(scope="module")
def path6(orbit6, lam6):
    return lift_and_rescale(orbit6, 50.0, lam6)


def _sup(path, **kw):
    tol = kw.pop("tol", 1e-11)
    model = PerturbationModel(nu=50.0, sigma=0.05, seed=0, **kw)
    return simulate_perturbed(path, model, tol=tol, samples=101).certificate


def test_zero_knobs_shadow(path6):
    cert = _sup(path6, tol=1e-12)
    assert cert.sup_xi <= 10 * 1e-12
    assert cert.passed


def test_J1_drift_linear(path6):
    scales = [1.0, 10.0, 100.0]
    drift = [_sup(path6, J1=True, gamma_scale=s).sup_xi for s in scales]
    slope = np.polyfit(np.log(scales), np.log(drift), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.1)


def test_drift_monotone_in_amplitudes(path6):
    j2 = [_sup(path6, J2amplitude=a).sup_M for a in (0.0, 1e-5, 1e-4, 1e-3)]
    assert all(x <= y for x, y in zip(j2, j2[1:])) and j2[-1] > j2[0]
    rr = [_sup(path6, Rmodel=a).sup_M for a in (0.0, 0.3, 3.0, 30.0)]
    assert all(x <= y for x, y in zip(rr, rr[1:])) and rr[-1] > rr[0]


def test_basin_precondition(path6):
    model = PerturbationModel(nu=50.0)
    start = path6.beta(0.0).copy()
    start[0] += 0.02  # basin radius is nu^-1.2 ~ 0.0091
    with pytest.raises(BasinError):
        simulate_perturbed(path6, model, state0=start)
    with pytest.raises(BasinError):
        simulate_perturbed(path6, model, Y0=np.array([1e-3, 0.0]))
    with pytest.raises(DynamicsError):
        simulate_perturbed(path6, PerturbationModel(nu=40.0))


def test_blowup_guard(path6):
    with pytest.raises(IntegrationError, match="blow-up"):
        simulate_perturbed(path6, PerturbationModel(nu=50.0), blowup=1e-6)


def test_model_validation_and_bounds_scale(lam6):
    with pytest.raises(DynamicsError):
        PerturbationModel(J2amplitude=-1.0)
    with pytest.raises(DynamicsError):
        PerturbationModel(nu=0.0)
    m = PerturbationModel.at_bounds(lam6, eps=0.1)
    f = min(math.hypot(j.m, j.n) for j in lam6.modes())
    assert m.J1 and m.J2amplitude == pytest.approx(f ** -0.8) and m.Rmodel == pytest.approx(0.1 ** -0.5)
    assert PerturbationModel().is_zero() and not m.is_zero()


def test_perturbed_run_deterministic(path6):
    a = _sup(path6, J1=True, J2amplitude=1e-4, Rmodel=1.0)
    b = _sup(path6, J1=True, J2amplitude=1e-4, Rmodel=1.0)
    assert np.array_equal(a.M, b.M)


# ---------------------------------------------------------------- norms

def test_norms_single_mode():
    rep = norm_report({(3, 4): 0.5}, (0.5, 1.0))
    assert rep.hs[0.5] == pytest.approx(0.5 * 6 ** 0.5)
    assert rep.hs[1.0] == pytest.approx(0.5 * 6)
    assert rep.l1 == 0.5 and rep.l2 == 0.5


def test_l2_is_root_mass():
    rng = np.random.default_rng(0)
    modes = [(int(a), int(b)) for a, b in rng.integers(-50, 50, size=(20, 2))]
    vals = rand_state(1, 20)
    rep = norm_report((modes, vals))
    assert rep.l2 == pytest.approx(math.sqrt(np.sum(np.abs(vals) ** 2)))


def test_growth_target_values():
    assert growth_target(8, 0.5) == 0.5
    assert growth_target(4, 0.3) == 0.125
