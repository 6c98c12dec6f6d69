import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from giant_vortex.coupled2d import (
    CondensateState,
    chemical_potential,
    cubic_term,
    cubic_term_direct,
    default_mode_range,
    density_deviation,
    energy_F_omega,
    gradient,
    initial_state,
    linear_ground_states,
    minimize_full,
    mode_mass_spectrum,
    quartic_integral,
    quartic_lower_bound,
    shared_grid,
)
from giant_vortex.grid import RadialField, integrate_rdr
from giant_vortex.linear1d import ModeProblem, mode_window, select_nstar
from giant_vortex.nonlinear1d import energy_En, quartic_rdr, solve_ground_state
from giant_vortex.params import ScaledParams
from giant_vortex.validation import polar_energy, random_state

D = 0.5
OMEGA = 50.0


@pytest.fixture(scope="module")
def setup50():
    p = ScaledParams(OMEGA, D, 1.0)
    mr = default_mode_range(OMEGA)
    g = shared_grid(OMEGA, D, mr)
    et = linear_ground_states(p, mr, g)
    n_star = select_nstar(OMEGA, D, mode_window(OMEGA), {n: e.lambda1 for n, e in et.items()}).n_star
    return p, mr, g, et, n_star


@pytest.fixture(scope="module")
def minimizer50(setup50):
    p, mr, g, et, n_star = setup50
    history = []
    s, rep = minimize_full(initial_state(p, mr, g, seed=0, eigen_table=et), eigen_table=et,
                           callback=lambda it, e, modes: history.append(
                               2 * math.pi * float(np.sum(integrate_rdr(np.abs(modes) ** 2, g)))))
    return s, rep, history


def _single(p, n, f, mr):
    return CondensateState.single_mode(p, n, f, mr)


def test_default_range_and_state_invariants(setup50):
    p, mr, g, et, _ = setup50
    c = round(OMEGA)
    assert mr == (c - math.ceil(2 * math.sqrt(OMEGA)), c + math.ceil(2 * math.sqrt(OMEGA)))
    with pytest.raises(ValueError):
        CondensateState(p, mr, g, np.zeros((3, g.n_points)))
    with pytest.raises(ValueError):
        CondensateState(p, mr, g, np.zeros((mr[1] - mr[0] + 1, g.n_points))).normalized()


def test_quartic_examples(setup50):
    p, mr, g, et, _ = setup50
    f = et[50].g1
    s = _single(p, 50, f, mr)
    assert quartic_integral(s) == pytest.approx(2 * math.pi * integrate_rdr(f.values**4, g), rel=1e-12)
    assert quartic_lower_bound(s) == pytest.approx(quartic_integral(s), rel=1e-12)
    assert quartic_integral(s.with_modes(np.zeros_like(s.modes))) == 0.0
    two = np.zeros_like(s.modes)
    two[50 - mr[0]] = et[50].g1.values / math.sqrt(2)
    two[52 - mr[0]] = et[52].g1.values / math.sqrt(2)
    s2 = s.with_modes(two)
    assert quartic_integral(s2) == pytest.approx(polar_energy(s2)[1], rel=1e-8)


def test_disjoint_supports_have_no_cross_terms(setup50):
    p, mr, g, _, _ = setup50
    r = g.r
    a = np.where(r < 0.9, np.exp(-((r - 0.8) / 0.03) ** 2), 0.0)
    b = np.where(r > 1.1, np.exp(-((r - 1.2) / 0.03) ** 2), 0.0)
    modes = np.zeros((mr[1] - mr[0] + 1, g.n_points), dtype=complex)
    modes[3], modes[7] = a, 1j * b
    s = CondensateState(p, mr, g, modes)
    self_terms = 2 * math.pi * integrate_rdr(a**4 + b**4, g)
    assert quartic_integral(s) == pytest.approx(self_terms, rel=1e-12)
    assert quartic_lower_bound(s) == pytest.approx(self_terms, rel=1e-12)


@given(st.integers(0, 10**6), st.integers(1, 9))
def test_lower_bound_holds(seed, k):
    s = random_state(np.random.default_rng(seed), 100.0, D, 1.0, k, points_per_width=20)
    q, lb = quartic_integral(s), quartic_lower_bound(s)
    assert q >= lb - 1e-12 * q


@given(st.integers(0, 10**6), st.integers(1, 7))
def test_cubic_fft_matches_direct(seed, k):
    s = random_state(np.random.default_rng(seed), 100.0, D, 1.0, k, points_per_width=20)
    fast, slow = cubic_term(s.modes), cubic_term_direct(s.modes)
    assert np.max(np.abs(fast - slow)) <= 1e-12 * np.max(np.abs(slow))


def test_energy_examples(setup50):
    p, mr, g, et, n_star = setup50
    m = ModeProblem(n_star, OMEGA, D)
    f = et[n_star].g1
    s = _single(p, n_star, f, mr)
    assert energy_F_omega(s)[0] == pytest.approx(energy_En(f, m, p.G), rel=1e-12)
    assert energy_F_omega(s)[0] == pytest.approx(et[n_star].lambda1 + p.G * quartic_rdr(f), rel=1e-10)


@pytest.mark.parametrize("ppw", [20, 40, 80])
def test_energy_matches_polar_oracle(ppw):
    rng = np.random.default_rng(ppw)
    for _ in range(3):
        s = random_state(rng, 100.0, D, 1.0, 5, points_per_width=ppw)
        e, br = energy_F_omega(s)
        e_pol, q_pol = polar_energy(s)
        assert e == pytest.approx(e_pol, rel=1e-7)
        assert br["quartic"] == pytest.approx(q_pol, rel=1e-7)
        assert br["total"] == e
        assert sum(br["per_mode"].values()) == pytest.approx(br["quadratic"], rel=1e-12)


@given(st.integers(0, 10**6), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_rotation_and_phase_invariance(seed, phi, alpha):
    s = random_state(np.random.default_rng(seed), 100.0, D, 1.0, 5, points_per_width=20)
    e = energy_F_omega(s)[0]
    rot = s.with_modes(s.modes * np.exp(1j * s.ns * phi)[:, None])
    ph = s.with_modes(s.modes * np.exp(1j * alpha))
    assert energy_F_omega(rot)[0] == pytest.approx(e, rel=1e-12)
    assert energy_F_omega(ph)[0] == pytest.approx(e, rel=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    s = random_state(rng, 100.0, D, 1.0, 5)
    grad = gradient(s)
    g = s.grid
    for _ in range(5):
        d = rng.standard_normal(s.modes.shape) + 1j * rng.standard_normal(s.modes.shape)
        d[:, 0] = d[:, -1] = 0
        eps = 1e-5
        fd = (energy_F_omega(s.with_modes(s.modes + eps * d))[0]
              - energy_F_omega(s.with_modes(s.modes - eps * d))[0]) / (2 * eps)
        an = 2 * math.pi * float(np.sum(integrate_rdr(np.real(np.conj(grad) * d), g)))
        assert fd == pytest.approx(an, rel=1e-6)


def test_zero_coupling_minimizer(setup50):
    p, mr, g, et, n_star = setup50
    p0 = ScaledParams(OMEGA, D, 0.0)
    s, rep = minimize_full(initial_state(p0, mr, g, seed=1, eigen_table=et), eigen_table=et)
    masses = s.mode_masses()
    assert np.sum(masses) - masses[n_star - mr[0]] <= 1e-8
    assert energy_F_omega(s)[0] == pytest.approx(et[n_star].lambda1, rel=1e-10)
    assert chemical_potential(s) == pytest.approx(et[n_star].lambda1, rel=1e-10)


def test_coupled_minimizer(setup50, minimizer50):
    p, mr, g, et, n_star = setup50
    s, rep, mass_history = minimizer50
    m = ModeProblem(n_star, OMEGA, D)
    gam = solve_ground_state(m, 1.0, g).gamma_n
    energy = energy_F_omega(s)[0]
    assert gam - 0.5 <= energy <= gam + 1e-6
    masses, moment = mode_mass_spectrum(s, n_star)
    assert masses[n_star] >= 0.95
    assert sum(masses.values()) == pytest.approx(1.0, abs=1e-12)
    assert moment <= 5.0
    mu = chemical_potential(s)
    assert mu <= 2 * energy
    assert mu == pytest.approx(rep.mu, rel=1e-9)
    assert rep.boundary_mass < 1e-8
    assert max(abs(x - 1.0) for x in mass_history) <= 1e-9
    hist = np.array(rep.history)
    # energy is monotone inside each stage; the continuation restarts it once
    jumps = np.flatnonzero(np.diff(hist) > 1e-13 * np.abs(hist[1:]))
    assert len(jumps) <= 1
    ref = et[n_star].g1
    norm = math.sqrt(2 * math.pi * integrate_rdr(ref.values**4, g))
    assert density_deviation(s, ref) / norm <= 0.2


def test_single_mode_identities(setup50):
    p, mr, g, et, n_star = setup50
    m = ModeProblem(n_star, OMEGA, D)
    r = solve_ground_state(m, 1.0, g)
    s = _single(p, n_star, r.Psi_n, mr)
    assert chemical_potential(s) == pytest.approx(r.multiplier, rel=1e-12)
    assert mode_mass_spectrum(s, n_star)[1] == 0.0
    assert density_deviation(s, r.Psi_n) <= 1e-14


def test_density_deviation_matches_polar_grid():
    rng = np.random.default_rng(7)
    s = random_state(rng, 100.0, D, 1.0, 5)
    ref = RadialField(s.grid, np.real(s.modes[2]) / math.sqrt(2 * math.pi * integrate_rdr(np.abs(s.modes[2]) ** 2, s.grid)))
    n_theta = 64
    theta = 2 * math.pi * np.arange(n_theta) / n_theta
    u = np.exp(1j * np.outer(theta, s.ns)) @ s.modes
    diff2 = (np.abs(u) ** 2 - ref.values**2) ** 2
    oracle = math.sqrt(2 * math.pi / n_theta * np.sum(integrate_rdr(diff2, s.grid)))
    assert density_deviation(s, ref) == pytest.approx(oracle, rel=1e-7)
