import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import Polynomial
from scipy.integrate import solve_bvp

from giant_vortex.grid import build_grid
from giant_vortex.linear1d import ModeProblem, extrapolated_blow_up, solve_linear_modes
from giant_vortex.oscillator import (
    HermiteExpansion,
    SolvabilityError,
    apply_shifted_oscillator,
    asymptotic_gamma,
    asymptotic_lambda1,
    compute_K_prime,
    correction_P,
    correction_Q,
    correction_tau,
    corrections,
    expansion_profile,
    hermite_functions,
    interaction_term,
    moment_integrals,
    oscillator_eigenfunction,
    project,
    project_poly,
    quad,
    residual_P,
    solve_shifted_oscillator,
    xi1,
)

D = 0.5
X = np.linspace(-12, 12, 24001)
DX = X[1] - X[0]


def _apply_fd(u):
    """(-d^2/dx^2 + x^2) u by central differences on X."""
    out = np.zeros_like(u)
    out[1:-1] = -(u[2:] - 2 * u[1:-1] + u[:-2]) / DX**2 + X[1:-1] ** 2 * u[1:-1]
    return out


@pytest.mark.parametrize("j, level", [(1, 1.0), (2, 3.0), (3, 5.0)])
def test_eigenfunctions(j, level):
    u = oscillator_eigenfunction(j, X)
    assert np.trapezoid(u * u, X) == pytest.approx(1.0, abs=1e-12)
    core = slice(1, -1)
    assert np.max(np.abs(_apply_fd(u)[core] - level * u[core])) <= 1e-6 * np.abs(u).max() * level
    if j == 2:
        assert np.allclose(oscillator_eigenfunction(2, -X), -u, atol=1e-15)
    assert np.allclose(oscillator_eigenfunction(1, X), xi1(X), atol=1e-15)
    with pytest.raises(ValueError):
        oscillator_eigenfunction(0, X)


def test_orthonormal_basis():
    H = hermite_functions(40, X)
    gram = H @ H.T * DX
    assert np.allclose(gram, np.eye(41), atol=1e-10)
    assert abs(quad(lambda x: xi1(x) * oscillator_eigenfunction(2, x))) <= 1e-12


def test_moments():
    m = moment_integrals()
    assert m["xi4"] == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-14)
    assert m["x2_xi2"] == pytest.approx(0.5, rel=1e-14)
    assert m["x4_xi2"] == pytest.approx(0.75, rel=1e-14)
    assert abs(m["x_xi2"]) <= 1e-15


def test_quadrature_exact_on_high_polynomials():
    # int x^158 e^{-x^2} = Gamma(79.5)
    val = quad(lambda x: x**158 * np.exp(-x * x) * np.exp(x * x) * np.exp(-x * x))
    assert val == pytest.approx(math.gamma(79.5), rel=1e-12)


def test_shifted_solver_examples():
    zero = HermiteExpansion(np.zeros(41))
    assert np.all(solve_shifted_oscillator(zero, 0.0).coefficients == 0)
    c = np.zeros(41)
    c[1] = 1.0
    u = solve_shifted_oscillator(HermiteExpansion(c))
    assert u.coefficients[1] == 0.5 and np.count_nonzero(u.coefficients) == 1
    with pytest.raises(SolvabilityError):
        solve_shifted_oscillator(HermiteExpansion(np.eye(41)[0]))


def test_shifted_solver_against_bvp():
    dxi = lambda x: -x * xi1(x)  # noqa: E731
    u = solve_shifted_oscillator(project(dxi), 0.0)
    # oracle: -u'' + (x^2 - 1) u = xi1' on [-10, 10], zero ends
    def rhs(x, y):
        return np.vstack([y[1], (x * x - 1) * y[0] - dxi(x)])

    xs = np.linspace(-10, 10, 2001)
    sol = solve_bvp(rhs, lambda a, b: np.array([a[0], b[0]]), xs, np.zeros((2, xs.size)), tol=1e-10,
                    max_nodes=200000)
    assert sol.success
    # the BVP solution is unique up to adding xi1, odd rhs makes it odd
    assert np.max(np.abs(sol.sol(xs)[0] - u(xs))) <= 1e-6


@given(st.lists(st.floats(-1, 1), min_size=40, max_size=40), st.floats(-2, 2))
def test_apply_then_solve_round_trip(tail, c0):
    c = np.array([c0] + tail)
    back = solve_shifted_oscillator(apply_shifted_oscillator(HermiteExpansion(c)), c0)
    assert np.allclose(back.coefficients, c, rtol=0, atol=1e-12)


def test_projection_truncation_adequacy():
    cube = project(lambda x: xi1(x) ** 3, j_max=40, scale=2.0)
    assert cube.tail_mass(4) <= 1e-10 * np.sum(cube.coefficients**2)
    longer = project(lambda x: xi1(x) ** 3, j_max=80, scale=2.0)
    assert np.allclose(longer.coefficients[:41], cube.coefficients, atol=1e-10)
    p = project_poly(Polynomial([0, 1, 0, 1]))
    assert p.tail_mass(4) <= 1e-20


@pytest.mark.parametrize("omega, n", [(100.0, 100), (100.0, 85), (200.0, 215), (400.0, 400)])
def test_P_properties(omega, n):
    m = ModeProblem(n, omega, D)
    P = correction_P(m)
    assert P.degree() == 3
    assert np.allclose(P.coef[0::2], 0, atol=1e-12)
    assert residual_P(m, P) <= 1e-8
    assert abs(quad(lambda x: P(x) * xi1(x) ** 2)) <= 1e-10
    # finite-difference oracle for the ODE
    u = P(X) * xi1(X)
    inv_R, a3 = 1 / m.R_n, float(m.dV(3)) * m.h_n**4 / 6
    rhs = inv_R * (-X * xi1(X)) - a3 * X**3 * xi1(X)
    err = (_apply_fd(u) - u - rhs)[1:-1]
    assert math.sqrt(np.sum(err**2) * DX) <= 1e-5


@pytest.mark.parametrize("omega, n", [(100.0, 100), (400.0, 380)])
def test_P_closed_form(omega, n):
    # P = c1 x + c3 x^3 with -p'' + 2x p' = -x/R - a3 x^3: the drift and cubic
    # parts superpose; V''' h^4 is O(1), so neither part dominates
    m = ModeProblem(n, omega, D)
    a3 = float(m.dV(3)) * m.h_n**4 / 6
    c3 = -a3 / 6
    c1 = -0.5 / m.R_n + 3 * c3
    P = correction_P(m)
    assert P.coef[1] == pytest.approx(c1, abs=1e-12)
    assert P.coef[3] == pytest.approx(c3, abs=1e-12)


def test_P_depends_continuously_on_n():
    omega = 200.0
    P0 = correction_P(ModeProblem(200, omega, D)).coef
    for k in (1, 5, 20):
        Pk = correction_P(ModeProblem(200 + k, omega, D)).coef
        assert np.max(np.abs(Pk - P0)) <= 2.0 * k / omega


def test_K_prime_first_term_and_bounds():
    assert quad(lambda x: xi1(x) * x * (-x * xi1(x))) == pytest.approx(-0.5, abs=1e-14)
    Ks = [compute_K_prime(ModeProblem(n, 200.0, D)) for n in range(172, 229)]
    assert all(abs(k) < 2 for k in Ks)


def test_asymptotic_lambda_residual_trend():
    res = []
    for omega in (100.0, 400.0):
        m = ModeProblem(int(omega), omega, D)
        g = build_grid(m)
        lam = solve_linear_modes(m, g).lambda1
        lam_f = solve_linear_modes(m, g.refine()).lambda1
        res.append(abs((4 * lam_f - lam) / 3 - asymptotic_lambda1(m)))
    assert res[0] / res[1] >= 1.6


def test_asymptotic_lambda_examples():
    for omega in (100.0, 400.0):
        m = ModeProblem(int(omega), omega, D)
        lead = m.V_min + m.harmonic_level
        assert lead == pytest.approx(math.sqrt(2 * D + 4) * omega, rel=1e-13)
    lam = [asymptotic_lambda1(ModeProblem(n, 100.0, D)) for n in (99, 100, 101)]
    assert lam[0] - 2 * lam[1] + lam[2] > 0


@pytest.mark.parametrize("n", [90, 100, 112])
def test_Q_properties(n):
    m = ModeProblem(n, 100.0, D)
    P = correction_P(m)
    K = compute_K_prime(m, P)
    Q = correction_Q(m, K, P)
    assert Q.coefficients[0] == pytest.approx(-0.5 * quad(lambda x: (P(x) * xi1(x)) ** 2), abs=1e-8)
    assert Q.parity_leak("even") <= 1e-10
    with pytest.raises(SolvabilityError):
        correction_Q(m, K + 1e-3, P)


def test_expansion_matches_blow_up():
    errs = []
    for omega in (100.0, 400.0):
        m = ModeProblem(int(omega), omega, D)
        x, xi = extrapolated_blow_up(m, build_grid(m))
        ref = expansion_profile(m, x)
        errs.append(math.sqrt(np.trapezoid((xi - ref) ** 2, x)))
    assert errs[0] / errs[1] >= 2.5


def test_tau_properties():
    m = ModeProblem(100, 100.0, D)
    P = correction_P(m)
    tau0, _ = correction_tau(m, 0.0)
    assert np.allclose(tau0(X[::100]), P(X[::100]) * xi1(X[::100]), atol=1e-12)
    for G in (0.5, 1.0, 2.0):
        tau, J = correction_tau(m, G)
        assert abs(tau.coefficients[0]) <= 1e-10
        assert math.isfinite(J)
    with pytest.raises(ValueError):
        correction_tau(m, -1.0)


def test_asymptotic_gamma_examples():
    m = ModeProblem(100, 100.0, D)
    assert asymptotic_gamma(m, 0.0) == asymptotic_lambda1(m)
    expected = (1 / (2 * math.pi)) * (2 * D + 4) ** 0.25 * 10 / math.sqrt(2 * math.pi)
    assert interaction_term(m, 1.0) == pytest.approx(expected, rel=1e-12)


def test_corrections_record():
    res = corrections(ModeProblem(100, 100.0, D), 1.0)
    d = res.as_dict()
    assert set(d) == {"n", "P_coeffs", "K_prime", "J_prime", "lambda1_asym", "gamma_asym"}
    assert len(d["P_coeffs"]) == 4 and d["gamma_asym"] > d["lambda1_asym"]
