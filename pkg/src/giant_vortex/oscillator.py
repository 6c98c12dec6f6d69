"""Hermite-function machinery for the semiclassical expansions of the mode problems.

Everything is expressed in the normalized eigenfunctions psi_j of
-d^2/dx^2 + x^2 (eigenvalue 2j + 1), with psi_0 = xi_1 = pi^(-1/4) exp(-x^2/2).
The correction problems all have the form (-d^2/dx^2 + x^2 - 1) u = rhs,
which is diagonal in that basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.hermite import hermgauss

from .linear1d import ModeProblem

J_MAX = 40
GH_NODES = 80
SOLVABILITY_TOL = 1e-8


class SolvabilityError(ValueError):
    """Right-hand side not orthogonal to xi_1."""


@lru_cache(maxsize=None)
def _gauss_hermite(n_nodes: int = GH_NODES):
    x, w = hermgauss(n_nodes)
    return x, w


def quad(f, scale: float = 1.0, n_nodes: int = GH_NODES) -> float:
    """Integral of f over the real line for f ~ exp(-scale x^2) * polynomial.

    Exact for polynomial degree <= 2 n_nodes - 1.
    """
    y, w = _gauss_hermite(n_nodes)
    s = math.sqrt(scale)
    x = y / s
    return float(np.sum(w * np.exp(y * y) * f(x)) / s)


def hermite_functions(j_max: int, x) -> np.ndarray:
    """Rows psi_0..psi_{j_max} at `x`, by the normalized three-term recurrence."""
    x = np.asarray(x, dtype=float)
    out = np.empty((j_max + 1,) + x.shape)
    out[0] = math.pi**-0.25 * np.exp(-0.5 * x * x)
    if j_max >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for j in range(1, j_max):
        out[j + 1] = math.sqrt(2.0 / (j + 1)) * x * out[j] - math.sqrt(j / (j + 1)) * out[j - 1]
    return out


@lru_cache(maxsize=None)
def _hermite_polys(j_max: int) -> tuple[Polynomial, ...]:
    # psi_j = p_j * xi_1, same recurrence applied to the polynomial factors
    polys = [Polynomial([1.0])]
    if j_max >= 1:
        polys.append(Polynomial([0.0, math.sqrt(2.0)]))
    x = Polynomial([0.0, 1.0])
    for j in range(1, j_max):
        polys.append(math.sqrt(2.0 / (j + 1)) * x * polys[j] - math.sqrt(j / (j + 1)) * polys[j - 1])
    return tuple(polys)


def oscillator_eigenfunction(j: int, x) -> np.ndarray:
    """Normalized j-th eigenfunction (j >= 1) of -d^2/dx^2 + x^2, eigenvalue 2j - 1."""
    if j < 1:
        raise ValueError("eigenfunctions are numbered from 1")
    return hermite_functions(j - 1, x)[j - 1]


def xi1(x):
    return math.pi**-0.25 * np.exp(-0.5 * np.asarray(x, dtype=float) ** 2)


@lru_cache(maxsize=None)
def moment_integrals() -> dict[str, float]:
    """Gaussian moments used throughout the asymptotic formulas."""
    return {
        "xi4": quad(lambda x: xi1(x) ** 4, scale=2.0),
        "x2_xi2": quad(lambda x: x * x * xi1(x) ** 2),
        "x4_xi2": quad(lambda x: x**4 * xi1(x) ** 2),
        "x_xi2": quad(lambda x: x * xi1(x) ** 2),
    }


@dataclass(frozen=True)
class HermiteExpansion:
    """sum_j c_j psi_j, j = 0..J_max."""

    coefficients: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=float))

    @property
    def J_max(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x) -> np.ndarray:
        return self.coefficients @ hermite_functions(self.J_max, x)

    def derivative(self) -> HermiteExpansion:
        # psi_j' = sqrt(j/2) psi_{j-1} - sqrt((j+1)/2) psi_{j+1}
        c = self.coefficients
        out = np.zeros(len(c) + 1)
        for j, cj in enumerate(c):
            if j > 0:
                out[j - 1] += math.sqrt(j / 2.0) * cj
            out[j + 1] -= math.sqrt((j + 1) / 2.0) * cj
        return HermiteExpansion(out)

    def to_polynomial(self) -> Polynomial:
        """The polynomial P with self = P * xi_1 (always exists for finite sums)."""
        polys = _hermite_polys(self.J_max)
        total = Polynomial([0.0])
        for cj, pj in zip(self.coefficients, polys):
            if cj != 0.0:
                total = total + cj * pj
        return total

    def tail_mass(self, k: int = 5) -> float:
        return float(np.sum(self.coefficients[-k:] ** 2))

    def parity_leak(self, parity: str) -> float:
        """Largest coefficient of the wrong parity ('odd' or 'even' function)."""
        c = self.coefficients
        wrong = c[0::2] if parity == "odd" else c[1::2]
        return float(np.max(np.abs(wrong))) if len(wrong) else 0.0

    def as_list(self) -> list[float]:
        return [float(v) for v in self.coefficients]


def project(f, j_max: int = J_MAX, scale: float = 1.0) -> HermiteExpansion:
    """Hermite coefficients <psi_j, f> by Gauss-Hermite quadrature.

    `scale` is the Gaussian decay rate of psi_j * f (1 for polynomial * xi_1,
    2 for polynomial * xi_1^3).
    """
    y, w = _gauss_hermite(GH_NODES)
    s = math.sqrt(scale)
    x = y / s
    weights = w * np.exp(y * y) / s
    fx = f(x)
    return HermiteExpansion(hermite_functions(j_max, x) @ (weights * fx))


def project_poly(p: Polynomial, j_max: int = J_MAX) -> HermiteExpansion:
    """Coefficients of p(x) xi_1(x); exact for deg p <= 2 GH_NODES - 1 - j_max."""
    return project(lambda x: p(x) * xi1(x), j_max)


def apply_shifted_oscillator(u: HermiteExpansion) -> HermiteExpansion:
    """(-d^2/dx^2 + x^2 - 1) u in coefficient form: multiply c_j by 2j."""
    return HermiteExpansion(2.0 * np.arange(u.J_max + 1) * u.coefficients)


def solve_shifted_oscillator(rhs: HermiteExpansion, constraint_value: float = 0.0,
                             tol: float = SOLVABILITY_TOL) -> HermiteExpansion:
    """Solve (-u'' + x^2 u - u) = rhs with <xi_1, u> = constraint_value."""
    if abs(rhs.coefficients[0]) > tol:
        raise SolvabilityError(
            f"right-hand side has <xi_1, rhs> = {rhs.coefficients[0]:.3e}, not orthogonal to xi_1"
        )
    c = rhs.coefficients
    j = np.arange(len(c))
    u = np.empty_like(c)
    u[0] = constraint_value
    u[1:] = c[1:] / (2.0 * j[1:])
    return HermiteExpansion(u)


def _coefficients(m: ModeProblem) -> tuple[float, float, float]:
    """(1/R_n, a3, a4) with a3 = V'''h^4/3! and a4 = V''''h^4/4!."""
    h4 = m.h_n**4
    return 1.0 / m.R_n, float(m.dV(3)) * h4 / 6.0, float(m.dV(4)) * h4 / 24.0


X = Polynomial([0.0, 1.0])


def _dpoly(p: Polynomial) -> Polynomial:
    """(p xi_1)' = (p' - x p) xi_1."""
    return p.deriv() - X * p


def _P_rhs_poly(m: ModeProblem) -> Polynomial:
    inv_R, a3, _ = _coefficients(m)
    return -inv_R * X - a3 * X**3  # (1/R) xi_1' - a3 x^3 xi_1, over xi_1


def residual_P(m: ModeProblem, P: Polynomial) -> float:
    """L^2 norm of (-d^2/dx^2 + x^2 - 1)(P xi_1) - rhs, exact in the polynomial picture.

    (-d^2/dx^2 + x^2 - 1)(p xi_1) = (-p'' + 2 x p') xi_1.
    """
    resid = -P.deriv(2) + 2.0 * X * P.deriv() - _P_rhs_poly(m)
    return math.sqrt(quad(lambda x: (resid(x) * xi1(x)) ** 2))


def correction_P(m: ModeProblem, residual_tol: float = 1e-8) -> Polynomial:
    """P_n with P_n xi_1 solving (-u'' + x^2 u - u = rhs): odd, degree 3, orthogonal to xi_1."""
    u = solve_shifted_oscillator(project_poly(_P_rhs_poly(m)), 0.0)
    P = u.to_polynomial().trim(1e-14)
    r = residual_P(m, P)
    if r > residual_tol:
        raise ArithmeticError(f"P_n does not solve its ODE: residual {r:.3e}")
    return P


def compute_K_prime(m: ModeProblem, P: Polynomial | None = None) -> float:
    """Order-one constant of the ground level: solvability constant of the Q_n problem."""
    inv_R, a3, a4 = _coefficients(m)
    if P is None:
        P = correction_P(m)
    integrand = X**2 * inv_R**2 * -1.0 + a4 * X**4 - inv_R * _dpoly(P) + a3 * X**3 * P
    return quad(lambda x: integrand(x) * xi1(x) ** 2)


def _Q_rhs_poly(m: ModeProblem, P: Polynomial, K_prime: float) -> Polynomial:
    inv_R, a3, a4 = _coefficients(m)
    # K' xi_1 - (x/R^2) xi_1' - a4 x^4 xi_1 + (P xi_1)'/R - a3 x^3 P xi_1, over xi_1
    return K_prime + inv_R**2 * X**2 - a4 * X**4 + inv_R * _dpoly(P) - a3 * X**3 * P


def correction_Q(m: ModeProblem, K_prime: float | None = None,
                 P: Polynomial | None = None) -> HermiteExpansion:
    """Q_n xi_1 as a Hermite expansion (even, <xi_1, Q xi_1> = -1/2 int P^2 xi_1^2)."""
    if P is None:
        P = correction_P(m)
    if K_prime is None:
        K_prime = compute_K_prime(m, P)
    rhs = project_poly(_Q_rhs_poly(m, P, K_prime))
    constraint = -0.5 * quad(lambda x: (P(x) * xi1(x)) ** 2)
    return solve_shifted_oscillator(rhs, constraint)


def correction_tau(m: ModeProblem, G: float) -> tuple[HermiteExpansion, float]:
    """First nonlinear correction tau_n and the order-one energy constant J'_n.

    J'_n is the constant term of gamma_n: the solvability constant of the
    second-order problem (which fixes the multiplier) minus the change of the
    interaction energy at first order, 2G/(pi R_n) * int xi_1^3 tau_n.
    """
    if G < 0:
        raise ValueError("G must be >= 0")
    inv_R, a3, a4 = _coefficients(m)
    beta = G * inv_R / math.pi
    xi4 = moment_integrals()["xi4"]
    lin = project_poly(-inv_R * X - a3 * X**3 + beta * xi4)
    cubic = project(lambda x: xi1(x) ** 3, scale=2.0)
    rhs = HermiteExpansion(lin.coefficients - beta * cubic.coefficients)
    tau = solve_shifted_oscillator(rhs, 0.0)
    dtau = tau.derivative()

    def t(x):
        return tau(x)

    base = quad(lambda x: (-(inv_R**2) * x * x + a4 * x**4) * xi1(x) ** 2)
    drift = -inv_R * dtau.coefficients[0]
    cubic_x = a3 * quad(lambda x: x**3 * xi1(x) * t(x))
    xi3_tau = quad(lambda x: xi1(x) ** 3 * t(x), scale=2.0)
    multiplier_const = base + drift + cubic_x + 3.0 * beta * xi3_tau
    J_prime = multiplier_const - 2.0 * beta * xi3_tau
    return tau, J_prime


def asymptotic_lambda1(m: ModeProblem) -> float:
    return m.V_min + m.harmonic_level + compute_K_prime(m)


def interaction_term(m: ModeProblem, G: float) -> float:
    """G / (2 pi h_n R_n) * int xi_1^4."""
    return G / (2.0 * math.pi * m.h_n * m.R_n) * moment_integrals()["xi4"]


def asymptotic_gamma(m: ModeProblem, G: float) -> float:
    if G == 0:
        return asymptotic_lambda1(m)
    _, J = correction_tau(m, G)
    return m.V_min + m.harmonic_level + interaction_term(m, G) + J


@dataclass(frozen=True)
class CorrectionResult:
    n: int
    P_coeffs: list[float]
    Q_expansion: HermiteExpansion
    K_prime: float
    tau_expansion: HermiteExpansion
    J_prime: float
    lambda1_asym: float
    gamma_asym: float

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "P_coeffs": self.P_coeffs,
            "K_prime": self.K_prime,
            "J_prime": self.J_prime,
            "lambda1_asym": self.lambda1_asym,
            "gamma_asym": self.gamma_asym,
        }


def corrections(m: ModeProblem, G: float) -> CorrectionResult:
    P = correction_P(m)
    K = compute_K_prime(m, P)
    Q = correction_Q(m, K, P)
    tau, J = correction_tau(m, G)
    lam = m.V_min + m.harmonic_level + K
    gam = m.V_min + m.harmonic_level + interaction_term(m, G) + J
    coeffs = np.zeros(4)
    coeffs[: len(P.coef)] = P.coef[:4]
    return CorrectionResult(m.n, coeffs.tolist(), Q, K, tau, J, lam, gam)


def expansion_profile(m: ModeProblem, x, P: Polynomial | None = None,
                      Q: HermiteExpansion | None = None) -> np.ndarray:
    """xi_1 + h_n P_n xi_1 + h_n^2 Q_n xi_1 at `x`."""
    if P is None:
        P = correction_P(m)
    if Q is None:
        Q = correction_Q(m, P=P)
    x = np.asarray(x, dtype=float)
    return xi1(x) * (1.0 + m.h_n * P(x)) + m.h_n**2 * Q(x)
