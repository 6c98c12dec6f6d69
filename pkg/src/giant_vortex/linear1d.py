"""Linear radial mode problems: V_n, R_n, h_n, the two lowest eigenpairs, n*."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .grid import (
    DEFAULT_POINTS_PER_WIDTH,
    DEFAULT_WIDTH_MULTIPLIER,
    RadialField,
    RadialGrid,
    build_grid,
)
from .tridiag import lowest_eigenpairs

DEFAULT_WINDOW_A = 2.0
DEGENERACY_TOL = 1e-6


class GridTooSmallError(RuntimeError):
    pass


def solve_Rn(n: int, omega: float, D_Omega: float, max_iter: int = 100) -> float:
    """Positive root of R^6 + ((1-D)/D) R^4 = n^2 / (D omega^2).

    Only |n| matters. ``n = 0`` returns 0.0: the well collapses to the origin
    and there is no ModeProblem for it.
    """
    if omega <= 0.0:
        raise ValueError("omega must be > 0")
    if not 0.0 < D_Omega <= 1.0:
        raise ValueError("D_Omega must lie in (0, 1]")
    n = abs(n)
    if n == 0:
        return 0.0
    c = (1.0 - D_Omega) / D_Omega
    target = n * n / (D_Omega * omega * omega)
    # both monomial terms are increasing, so the root is bracketed by the pure ones
    R = min(target ** (1.0 / 6.0), (target / c) ** 0.25) if c > 0 else target ** (1.0 / 6.0)
    for _ in range(max_iter):
        R2 = R * R
        phi = R2 * R2 * (R2 + c) - target
        dphi = R2 * R * (6.0 * R2 + 4.0 * c)
        step = phi / dphi
        R -= step
        if abs(step) <= 1e-15 * R:
            R2 = R * R
            if abs(R2 * R2 * (R2 + c) - target) <= 1e-12 * target:
                return R
    raise RuntimeError(f"solve_Rn did not converge for n={n}, omega={omega}, D={D_Omega}")


def potential_Vn(n: int, omega: float, D_Omega: float, r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("V_n is only defined for r > 0")
    w2 = omega * omega
    r2 = r * r
    return (
        n * n / r2
        - 2.0 * n * omega
        + (1.0 - D_Omega) * w2 * r2
        + 0.5 * D_Omega * w2
        + 0.5 * D_Omega * w2 * r2 * r2
    )


def Vn_derivative(n: int, omega: float, D_Omega: float, order: int, at):
    at = np.asarray(at, dtype=float)
    if np.any(at <= 0.0):
        raise ValueError("derivatives of V_n need r > 0")
    w2 = omega * omega
    n2 = float(n) * n
    if order == 1:
        return -2.0 * n2 / at**3 + 2.0 * (1.0 - D_Omega) * w2 * at + 2.0 * D_Omega * w2 * at**3
    if order == 2:
        return 6.0 * n2 / at**4 + 2.0 * (1.0 - D_Omega) * w2 + 6.0 * D_Omega * w2 * at**2
    if order == 3:
        return -24.0 * n2 / at**5 + 12.0 * D_Omega * w2 * at
    if order == 4:
        return 120.0 * n2 / at**6 + 12.0 * D_Omega * w2
    raise ValueError(f"unsupported derivative order {order}")


@dataclass(frozen=True)
class ModeProblem:
    """Angular mode `n` at (omega, D_Omega); R_n and h_n are derived."""

    n: int
    omega: float
    D_Omega: float
    R_n: float = field(init=False)
    h_n: float = field(init=False)

    def __post_init__(self):
        if self.n == 0:
            raise ValueError("mode n = 0 has no interior well")
        R = solve_Rn(self.n, self.omega, self.D_Omega)
        object.__setattr__(self, "R_n", R)
        object.__setattr__(self, "h_n", oscillator_width(self))

    def V(self, r):
        return potential_Vn(self.n, self.omega, self.D_Omega, r)

    def dV(self, order: int, at=None):
        return Vn_derivative(self.n, self.omega, self.D_Omega, order, self.R_n if at is None else at)

    @property
    def V_min(self) -> float:
        return float(self.V(self.R_n))

    @property
    def harmonic_level(self) -> float:
        """sqrt(V_n''(R_n) / 2) = 1 / h_n^2."""
        return math.sqrt(self.dV(2) / 2.0)


def oscillator_width(m: ModeProblem) -> float:
    """h_n = (2 / V_n''(R_n))^(1/4)."""
    vpp = float(Vn_derivative(m.n, m.omega, m.D_Omega, 2, m.R_n))
    if not vpp > 0.0:
        raise ArithmeticError(f"V_n''(R_n) = {vpp} is not positive")
    return (2.0 / vpp) ** 0.25


@dataclass(frozen=True)
class EigenResult:
    lambda1: float
    lambda2: float
    g1: RadialField
    g2: RadialField
    residual_norms: tuple[float, float]

    @property
    def gap(self) -> float:
        return self.lambda2 - self.lambda1


def radial_operator(m: ModeProblem, g: RadialGrid) -> tuple[np.ndarray, np.ndarray]:
    """Tridiagonal (diag, off) of -w'' + (V_n - 1/(4 r^2)) w on interior nodes.

    Here w = sqrt(r) f, and the end nodes carry the Dirichlet condition.
    """
    r = g.r[1:-1]
    dr2 = g.spacing**2
    diag = 2.0 / dr2 + m.V(r) - 0.25 / (r * r)
    off = np.full(len(r) - 1, -1.0 / dr2)
    return diag, off


def apply_radial_operator(m: ModeProblem, g: RadialGrid, f: np.ndarray) -> np.ndarray:
    """(-f'' - f'/r + V_n f) on the nodes, via the symmetrised stencil; 0 at the ends."""
    r = g.r
    w = np.sqrt(r) * f
    dr2 = g.spacing**2
    out = np.zeros_like(w)
    out[1:-1] = (
        (2.0 * w[1:-1] - w[:-2] - w[2:]) / dr2
        + (m.V(r[1:-1]) - 0.25 / r[1:-1] ** 2) * w[1:-1]
    )
    return out / np.sqrt(r)


def _field_from_interior(g: RadialGrid, w_interior: np.ndarray) -> np.ndarray:
    w = np.zeros(g.n_points)
    w[1:-1] = w_interior
    f = w / np.sqrt(g.r)
    return f / math.sqrt(2.0 * math.pi * np.sum(w * w) * g.spacing)


def solve_linear_modes(m: ModeProblem, g: RadialGrid, how_many: int = 2,
                       check_boundary: bool = True) -> EigenResult:
    """Lowest eigenpairs of -f'' - f'/r + V_n f in L^2(r dr) on the grid.

    Only ``how_many == 2`` populates both fields; ``how_many == 1`` leaves the
    second pair as NaN / zero.
    """
    if how_many not in (1, 2):
        raise ValueError("how_many must be 1 or 2")
    diag, off = radial_operator(m, g)
    values, vectors = lowest_eigenpairs(diag, off, how_many)
    fields, residuals = [], []
    for k in range(how_many):
        f = _field_from_interior(g, vectors[:, k])
        if k == 0:
            f = f if f[np.argmax(np.abs(f))] > 0 else -f
        else:
            # fix the sign of the excited state: positive outer lobe
            f = f if f[np.argmax(np.abs(f) * (g.r > m.R_n))] > 0 else -f
        res = apply_radial_operator(m, g, f) - values[k] * f
        res[0] = res[-1] = 0.0
        residuals.append(math.sqrt(2.0 * math.pi * np.trapezoid(res**2 * g.r, dx=g.spacing)))
        fields.append(f)
    if check_boundary:
        g1 = fields[0]
        edge = 2.0 * math.pi * g.spacing * (
            np.sum(g1[:4] ** 2 * g.r[:4]) + np.sum(g1[-4:] ** 2 * g.r[-4:])
        )
        if edge > 1e-8:
            raise GridTooSmallError(
                f"ground state of mode {m.n} has mass {edge:.3g} at the grid boundary"
            )
    if how_many == 1:
        fields.append(np.zeros(g.n_points))
        values = np.append(values, np.nan)
        residuals.append(np.nan)
    return EigenResult(
        lambda1=float(values[0]),
        lambda2=float(values[1]),
        g1=RadialField(g, fields[0]),
        g2=RadialField(g, fields[1]),
        residual_norms=(residuals[0], residuals[1]),
    )


def extrapolated_eigenvalues(m: ModeProblem, g: RadialGrid) -> tuple[float, float]:
    """Richardson-extrapolated (lambda1, lambda2) from `g` and its refinement.

    The three-point stencil has an O(spacing^2) eigenvalue error, which grows
    like omega in absolute terms; the extrapolation cancels it.
    """
    coarse = solve_linear_modes(m, g)
    fine = solve_linear_modes(m, g.refine())
    l1 = (4.0 * fine.lambda1 - coarse.lambda1) / 3.0
    l2 = (4.0 * fine.lambda2 - coarse.lambda2) / 3.0
    return l1, l2


def blow_up_profile(e: EigenResult, m: ModeProblem):
    """Rescaled ground state xi(x) = g1(R_n + h_n x) / c on the grid's own nodes.

    Returns ``(x, xi, c_1n)`` with the integral of xi^2 dx equal to one.
    """
    g = e.g1.grid
    x = (g.r - m.R_n) / m.h_n
    vals = np.real(e.g1.values)
    c2 = np.trapezoid(vals**2, dx=g.spacing) / m.h_n
    c = math.sqrt(c2)
    return x, vals / c, c


def extrapolated_blow_up(m: ModeProblem, g: RadialGrid):
    """Richardson-extrapolated blow-up profile on the nodes of `g`.

    The refined grid is nested (every other node is a node of `g`), so the two
    profiles combine pointwise; the result is renormalized in L^2(dx).
    Returns ``(x, xi)``.
    """
    x, coarse, _ = blow_up_profile(solve_linear_modes(m, g), m)
    _, fine, _ = blow_up_profile(solve_linear_modes(m, g.refine()), m)
    xi = (4.0 * fine[::2] - coarse) / 3.0
    dx = x[1] - x[0]
    return x, xi / math.sqrt(np.trapezoid(xi * xi, dx=dx))


@dataclass(frozen=True)
class ModeWindow:
    a_constant: float
    indices: tuple[int, ...]
    energy_floor: float

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)


def mode_window(omega: float, a_constant: float = DEFAULT_WINDOW_A) -> ModeWindow:
    """Integers n with |n - omega| <= a sqrt(omega); floor sqrt(6) omega for the rest."""
    if omega <= 0.0 or a_constant <= 0.0:
        raise ValueError("omega and a_constant must be positive")
    half = a_constant * math.sqrt(omega)
    # tolerance guards integer endpoints against round-off in a*sqrt(omega)
    lo = math.ceil(omega - half - 1e-9)
    hi = math.floor(omega + half + 1e-9)
    indices = tuple(n for n in range(max(lo, 1), hi + 1))
    return ModeWindow(a_constant, indices, math.sqrt(6.0) * omega)


def cost_function_C(R, omega: float, D_Omega: float):
    """V_n(R_n) + sqrt(V_n''(R_n)/2) written as a function of the well location R = R_n.

    Substituting n^2 = D omega^2 R^4 (R^2 + (1-D)/D) into V_n and V_n'' gives
        3/2 D w^2 R^4 + 2(1-D) w^2 R^2 + D w^2/2 - 2 w^2 sqrt(D) R^2 sqrt(R^2 + (1-D)/D)
        + sqrt(6 D w^2 R^2 + 4 (1-D) w^2).
    """
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0.0):
        raise ValueError("R must be positive")
    w2 = omega * omega
    D = D_Omega
    R2 = R * R
    return (
        1.5 * D * w2 * R2 * R2
        + 2.0 * (1.0 - D) * w2 * R2
        + 0.5 * D * w2
        - 2.0 * w2 * math.sqrt(D) * R2 * np.sqrt(R2 + (1.0 - D) / D)
        + np.sqrt(6.0 * D * w2 * R2 + 4.0 * (1.0 - D) * w2)
    )


def cost_minimizer(omega: float, D_Omega: float) -> float:
    res = minimize_scalar(
        lambda R: float(cost_function_C(R, omega, D_Omega)),
        bounds=(0.5, 1.5), method="bounded", options={"xatol": 1e-13},
    )
    return float(res.x)


def real_mode_index(R: float, omega: float, D_Omega: float) -> float:
    """N = sqrt(D) omega (R^6 + (1-D)/D R^4)^(1/2): the mode whose well sits at R."""
    D = D_Omega
    return math.sqrt(D) * omega * math.sqrt(R**6 + (1.0 - D) / D * R**4)


@dataclass(frozen=True)
class ModeSelection:
    n_star: int
    R_min: float
    N_real: float
    quadratic_coeff: float
    vertex: float
    fit_r2: float
    degenerate: bool

    def as_dict(self) -> dict:
        return {
            "n_star": self.n_star,
            "R_min": self.R_min,
            "N_real": self.N_real,
            "quadratic_coeff": self.quadratic_coeff,
            "vertex": self.vertex,
            "fit_r2": self.fit_r2,
            "degenerate": self.degenerate,
        }


def fit_parabola(ns, values) -> tuple[float, float, float]:
    """Least-squares parabola; returns (quadratic coefficient, vertex, R^2)."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    center = ns.mean()
    coeffs = np.polyfit(ns - center, values, 2)
    pred = np.polyval(coeffs, ns - center)
    ss_res = float(np.sum((values - pred) ** 2))
    ss_tot = float(np.sum((values - values.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    vertex = center - coeffs[1] / (2.0 * coeffs[0])
    return float(coeffs[0]), float(vertex), r2


def select_nstar(omega: float, D_Omega: float, window, eigen_table) -> ModeSelection:
    """Optimal mode from a table n -> lambda_{1,n} (or any per-mode energy)."""
    if not eigen_table:
        raise ValueError("empty eigen table")
    table = {n: float(eigen_table[n]) for n in window if n in eigen_table}
    if not table:
        raise ValueError("eigen table has no entries in the window")
    ordered = sorted(table, key=lambda n: (table[n], n))
    n_star = ordered[0]
    degenerate = False
    if len(ordered) > 1:
        second = ordered[1]
        if abs(table[second] - table[n_star]) < DEGENERACY_TOL * omega:
            degenerate = True
            n_star = min(n_star, second)
    R_min = cost_minimizer(omega, D_Omega)
    N_real = real_mode_index(R_min, omega, D_Omega)
    ns = sorted(table)
    if len(ns) >= 3:
        qc, vertex, r2 = fit_parabola(ns, [table[n] for n in ns])
    else:
        qc, vertex, r2 = float("nan"), float("nan"), float("nan")
    return ModeSelection(n_star, R_min, N_real, qc, vertex, r2, degenerate)


def parallel_map(fn, items, threads: int = 1):
    """Ordered map; runs on a thread pool when `threads` > 1."""
    items = list(items)
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class ModeRow:
    n: int
    R_n: float
    h_n: float
    lambda1: float
    lambda2: float
    lambda1_asym: float
    gap_over_sqrtVpp: float


def linear_sweep(omega: float, D_Omega: float, a_constant: float = DEFAULT_WINDOW_A,
                 width_multiplier: float = DEFAULT_WIDTH_MULTIPLIER,
                 points_per_width: int = DEFAULT_POINTS_PER_WIDTH, threads: int = 1):
    """Solve every mode of the window on its own grid.

    Returns ``(rows, results, selection)``; ``results`` maps n -> EigenResult.
    ``lambda1_asym`` is the two-term value V_n(R_n) + sqrt(V_n''/2) plus K'_n.
    """
    from .oscillator import asymptotic_lambda1

    window = mode_window(omega, a_constant)

    def one(n):
        m = ModeProblem(n, omega, D_Omega)
        e = solve_linear_modes(m, build_grid(m, width_multiplier, points_per_width))
        return m, e

    solved = parallel_map(one, window.indices, threads)
    rows, results = [], {}
    for m, e in solved:
        results[m.n] = e
        rows.append(ModeRow(
            n=m.n, R_n=m.R_n, h_n=m.h_n, lambda1=e.lambda1, lambda2=e.lambda2,
            lambda1_asym=asymptotic_lambda1(m),
            gap_over_sqrtVpp=e.gap / m.harmonic_level,
        ))
    selection = select_nstar(omega, D_Omega, window, {n: e.lambda1 for n, e in results.items()})
    return rows, results, selection
