"""The full 2D problem in angular Fourier modes.

A state is u(r, theta) = sum_n f_n(r) exp(i n theta) with n in a contiguous
range, all modes sharing one radial grid. The quadratic part of the energy
splits exactly into the per-mode energies F_n; the quartic term couples modes
through the angular Fourier coefficients of |u|^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .grid import RadialField, RadialGrid, build_window_grid, integrate_rdr
from .linear1d import ModeProblem, radial_operator, solve_linear_modes, potential_Vn
from .nonlinear1d import FlowError, FlowParams
from .params import ScaledParams

__all__ = [
    "CondensateState",
    "FlowParams",
    "default_mode_range",
    "shared_grid",
    "quartic_integral",
    "quartic_lower_bound",
    "energy_F_omega",
    "gradient",
    "minimize_full",
    "DEFAULT_COUPLED_FLOW",
    "chemical_potential",
    "mode_mass_spectrum",
    "density_deviation",
]


def default_mode_range(omega: float, halfwidth: float = 2.0) -> tuple[int, int]:
    c = round(omega)
    d = math.ceil(halfwidth * math.sqrt(omega))
    return max(1, c - d), c + d


def shared_grid(omega: float, D_Omega: float, mode_range, width_multiplier: float = 15.0,
                points_per_width: int = 40) -> RadialGrid:
    ns = range(mode_range[0], mode_range[1] + 1)
    ms = [ModeProblem(n, omega, D_Omega) for n in ns]
    return build_window_grid([m.R_n for m in ms], [m.h_n for m in ms],
                             width_multiplier, points_per_width)


@dataclass(frozen=True)
class CondensateState:
    params: ScaledParams
    mode_range: tuple[int, int]
    grid: RadialGrid
    modes: np.ndarray  # (n_modes, n_points) complex
    energy_cache: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        lo, hi = self.mode_range
        modes = np.asarray(self.modes, dtype=complex)
        if modes.shape != (hi - lo + 1, self.grid.n_points):
            raise ValueError(f"modes array {modes.shape} does not match range and grid")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "mode_range", (int(lo), int(hi)))

    @property
    def ns(self) -> np.ndarray:
        return np.arange(self.mode_range[0], self.mode_range[1] + 1)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.mode_masses()))

    def mode_masses(self) -> np.ndarray:
        return 2.0 * math.pi * integrate_rdr(np.abs(self.modes) ** 2, self.grid)

    def mode(self, n: int) -> RadialField:
        return RadialField(self.grid, self.modes[n - self.mode_range[0]])

    def normalized(self) -> CondensateState:
        mass = self.total_mass
        if not mass > 0:
            raise ValueError("cannot normalize a zero state")
        return replace(self, modes=self.modes / math.sqrt(mass), energy_cache=None)

    def with_modes(self, modes) -> CondensateState:
        return replace(self, modes=np.asarray(modes, dtype=complex), energy_cache=None)

    @classmethod
    def single_mode(cls, params: ScaledParams, n: int, f: RadialField,
                    mode_range: tuple[int, int] | None = None) -> CondensateState:
        mode_range = mode_range or (n, n)
        modes = np.zeros((mode_range[1] - mode_range[0] + 1, f.grid.n_points), dtype=complex)
        modes[n - mode_range[0]] = f.values
        return cls(params, mode_range, f.grid, modes)


# -- mode-space kernels -------------------------------------------------------

def _potentials(s: CondensateState) -> np.ndarray:
    p = s.params
    r = s.grid.r
    return np.stack([potential_Vn(int(n), p.omega, p.D_Omega, r) for n in s.ns])


def apply_H(s: CondensateState, modes: np.ndarray | None = None,
            potentials: np.ndarray | None = None) -> np.ndarray:
    """(-f'' - f'/r + V_n f) for every mode at once (zero at the end nodes)."""
    modes = s.modes if modes is None else modes
    V = _potentials(s) if potentials is None else potentials
    r = s.grid.r
    sr = np.sqrt(r)
    w = modes * sr
    out = np.zeros_like(w)
    dr2 = s.grid.spacing**2
    out[:, 1:-1] = (2.0 * w[:, 1:-1] - w[:, :-2] - w[:, 2:]) / dr2 + (
        V[:, 1:-1] - 0.25 / r[1:-1] ** 2
    ) * w[:, 1:-1]
    return out / sr


def density_coefficients(modes: np.ndarray) -> np.ndarray:
    """Angular Fourier coefficients c_m(r) = sum_p f_{p+m} conj(f_p) of |u|^2.

    Row m + (M - 1) holds frequency m, for m = -(M-1)..(M-1).
    """
    M = modes.shape[0]
    out = np.zeros((2 * M - 1, modes.shape[1]), dtype=complex)
    for m in range(-(M - 1), M):
        if m >= 0:
            out[m + M - 1] = np.sum(modes[m:] * np.conj(modes[: M - m]), axis=0)
        else:
            out[m + M - 1] = np.sum(modes[: M + m] * np.conj(modes[-m:]), axis=0)
    return out


def _fft_size(M: int) -> int:
    # |v|^2 v has frequencies in [-(M-1), 2(M-1)]; L >= 3M - 2 keeps [0, M) alias-free
    L = 8
    while L < 3 * M - 2:
        L *= 2
    return L


def cubic_term(modes: np.ndarray) -> np.ndarray:
    """Mode coefficients of |u|^2 u, by an alias-free angular FFT."""
    M = modes.shape[0]
    L = _fft_size(M)
    v = np.fft.ifft(modes, n=L, axis=0) * L
    return np.fft.fft(np.abs(v) ** 2 * v, axis=0)[:M] / L


def cubic_term_direct(modes: np.ndarray) -> np.ndarray:
    """Same as :func:`cubic_term` by the explicit double sum over mode pairs."""
    M = modes.shape[0]
    out = np.zeros_like(modes, dtype=complex)
    for k in range(M):
        for p in range(M):
            for q in range(M):
                s = p + q - k
                if 0 <= s < M:
                    out[k] += modes[p] * modes[q] * np.conj(modes[s])
    return out


def quartic_integral(s: CondensateState) -> float:
    """Integral of |u|^4 over the plane: 2 pi sum_m int |c_m|^2 r dr."""
    c = density_coefficients(s.modes)
    return float(2.0 * math.pi * integrate_rdr(np.sum(np.abs(c) ** 2, axis=0), s.grid))


def _quartic_fft(modes: np.ndarray, grid: RadialGrid) -> float:
    M = modes.shape[0]
    L = _fft_size(M)
    v = np.fft.ifft(modes, n=L, axis=0) * L
    dens = np.mean(np.abs(v) ** 4, axis=0)
    return float(2.0 * math.pi * integrate_rdr(dens, grid))


def quartic_lower_bound(s: CondensateState) -> float:
    """2 pi sum_{p,q} int |f_p|^2 |f_q|^2 r dr = 2 pi int (sum_p |f_p|^2)^2 r dr."""
    rho0 = np.sum(np.abs(s.modes) ** 2, axis=0)
    return float(2.0 * math.pi * integrate_rdr(rho0**2, s.grid))


def _mode_energies(s: CondensateState, potentials=None) -> np.ndarray:
    Hf = apply_H(s, potentials=potentials)
    return 2.0 * math.pi * integrate_rdr(np.real(np.conj(s.modes) * Hf), s.grid)


def energy_F_omega(s: CondensateState) -> tuple[float, dict]:
    """F_omega = sum_n F_n(f_n) + G int |u|^4, with the breakdown."""
    per_mode = _mode_energies(s)
    quartic = quartic_integral(s)
    total = float(np.sum(per_mode) + s.params.G * quartic)
    breakdown = {
        "per_mode": {int(n): float(e) for n, e in zip(s.ns, per_mode)},
        "quadratic": float(np.sum(per_mode)),
        "quartic": quartic,
        "total": total,
    }
    return total, breakdown


def gradient(s: CondensateState, potentials=None) -> np.ndarray:
    """Gradient of F_omega for the real inner product Re 2 pi sum_n int conj(a_n) b_n r dr.

    Equal to 2 (H_n f_n + 2 G (|u|^2 u)_n).
    """
    return 2.0 * (apply_H(s, potentials=potentials) + 2.0 * s.params.G * cubic_term(s.modes))


def el_residual(s: CondensateState, potentials=None) -> tuple[float, float]:
    """(residual norm, mu) of H_n f_n + 2G(|u|^2 u)_n = mu f_n in mode form."""
    half_grad = 0.5 * gradient(s, potentials)
    per_mode = _mode_energies(s, potentials)
    quartic = _quartic_fft(s.modes, s.grid)
    mu = float(np.sum(per_mode) + 2.0 * s.params.G * quartic)
    res = half_grad - mu * s.modes
    res[:, 0] = res[:, -1] = 0.0
    norm = math.sqrt(2.0 * math.pi * float(np.sum(integrate_rdr(np.abs(res) ** 2, s.grid))))
    return norm, mu


def chemical_potential(s: CondensateState) -> float:
    """mu = F_omega(u) + G int |u|^4."""
    e, br = energy_F_omega(s)
    return e + s.params.G * br["quartic"]


def mode_mass_spectrum(s: CondensateState, n_star: int) -> tuple[dict, float]:
    masses = s.mode_masses()
    table = {int(n): float(mm) for n, mm in zip(s.ns, masses)}
    moment = float(np.sum(masses * (s.ns - n_star) ** 2))
    return table, moment


def density_deviation(s: CondensateState, ref: RadialField) -> float:
    """L^2(R^2) norm of |u|^2 - ref^2 computed in mode space.

    The m = 0 angular coefficient of |u|^2 is compared with ref^2; the other
    coefficients contribute their full weight.
    """
    c = density_coefficients(s.modes)
    M = s.modes.shape[0]
    c[M - 1] = c[M - 1] - np.abs(ref.values) ** 2
    return math.sqrt(2.0 * math.pi * integrate_rdr(np.sum(np.abs(c) ** 2, axis=0), s.grid))


# -- initial data and the flow -----------------------------------------------

def linear_ground_states(params: ScaledParams, mode_range, grid: RadialGrid,
                         how_many: int = 1) -> dict:
    out = {}
    for n in range(mode_range[0], mode_range[1] + 1):
        m = ModeProblem(n, params.omega, params.D_Omega)
        out[n] = solve_linear_modes(m, grid, how_many=how_many, check_boundary=False)
    return out


def initial_state(params: ScaledParams, mode_range, grid: RadialGrid, seed: int = 0,
                  eigen_table: dict | None = None) -> CondensateState:
    """Gaussian mass profile in n around round(omega), width sqrt(omega)/4, random phases."""
    if eigen_table is None:
        eigen_table = linear_ground_states(params, mode_range, grid)
    rng = np.random.default_rng(seed)
    ns = np.arange(mode_range[0], mode_range[1] + 1)
    width = math.sqrt(params.omega) / 4.0
    weights = np.exp(-0.5 * ((ns - round(params.omega)) / width) ** 2)
    phases = np.exp(2j * math.pi * rng.random(len(ns)))
    modes = np.stack([
        math.sqrt(wt) * ph * np.real(eigen_table[int(n)].g1.values)
        for n, wt, ph in zip(ns, weights, phases)
    ])
    return CondensateState(params, tuple(mode_range), grid, modes).normalized()


@dataclass(frozen=True)
class FlowReport:
    iterations: int
    energy: float
    mu: float
    residual: float
    halvings: int
    boundary_mass: float
    history: tuple[float, ...] = ()


def _banded_solves(diag_base, off, shifts, rhs_w):
    n_int = diag_base.shape[1]
    out = np.empty_like(rhs_w)
    ab = np.empty((3, n_int))
    ab[0, 0] = 0.0
    ab[0, 1:] = off
    ab[2, -1] = 0.0
    ab[2, :-1] = off
    for k in range(rhs_w.shape[0]):
        ab[1] = diag_base[k] + shifts[k]
        out[k] = solve_banded((1, 1), ab, rhs_w[k], check_finite=False)
    return out


DEFAULT_COUPLED_FLOW = FlowParams(dt=1e3, max_iter=20000, tol_energy=1e-12, tol_residual=1e-5,
                                  stall_window=20)


def _flow_stage(s: CondensateState, modes, G, sigma, diag_base, off, potentials, flow,
                callback, it0, history):
    """One normalized gradient flow at coupling G; returns (modes, energy, it, halvings, mu, res)."""
    g = s.grid
    sr = np.sqrt(g.r[1:-1])
    h_ref = ModeProblem(round(s.params.omega), s.params.omega, s.params.D_Omega).h_n
    base_inv_dt = 1.0 / (flow.dt * h_ref**2)

    def energy_of(m):
        return float(np.sum(_mode_energies(s.with_modes(m), potentials)) + G * _quartic_fft(m, g))

    energy = energy_of(modes)
    history.append(energy)
    halvings = 0
    stage_start = len(history)
    it = it0
    while it < flow.max_iter:
        it += 1
        rho0 = np.sum(np.abs(modes) ** 2, axis=0)[1:-1]
        # the mode exchange is explicit; 4 G max(rho_0) in 1/dt keeps it contractive
        inv_dt = (base_inv_dt + 4.0 * G * float(np.max(rho0))) * 2.0**halvings
        explicit = cubic_term(modes)[:, 1:-1] - rho0 * modes[:, 1:-1] if G else 0.0
        rhs = (inv_dt * modes[:, 1:-1] - 2.0 * G * explicit) * sr
        shifts = np.broadcast_to(2.0 * G * rho0 - sigma + inv_dt, diag_base.shape)
        w = _banded_solves(diag_base, off, shifts, rhs.real) \
            + 1j * _banded_solves(diag_base, off, shifts, rhs.imag)
        new = np.zeros_like(modes)
        new[:, 1:-1] = w / sr
        new /= math.sqrt(2.0 * math.pi * float(np.sum(integrate_rdr(np.abs(new) ** 2, g))))
        e_new = energy_of(new)
        if e_new > energy + 1e-13 * abs(energy):
            halvings += 1
            if halvings > flow.max_halvings:
                raise FlowError(f"energy increases after {flow.max_halvings} dt halvings")
            continue
        modes, energy = new, e_new
        history.append(energy)
        if callback is not None:
            callback(it, energy, modes)
        if len(history) - stage_start > flow.stall_window:
            drop = history[-flow.stall_window - 1] - energy
            if drop <= flow.tol_energy * abs(energy):
                st = replace(s.with_modes(modes), params=replace(s.params, G=G))
                res, mu = el_residual(st, potentials)
                if res <= flow.tol_residual * abs(mu):
                    return modes, energy, it, halvings, mu, res
    raise FlowError(f"coupled flow did not converge in {flow.max_iter} steps")


def minimize_full(init: CondensateState, flow: FlowParams | None = None,
                  eigen_table: dict | None = None, callback=None, continuation: bool = True):
    """Normalized gradient flow on all modes jointly.

    Each step solves, mode by mode,
        (1/dt + H_n + 2G rho_0 - sigma) f_n' = f_n / dt - 2G [(|u|^2 u)_n - rho_0 f_n]
    with rho_0 = sum_p |f_p|^2 (the angular mean of |u|^2) frozen, then
    renormalizes the total mass. sigma sits just below the lowest linear level,
    so every solve is positive definite. Rejected steps (energy increase) halve dt.

    Every single-mode state is a local minimum once G > 0 (mixing in a
    neighbour costs exchange energy), so with ``continuation`` the flow first
    runs at G = 0, where the minimizer is unique, and then at the target G.
    Returns ``(state, FlowReport)``; ``iterations`` counts both stages.
    """
    flow = flow or DEFAULT_COUPLED_FLOW
    s = init.normalized()
    G = s.params.G
    lo, hi = s.mode_range
    if eigen_table is None:
        eigen_table = linear_ground_states(s.params, s.mode_range, s.grid)
    levels = sorted(eigen_table[n].lambda1 for n in range(lo, hi + 1))
    sigma = levels[0] - 0.05
    diag_base, off = [], None
    for n in range(lo, hi + 1):
        d, off = radial_operator(ModeProblem(n, s.params.omega, s.params.D_Omega), s.grid)
        diag_base.append(d)
    diag_base = np.array(diag_base)
    potentials = _potentials(s)
    history: list[float] = []
    modes = s.modes.copy()
    it = 0
    halvings = 0
    stages = [0.0, G] if continuation and G > 0 else [G]
    for G_stage in stages:
        modes, energy, it, h, mu, res = _flow_stage(
            s, modes, G_stage, sigma, diag_base, off, potentials, flow, callback, it, history)
        halvings += h
    st = s.with_modes(modes)
    masses = st.mode_masses()
    report = FlowReport(it, energy, mu, res, halvings, float(max(masses[0], masses[-1])),
                        tuple(history))
    return st, report
