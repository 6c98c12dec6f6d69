"""Giant-vortex diagnostics on a converged multi-mode state.

Everything here is pure post-processing: reconstruct u on a polar grid, read
off the phase winding, locate the central hole and the zero-free annulus, fit
the annular Gaussian profile and its decay, and project onto the linear ground
modes.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .coupled2d import CondensateState, quartic_integral
from .grid import integrate_rdr
from .linear1d import ModeProblem

ZERO_THRESHOLD = 1e-4
ANNULUS_RADII = 8
DECAY_R_MIN = 0.3


class DiagnosticsError(ValueError):
    pass


@dataclass(frozen=True)
class PolarSamples:
    r: np.ndarray
    theta: np.ndarray
    values: np.ndarray  # (n_r, n_theta) complex

    @property
    def n_theta(self) -> int:
        return len(self.theta)


def default_n_theta(s: CondensateState) -> int:
    """Power of two >= 4 * max(mode count, largest |n|): resolves the fastest phase."""
    need = 4 * max(s.modes.shape[0], abs(s.mode_range[0]), abs(s.mode_range[1]))
    L = 16
    while L < need:
        L *= 2
    return L


def reconstruct_2d(s: CondensateState, n_theta: int | None = None) -> PolarSamples:
    """u(r_i, theta_j) = sum_n f_n(r_i) exp(i n theta_j)."""
    M = s.modes.shape[0]
    if n_theta is None:
        n_theta = default_n_theta(s)
    if n_theta < 4 * M:
        raise DiagnosticsError(f"n_theta={n_theta} undersamples {M} modes (need >= {4 * M})")
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    phase = np.exp(1j * np.outer(s.ns, theta))
    return PolarSamples(s.grid.r, theta, s.modes.T @ phase)


def analyze_2d(samples: PolarSamples, mode_range) -> np.ndarray:
    """Angular Fourier coefficients f_n(r) for n in mode_range (inverse of reconstruct_2d)."""
    ns = np.arange(mode_range[0], mode_range[1] + 1)
    phase = np.exp(-1j * np.outer(samples.theta, ns))
    return (samples.values @ phase).T / samples.n_theta


def _circle(samples: PolarSamples, radius: float) -> np.ndarray:
    r = samples.r
    if not r[0] <= radius <= r[-1]:
        raise DiagnosticsError(f"radius {radius} outside the grid [{r[0]}, {r[-1]}]")
    i = min(int(np.searchsorted(r, radius, side="right")) - 1, len(r) - 2)
    t = (radius - r[i]) / (r[i + 1] - r[i])
    return (1.0 - t) * samples.values[i] + t * samples.values[i + 1]


@dataclass(frozen=True)
class Winding:
    winding: int
    rounding_residual: float


def winding_number(samples: PolarSamples, radius: float) -> Winding:
    """Phase circulation of u around the circle |x| = radius, over 2 pi."""
    u = _circle(samples, radius)
    a = np.abs(u)
    if not a.min() > 1e-6 * a.max():
        raise DiagnosticsError(f"u nearly vanishes on the circle r={radius}")
    steps = np.angle(np.roll(u, -1) / u)
    if np.max(np.abs(steps)) > 0.5 * math.pi:
        raise DiagnosticsError("angular sampling too coarse for the phase winding")
    total = float(np.sum(steps)) / (2.0 * math.pi)
    k = round(total)
    return Winding(int(k), abs(total - k))


@dataclass(frozen=True)
class HoleCheck:
    delta: float
    inner_radius: float
    outer_radius: float
    max_in_hole_set: float
    min_in_annulus: float
    max_overall: float
    passed: bool


def hole_set_radii(omega: float, delta: float) -> tuple[float, float]:
    """Radii bounding H = {x : ||x| - 1|^2 >= delta ln(omega) / omega}."""
    d = math.sqrt(delta * math.log(omega) / omega)
    return 1.0 - d, 1.0 + d


def hole_check(samples: PolarSamples, s: CondensateState, delta: float) -> HoleCheck:
    """max |u| over the hole set and min |u| over the complementary annulus."""
    a = np.abs(samples.values)
    inner, outer = hole_set_radii(s.params.omega, delta)
    in_hole = (samples.r <= inner) | (samples.r >= outer)
    overall = float(a.max())
    hole_max = float(a[in_hole].max()) if in_hole.any() else 0.0
    ring = ~in_hole
    ring_min = float(a[ring].min()) if ring.any() else float("nan")
    return HoleCheck(delta, inner, outer, hole_max, ring_min, overall,
                     hole_max <= 0.1 * overall)


def zero_free_annulus(samples: PolarSamples, threshold: float = ZERO_THRESHOLD):
    """Largest radial interval around the density peak with min_theta |u| >= threshold * max|u|.

    Returns ``(r_lo, r_hi, hole_inner, hole_outer)``: the hole radii are the
    nearest nodes below / above the annulus.
    """
    a = np.abs(samples.values)
    floor = threshold * a.max()
    ok = a.min(axis=1) >= floor
    peak = int(np.argmax(a.max(axis=1)))
    if not ok[peak]:
        raise DiagnosticsError("the density peak is not zero-free")
    lo = peak
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    hi = peak
    while hi < len(ok) - 1 and ok[hi + 1]:
        hi += 1
    r = samples.r
    return float(r[lo]), float(r[hi]), float(r[max(lo - 1, 0)]), float(r[min(hi + 1, len(r) - 1)])


def detect_zeros(samples: PolarSamples, threshold: float = ZERO_THRESHOLD) -> np.ndarray:
    """Phase singularities: grid cells with nonzero circulation touching a near-zero node.

    Locations (r, theta) are refined by bilinear interpolation of Re u and Im u
    inside the cell; the cell centre is used if the bilinear system fails.
    """
    u = samples.values
    a = np.abs(u)
    cand = a < threshold * a.max()
    u00 = u[:-1]
    u10 = u[1:]
    u11 = np.roll(u[1:], -1, axis=1)
    u01 = np.roll(u[:-1], -1, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        circ = (np.angle(u10 / u00) + np.angle(u11 / u10)
                + np.angle(u01 / u11) + np.angle(u00 / u01))
    circ = np.nan_to_num(circ)
    near = cand[:-1] | cand[1:] | np.roll(cand[:-1], -1, axis=1) | np.roll(cand[1:], -1, axis=1)
    hits = np.argwhere((np.abs(circ) > math.pi) & near)
    r, th = samples.r, samples.theta
    dth = 2.0 * math.pi / samples.n_theta
    out = []
    for i, j in hits:
        jn = (j + 1) % samples.n_theta
        s_, t_ = _bilinear_root(u[i, j], u[i + 1, j], u[i, jn], u[i + 1, jn])
        out.append((r[i] + s_ * (r[i + 1] - r[i]), th[j] + t_ * dth))
    return np.array(out).reshape(-1, 2)


def _bilinear_root(c00, c10, c01, c11):
    """(s, t) in [0,1]^2 where the bilinear interpolant of the corners vanishes."""
    s, t = 0.5, 0.5
    for _ in range(20):
        val = c00 * (1 - s) * (1 - t) + c10 * s * (1 - t) + c01 * (1 - s) * t + c11 * s * t
        ds = (c10 - c00) * (1 - t) + (c11 - c01) * t
        dt = (c01 - c00) * (1 - s) + (c11 - c10) * s
        J = np.array([[ds.real, dt.real], [ds.imag, dt.imag]])
        try:
            step = np.linalg.solve(J, [val.real, val.imag])
        except np.linalg.LinAlgError:
            return 0.5, 0.5
        s, t = s - step[0], t - step[1]
        if not (np.isfinite(s) and np.isfinite(t)):
            return 0.5, 0.5
    if 0.0 <= s <= 1.0 and 0.0 <= t <= 1.0:
        return float(s), float(t)
    return 0.5, 0.5


def gaussian_profile_fit(profile, r) -> tuple[float, float, float]:
    """Fit log|u| by a concave parabola where |u| > 0.1 max|u|.

    Returns ``(amplitude, center, width)`` with ``width`` the 1/e half-width of |u|^2.
    """
    a = np.abs(np.asarray(profile))
    r = np.asarray(r, dtype=float)
    sel = a > 0.1 * a.max()
    idx = np.flatnonzero(sel)
    if len(idx) < 5 or idx[-1] - idx[0] + 1 != len(idx):
        raise DiagnosticsError("profile is not unimodal above 0.1 * max")
    c2, c1, c0 = np.polyfit(r[sel], np.log(a[sel]), 2)
    if not c2 < 0:
        raise DiagnosticsError("log-profile is not concave")
    center = -c1 / (2.0 * c2)
    amplitude = math.exp(c0 - c1 * c1 / (4.0 * c2))
    width = 1.0 / math.sqrt(-2.0 * c2)
    return amplitude, center, width


def decay_fit(samples: PolarSamples, s: CondensateState) -> float:
    """-slope of max_theta log|u| against omega (r - 1)^2 where |u| is in [1e-8, 0.1] * max."""
    top = np.abs(samples.values).max(axis=1)
    peak = top.max()
    sel = (samples.r >= DECAY_R_MIN) & (top >= 1e-8 * peak) & (top <= 0.1 * peak)
    if np.count_nonzero(sel) < 10:
        raise DiagnosticsError("insufficient dynamic range for the decay fit")
    x = s.params.omega * (samples.r[sel] - 1.0) ** 2
    slope = np.polyfit(x, np.log(top[sel]), 1)[0]
    return float(-slope)


def project_ground_modes(s: CondensateState, eigen_table: dict) -> tuple[dict, float]:
    """Coefficients <f_n, g_1n> and the L^2(R^2) norm of u - u~.

    Modes absent from `eigen_table` contribute their full mass to the residual.
    """
    coeffs = {}
    resid2 = 0.0
    for n, f in zip(s.ns, s.modes):
        n = int(n)
        if n in eigen_table:
            g1 = eigen_table[n].g1
            if g1.grid != s.grid:
                raise DiagnosticsError(f"eigenfunction of mode {n} lives on a different grid")
            g = np.real(g1.values)
            c = complex(2.0 * math.pi * integrate_rdr(f * g, s.grid))
            coeffs[n] = c
            diff = f - c * g
        else:
            diff = f
        resid2 += 2.0 * math.pi * float(integrate_rdr(np.abs(diff) ** 2, s.grid))
    return coeffs, math.sqrt(resid2)


@dataclass(frozen=True)
class InteractionReport:
    quartic: float
    leading: float
    moment: float
    c1: float
    c2: float
    lower_bound: float
    lower_bound_holds: bool
    upper_bound_holds: bool


def interaction_lower_bound_report(s: CondensateState, eigen_table: dict, n_star: int,
                                   c1: float = 1.0, c2: float | None = None) -> InteractionReport:
    """int |u|^4 against 2 pi int g_{1,n*}^4 r dr - c1 omega^(-1/2) moment - c2.

    With ``c2=None`` the smallest c2 making the bound hold is reported (the
    constants are not known in closed form).
    """
    g = np.real(eigen_table[n_star].g1.values)
    leading = 2.0 * math.pi * float(integrate_rdr(g**4, s.grid))
    q = quartic_integral(s)
    masses = s.mode_masses()
    moment = float(np.sum(masses * (s.ns - n_star) ** 2))
    corr1 = c1 * moment / math.sqrt(s.params.omega)
    if c2 is None:
        c2 = max(0.0, leading - corr1 - q)
    bound = leading - corr1 - c2
    # the single-mode case is an identity; allow round-off there
    tol = 1e-12 * leading
    return InteractionReport(q, leading, moment, c1, c2, bound, q >= bound - tol, q <= leading + tol)


@dataclass(frozen=True)
class VortexReport:
    winding_at_r1: int
    hole_inner_radius: float
    hole_outer_radius: float
    zero_free_annulus: tuple[float, float]
    gaussian_fit: tuple[float, float, float]
    decay_slope: float
    projection_residual: float
    windings: tuple[int, ...] = ()
    winding_radii: tuple[float, ...] = ()
    windings_unanimous: bool = True
    zeros: tuple[tuple[float, float], ...] = ()
    zeros_outside_hole_band: bool = True
    hole: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        d = asdict(self)
        d["zeros"] = [list(z) for z in self.zeros]
        return d


def annulus_windings(samples: PolarSamples, r_lo: float, r_hi: float,
                     count: int = ANNULUS_RADII) -> tuple[tuple[float, ...], tuple[int, ...]]:
    radii = np.linspace(r_lo, r_hi, count + 2)[1:-1]
    return tuple(float(x) for x in radii), tuple(winding_number(samples, x).winding for x in radii)


def radial_profile_rows(samples: PolarSamples):
    """Rows (r, max_theta |u|, min_theta |u|, winding or NaN) for every radial node."""
    a = np.abs(samples.values)
    rows = []
    for i, r in enumerate(samples.r):
        try:
            w = float(winding_number(samples, float(r)).winding)
        except DiagnosticsError:
            w = float("nan")
        rows.append((float(r), float(a[i].max()), float(a[i].min()), w))
    return rows


def vortex_report(s: CondensateState, eigen_table: dict, n_theta: int | None = None,
                  delta: float = 0.05, hole_delta: float | None = None) -> VortexReport:
    """Full report. Zeros are tested against the band of width `delta`; the
    hole set uses `hole_delta`, by default 1 / sigma_fit (vanishing is only
    expected for delta > 1 / (4 sigma))."""
    samples = reconstruct_2d(s, n_theta)
    r_lo, r_hi, hole_in, hole_out = zero_free_annulus(samples)
    radii, windings = annulus_windings(samples, r_lo, r_hi)
    unanimous = len(set(windings)) == 1
    flags = [] if unanimous else ["vortex inside the annulus: windings disagree"]
    try:
        w1 = winding_number(samples, 1.0).winding
    except DiagnosticsError:
        w1 = windings[len(windings) // 2]
        flags.append("u nearly vanishes on r = 1; winding taken inside the annulus")
    profile = samples.values[:, 0]
    fit = gaussian_profile_fit(profile, samples.r)
    sigma = decay_fit(samples, s)
    _, resid = project_ground_modes(s, eigen_table)
    zeros = detect_zeros(samples)
    band = delta * math.log(s.params.omega) / s.params.omega
    zeros_ok = bool(np.all((zeros[:, 0] - 1.0) ** 2 >= band)) if len(zeros) else True
    if not zeros_ok:
        flags.append("zeros inside the annular band")
    hc = hole_check(samples, s, 1.0 / sigma if hole_delta is None else hole_delta)
    return VortexReport(
        winding_at_r1=w1,
        hole_inner_radius=hole_in,
        hole_outer_radius=hole_out,
        zero_free_annulus=(r_lo, r_hi),
        gaussian_fit=fit,
        decay_slope=sigma,
        projection_residual=resid,
        windings=windings,
        winding_radii=radii,
        windings_unanimous=unanimous,
        zeros=tuple((float(a), float(b)) for a, b in zeros),
        zeros_outside_hole_band=zeros_ok,
        hole=asdict(hc),
        flags=tuple(flags),
    )


def single_mode_sigma(omega: float, D_Omega: float, n: int) -> float:
    """1 / (2 h_n^2 omega): the decay rate of a Gaussian mode of width h_n."""
    h = ModeProblem(n, omega, D_Omega).h_n
    return 1.0 / (2.0 * h * h * omega)


def density_norm(ref_values, grid) -> float:
    """L^2(R^2) norm of ref^2 for a radial profile."""
    return math.sqrt(2.0 * math.pi * float(integrate_rdr(np.abs(ref_values) ** 4, grid)))


__all__ = [
    "PolarSamples",
    "reconstruct_2d",
    "analyze_2d",
    "winding_number",
    "hole_check",
    "zero_free_annulus",
    "detect_zeros",
    "gaussian_profile_fit",
    "decay_fit",
    "project_ground_modes",
    "interaction_lower_bound_report",
    "VortexReport",
    "vortex_report",
]
