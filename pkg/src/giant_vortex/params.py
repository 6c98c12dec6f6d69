"""Trap parameters, the scaled (omega, D_Omega, G) problem and regime tags."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

EXTREME_ROTATION_THRESHOLD = 0.1


@dataclass(frozen=True)
class TrapParams:
    """Physical parameters: rotation speed, quartic trap strength, coupling."""

    Omega: float
    k: float
    G: float

    def __post_init__(self):
        if not self.Omega > 1.0:
            raise ValueError(f"Omega must be > 1, got {self.Omega}")
        if not self.k > 0.0:
            raise ValueError(f"k must be > 0, got {self.k}")
        if not self.G > 0.0:
            raise ValueError(f"G must be > 0, got {self.G}")


@dataclass(frozen=True)
class ScaledParams:
    omega: float
    D_Omega: float
    G: float

    def __post_init__(self):
        if not self.omega > 0.0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if not 0.0 < self.D_Omega < 1.0:
            raise ValueError(f"D_Omega must lie in (0, 1), got {self.D_Omega}")
        if self.G < 0.0:
            raise ValueError(f"G must be >= 0, got {self.G}")

    def as_dict(self) -> dict:
        return {"omega": self.omega, "D_Omega": self.D_Omega, "G": self.G}


class Regime(str, Enum):
    EXTREME_ROTATION = "ExtremeRotation"
    FIXED_G = "FixedG"
    OTHER = "Other"


@dataclass(frozen=True)
class RegimeTag:
    kind: Regime
    ratio_G2_over_omega: float
    fixed_G_eligible: bool = field(default=False)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "ratio_G2_over_omega": self.ratio_G2_over_omega,
            "fixed_G_eligible": self.fixed_G_eligible,
        }


def _check_omega(Omega: float) -> None:
    if not Omega > 1.0:
        raise ValueError(f"Omega must be > 1, got {Omega}")


def scale_parameters(p: TrapParams) -> ScaledParams:
    """omega = Omega (Omega^2 - 1) / (2k), D_Omega = (Omega^2 - 1) / Omega^2."""
    _check_omega(p.Omega)
    s = p.Omega**2 - 1.0
    return ScaledParams(omega=p.Omega * s / (2.0 * p.k), D_Omega=s / p.Omega**2, G=p.G)


def unscale_parameters(s: ScaledParams) -> tuple[float, float]:
    """Invert :func:`scale_parameters`, returning ``(Omega, k)``."""
    Omega = 1.0 / math.sqrt(1.0 - s.D_Omega)
    k = Omega * (Omega**2 - 1.0) / (2.0 * s.omega)
    return Omega, k


def rescale_length(p: TrapParams) -> float:
    """Blow-up factor R with u(x) = R psi(R x)."""
    _check_omega(p.Omega)
    return math.sqrt((p.Omega**2 - 1.0) / (2.0 * p.k))


def unscale_energy(p: TrapParams, f_omega_value: float) -> float:
    _check_omega(p.Omega)
    return 2.0 * p.k / (p.Omega**2 - 1.0) * f_omega_value


def classify_regime(s: ScaledParams, threshold: float = EXTREME_ROTATION_THRESHOLD) -> RegimeTag:
    """Tag the asymptotic regime from the ratio G^2 / omega.

    ratio <= threshold gives ``ExtremeRotation``; threshold < ratio < 1 gives
    ``FixedG`` (omega dominates G^2 but not by a wide margin); anything else is
    ``Other``. ``fixed_G_eligible`` is set whenever ratio < 1.
    """
    ratio = s.G**2 / s.omega
    if ratio <= threshold:
        kind = Regime.EXTREME_ROTATION
    elif ratio < 1.0:
        kind = Regime.FIXED_G
    else:
        kind = Regime.OTHER
    return RegimeTag(kind=kind, ratio_G2_over_omega=ratio, fixed_G_eligible=ratio < 1.0)
