"""Run configuration: a line-oriented ``key = value`` file plus CLI overrides.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Parameters are given either in scaled form (omega, d_omega, g_coupling) or in
physical form (omega_phys, k_trap, g_coupling), never both.

Documented defaults:
    width_multiplier = 15, points_per_width = 40, a_constant = 2,
    modes_halfwidth = 2, seed = 0, threads = 1,
    flow_dt / flow_max_iter / flow_tol_energy / flow_tol_residual: the solver
    defaults of the 1D flow (dt in units of h_n^2) and of the coupled flow.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields, replace

from .params import ScaledParams, TrapParams, scale_parameters


class ConfigError(ValueError):
    pass


# key -> converter
_KEYS = {
    "omega": float,
    "d_omega": float,
    "g_coupling": float,
    "omega_phys": float,
    "k_trap": float,
    "width_multiplier": float,
    "points_per_width": int,
    "a_constant": float,
    "modes_halfwidth": float,
    "flow_dt": float,
    "flow_max_iter": int,
    "flow_tol_energy": float,
    "flow_tol_residual": float,
    "seed": int,
    "threads": int,
    "out": str,
}
SCALED_KEYS = ("omega", "d_omega")
PHYSICAL_KEYS = ("omega_phys", "k_trap")


def _convert(key: str, raw: str, where: str):
    try:
        if _KEYS[key] is int:
            return int(raw)
        if _KEYS[key] is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        return raw
    except ValueError:
        raise ConfigError(f"{where}: invalid value {raw!r} for {key}") from None


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse the key = value format, reporting errors with line numbers."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{source}:{lineno}"
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'key = value', got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        if not raw:
            raise ConfigError(f"{where}: missing value for {key!r}")
        out[key] = _convert(key, raw, where)
    return out


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path)


@dataclass(frozen=True)
class RunConfig:
    omega: float | None = None
    d_omega: float | None = None
    g_coupling: float | None = None
    omega_phys: float | None = None
    k_trap: float | None = None
    width_multiplier: float = 15.0
    points_per_width: int = 40
    a_constant: float = 2.0
    modes_halfwidth: float = 2.0
    flow_dt: float | None = None
    flow_max_iter: int | None = None
    flow_tol_energy: float | None = None
    flow_tol_residual: float | None = None
    seed: int = 0
    threads: int = 1
    out: str | None = None

    @classmethod
    def from_mapping(cls, values: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in known and v is not None})

    def scaled(self, need_g: bool = True) -> ScaledParams:
        """Resolve to ScaledParams; physical and scaled inputs are mutually exclusive."""
        has_scaled = [k for k in SCALED_KEYS if getattr(self, k) is not None]
        has_phys = [k for k in PHYSICAL_KEYS if getattr(self, k) is not None]
        if has_scaled and has_phys:
            raise ConfigError(
                f"ambiguous parameters: both {', '.join(has_scaled)} and {', '.join(has_phys)} given"
            )
        if self.g_coupling is None and need_g:
            raise ConfigError("missing key 'g_coupling'")
        G = 0.0 if self.g_coupling is None else self.g_coupling
        if has_phys:
            for k in PHYSICAL_KEYS:
                if getattr(self, k) is None:
                    raise ConfigError(f"missing key {k!r}")
            try:
                # TrapParams wants G > 0; G only passes through the scaling
                s = scale_parameters(TrapParams(self.omega_phys, self.k_trap, G or 1.0))
                return replace(s, G=G)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        for k in SCALED_KEYS:
            if getattr(self, k) is None:
                raise ConfigError(f"missing key {k!r}")
        try:
            return ScaledParams(self.omega, self.d_omega, G)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def trap(self) -> TrapParams | None:
        if self.omega_phys is None:
            return None
        return TrapParams(self.omega_phys, self.k_trap, self.g_coupling or 1.0)

    def as_dict(self) -> dict:
        return asdict(self)


# -- deterministic output -----------------------------------------------------

def fmt(x: float) -> str:
    """17 significant digits: enough for an exact round trip."""
    return format(float(x), ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with floats at 17 significant digits and keys in insertion order.

    Non-finite floats are written as null.
    """
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{dumps(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if hasattr(obj, "item"):  # numpy scalars
        return dumps(obj.item(), indent, _level)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()
