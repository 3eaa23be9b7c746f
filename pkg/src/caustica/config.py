"""Run configuration for the command line front end."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .deformations import DeformationSpec, SpecError, load_spec
from .fourier import CausticaError, RotationNumber
from .oracle import DEFAULT_DPS, DEFAULT_SWEEP, RESIDUAL_GRID
from .persistence import DEFAULT_MAX_ORDER, HARD_MAX_ORDER, Tolerances


class ConfigError(CausticaError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class OracleSettings:
    eps_sweep: tuple[float, float, int] = DEFAULT_SWEEP
    grid: int = RESIDUAL_GRID
    dps: int = DEFAULT_DPS
    truncation: int | None = None  # orders of h kept by the evaluator; default m + 3

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "OracleSettings":
        d = dict(d or {})
        unknown = set(d) - {"eps_sweep", "grid", "dps", "truncation"}
        if unknown:
            raise ConfigError(f"unknown oracle keys {sorted(unknown)}")
        kw = {}
        if "eps_sweep" in d:
            kw["eps_sweep"] = parse_sweep(d["eps_sweep"])
        for key, lo in (("grid", 4), ("dps", 16), ("truncation", 1)):
            if key in d and d[key] is not None:
                v = d[key]
                if isinstance(v, bool) or not isinstance(v, int) or v < lo:
                    raise ConfigError(f"oracle.{key} must be an integer >= {lo}")
                kw[key] = v
        return cls(**kw)


def parse_sweep(value) -> tuple[float, float, int]:
    """Accept ``"lo,hi,n"`` or ``[lo, hi, n]``."""
    if isinstance(value, str):
        parts = value.split(",")
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError(f"epsilon sweep must be 'lo,hi,n', got {value!r}")
    if len(parts) != 3:
        raise ConfigError(f"epsilon sweep needs three entries lo,hi,n, got {value!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        n = int(parts[2])
        if float(parts[2]) != n:
            raise ValueError
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad epsilon sweep {value!r}") from exc
    if n < 3:
        raise ConfigError("an epsilon sweep needs at least 3 points")
    if not (lo > 0 and hi > 0 and math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigError("epsilon sweep bounds must be positive")
    if abs(math.log10(lo / hi)) < 2:
        raise ConfigError("epsilon sweep must span at least two decades")
    return lo, hi, n


def _rotation(p, q) -> RotationNumber:
    if any(isinstance(v, bool) or not isinstance(v, int) for v in (p, q)):
        raise ConfigError(f"rotation entries must be integers, got {p!r}/{q!r}")
    try:
        return RotationNumber(p, q)
    except (ValueError, CausticaError) as exc:
        raise ConfigError(str(exc)) from exc


def rotations_in_range(q_lo: int, q_hi: int, p1_only: bool = False) -> list[RotationNumber]:
    """All reduced ``p/q < 1/2`` with ``q_lo <= q <= q_hi``."""
    out = []
    for q in range(max(q_lo, 3), q_hi + 1):
        for p in range(1, (q + 1) // 2):
            if 2 * p < q and math.gcd(p, q) == 1 and (p == 1 or not p1_only):
                out.append(RotationNumber(p, q))
    return out


def parse_rotations(obj, p1_only: bool = False) -> list[RotationNumber]:
    if isinstance(obj, Mapping):
        keys = set(obj)
        if keys == {"p", "q"}:
            rots = [_rotation(obj["p"], obj["q"])]
        elif keys == {"pairs"}:
            rots = parse_rotations(obj["pairs"])
        elif keys == {"q_range"}:
            rng = obj["q_range"]
            if (not isinstance(rng, list) or len(rng) != 2
                    or any(isinstance(v, bool) or not isinstance(v, int) for v in rng)):
                raise ConfigError("q_range must be [q_min, q_max]")
            if rng[0] < 3 or rng[1] < rng[0]:
                raise ConfigError(f"q_range {rng} is empty or below 3")
            rots = rotations_in_range(rng[0], rng[1])
        else:
            raise ConfigError(f"rotations take 'p'/'q', 'pairs' or 'q_range', got {sorted(keys)}")
    elif isinstance(obj, list):
        rots = []
        for item in obj:
            if isinstance(item, Mapping) and set(item) == {"p", "q"}:
                rots.append(_rotation(item["p"], item["q"]))
            elif isinstance(item, (list, tuple)) and len(item) == 2:
                rots.append(_rotation(*item))
            else:
                raise ConfigError(f"rotation entry must be [p, q], got {item!r}")
    else:
        raise ConfigError("rotations missing or malformed")
    if p1_only:
        rots = [r for r in rots if r.p == 1]
    if not rots:
        raise ConfigError("no rotation numbers to process")
    return rots


@dataclass
class RunConfig:
    spec: DeformationSpec
    rotations: list[RotationNumber]
    max_order: int = DEFAULT_MAX_ORDER
    target_order: int | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    oracle: OracleSettings = field(default_factory=OracleSettings)
    out_dir: Path | None = None


_KEYS = {"deformation", "rotation", "rotations", "max_order", "target_order", "tolerances", "oracle", "output"}


def _order(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{name} must be a positive integer")
    if value > HARD_MAX_ORDER:
        raise ConfigError(f"{name} = {value} exceeds the hard cap {HARD_MAX_ORDER}")
    return value


def parse_config(obj: Mapping, p1_only: bool = False) -> RunConfig:
    if not isinstance(obj, Mapping):
        raise ConfigError("config must be a JSON object")
    unknown = set(obj) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if "deformation" not in obj:
        raise ConfigError("config needs a 'deformation'")
    try:
        spec = load_spec(obj["deformation"])
    except SpecError as exc:
        raise ConfigError(str(exc)) from exc
    if "rotation" in obj and "rotations" in obj:
        raise ConfigError("give either 'rotation' or 'rotations', not both")
    rotations = parse_rotations(obj.get("rotations", obj.get("rotation")), p1_only)
    max_order = _order(obj.get("max_order", DEFAULT_MAX_ORDER), "max_order")
    target = obj.get("target_order")
    target = None if target is None else _order(target, "target_order")
    try:
        tol = Tolerances.from_dict(obj.get("tolerances"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    oracle = OracleSettings.from_dict(obj.get("oracle"))
    out = obj.get("output")
    out_dir = None
    if out is not None:
        if not isinstance(out, Mapping) or set(out) - {"dir"}:
            raise ConfigError("output takes a single key 'dir'")
        out_dir = Path(out["dir"]) if out.get("dir") else None
    return RunConfig(spec, rotations, max_order, target, tol, oracle, out_dir)


def load_config(path: str | Path, p1_only: bool = False) -> RunConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(obj, p1_only)
