from __future__ import annotations
from dataclasses import dataclass
from pathlib import Path
from typing import Any
import json
import os


@dataclass(frozen=True)
class Tolerances:
    approx: float
    commutation: float
    degenerate_elliptic: float
    norm_gap: float
    match: float
    classification_band: float


@dataclass(frozen=True)
class QuadratureCfg:
    epsrel: float
    epsabs: float
    limit: int
    disagreement: float
    line_tail: float
    distance_cap: float
    oracle_epsrel: float
    oracle_limit: int


@dataclass(frozen=True)
class AdmissibilityCfg:
    epsilon: float
    t_max: float
    samples: int
    growth_slope: float


@dataclass(frozen=True)
class OutputCfg:
    format: str
    digits: int


@dataclass(frozen=True)
class Settings:
    tolerances: Tolerances
    quadrature: QuadratureCfg
    elliptic_order_cap: int
    admissibility: AdmissibilityCfg
    heat_slope_floor: float
    huber_tail_fraction: float
    output: OutputCfg
    threads_env: str

    def threads(self) -> int:
        """Worker threads for per-class evaluation, read from ``threads_env``."""
        raw = os.getenv(self.threads_env, "1")
        try:
            return max(1, int(raw))
        except ValueError:
            raise RuntimeError(f"Invalid thread count {raw!r} in ${self.threads_env}")


def _section(raw: dict[str, Any], key: str) -> dict[str, Any]:
    value = raw.get(key)
    if not isinstance(value, dict):
        raise RuntimeError(f"Missing or invalid '{key}' section in settings.json")
    return value


def _number(section: dict[str, Any], key: str, where: str, kind: type = float) -> Any:
    value = section.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RuntimeError(f"Missing or invalid '{key}' under {where} in settings.json")
    return kind(value)


def _loadSettings() -> Settings:

    base_dir = Path(__file__).parent
    settings_path = base_dir / "settings.json"
    if not settings_path.exists():
        raise FileNotFoundError(f"Cannot find settings.json at {settings_path}")

    raw: dict[str, Any] = json.loads(settings_path.read_text())

    tol = _section(raw, "tolerances")
    tolerances = Tolerances(
        **{k: _number(tol, k, "tolerances") for k in Tolerances.__dataclass_fields__}
    )

    quad = _section(raw, "quadrature")
    quadrature = QuadratureCfg(
        epsrel=_number(quad, "epsrel", "quadrature"),
        epsabs=_number(quad, "epsabs", "quadrature"),
        limit=_number(quad, "limit", "quadrature", int),
        disagreement=_number(quad, "disagreement", "quadrature"),
        line_tail=_number(quad, "line_tail", "quadrature"),
        distance_cap=_number(quad, "distance_cap", "quadrature"),
        oracle_epsrel=_number(quad, "oracle_epsrel", "quadrature"),
        oracle_limit=_number(quad, "oracle_limit", "quadrature", int),
    )

    adm = _section(raw, "admissibility")
    admissibility = AdmissibilityCfg(
        epsilon=_number(adm, "epsilon", "admissibility"),
        t_max=_number(adm, "t_max", "admissibility"),
        samples=_number(adm, "samples", "admissibility", int),
        growth_slope=_number(adm, "growth_slope", "admissibility"),
    )

    out = _section(raw, "output")
    fmt = out.get("format")
    if fmt not in ("csv", "json"):
        raise RuntimeError("Missing or invalid 'format' under output in settings.json")

    threads_env = raw.get("threads_env")
    if not threads_env or not isinstance(threads_env, str):
        raise RuntimeError("Missing or invalid 'threads_env' in settings.json")

    return Settings(
        tolerances=tolerances,
        quadrature=quadrature,
        elliptic_order_cap=_number(_section(raw, "conjugacy"), "elliptic_order_cap", "conjugacy", int),
        admissibility=admissibility,
        heat_slope_floor=_number(_section(raw, "heat"), "slope_floor", "heat"),
        huber_tail_fraction=_number(_section(raw, "huber"), "tail_fraction", "huber"),
        output=OutputCfg(format=fmt, digits=_number(out, "digits", "output", int)),
        threads_env=threads_env,
    )


settings: Settings = _loadSettings()
