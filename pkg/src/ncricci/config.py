"""Experiment configuration: JSON schema, validation, tolerances and hashing.

A configuration file is a JSON object; every key is optional::

    {
      "theta": 0.37,
      "tau": [0.0, 1.0],
      "dilaton": [{"m": 1, "n": 0, "re": 0.3, "im": 0.0}, ...],
      "smearing": [{"name": "identity"},
                   {"name": "random", "seed": 1},
                   {"name": "custom", "matrix": [[recs, recs], [recs, recs]]}],
      "grid": {"N": 16, "guard": 12},
      "t_grid": null,
      "spectrum_radius": 12,
      "cheb_n": 40,
      "identity_grid": {"n": 61, "limit": 3.0},
      "prune_tol": 1e-14,
      "tolerances": {"ricci_agreement": 1e-8},
      "golden_expansion": null
    }

Coefficient records are ``{"m", "n", "re", "im"}``.  ``tau`` is ``[re, im]``.
The configuration hash is the SHA-256 of the canonical JSON of the
normalized configuration (after command-line overrides).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .algebra import (
    AlgebraContext,
    MatrixElement,
    TorusElement,
    element_from_records,
    element_to_records,
    is_self_adjoint,
    matrix_from_records,
)

DEFAULT_TOLERANCES: dict[str, float] = {
    "identity": 1e-8,
    "ricci_agreement": 1e-8,
    "spectral_rel": 0.05,
    "spectral_abs": 1e-6,
    "fit_residual": 1e-4,
}

REFERENCE_DILATON = [
    {"m": m, "n": n, "re": 0.3, "im": 0.0} for m, n in ((-1, 0), (0, -1), (0, 1), (1, 0))
]

DEFAULTS: dict[str, Any] = {
    "theta": 0.37,
    "tau": [0.0, 1.0],
    "dilaton": REFERENCE_DILATON,
    "smearing": [{"name": "identity"}, {"name": "random", "seed": 1}],
    "grid": {"N": 16, "guard": 12},
    "t_grid": None,
    "spectrum_radius": 12,
    "cheb_n": 40,
    "identity_grid": {"n": 61, "limit": 3.0},
    "prune_tol": 1e-14,
    "tolerances": {},
    "golden_expansion": None,
}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (exit code 3)."""


def random_self_adjoint_matrix(ctx: AlgebraContext, seed: int, radius: int = 1) -> MatrixElement:
    """Self-adjoint 2x2 matrix over the torus with Gaussian coefficients on ``|m|, |n| <= radius``."""
    rng = np.random.default_rng(seed)

    def draw() -> TorusElement:
        d = {(m, n): complex(rng.normal(), rng.normal())
             for m in range(-radius, radius + 1) for n in range(-radius, radius + 1)}
        return TorusElement.from_dict(ctx, d)

    a, b, d = draw(), draw(), draw()
    a = (a + a.adjoint()) * 0.5
    d = (d + d.adjoint()) * 0.5
    return MatrixElement(((a, b), (b.adjoint(), d)))


@dataclass(frozen=True, eq=False)
class Smearing:
    name: str
    matrix: MatrixElement


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated configuration; ``normalized`` is the canonical JSON-compatible form that is hashed."""

    ctx: AlgebraContext
    dilaton: TorusElement
    smearings: tuple[Smearing, ...]
    grid_n: int
    guard: int
    t_grid: tuple[float, ...] | None
    spectrum_radius: int
    cheb_n: int
    identity_n: int
    identity_limit: float
    tolerances: dict[str, float]
    golden_expansion: str | None
    normalized: dict

    @property
    def config_hash(self) -> str:
        return config_hash(self.normalized)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(normalized: Mapping) -> str:
    return hashlib.sha256(canonical_json(normalized).encode("utf-8")).hexdigest()


def parse_tolerance(text: str) -> tuple[str, float]:
    """``NAME=VALUE`` with a known name and a positive finite value."""
    name, sep, value = text.partition("=")
    name = name.strip()
    if not sep or not name:
        raise ConfigError(f"tolerance must look like NAME=VALUE, got {text!r}")
    if name not in DEFAULT_TOLERANCES:
        raise ConfigError(f"unknown tolerance {name!r}; known: {sorted(DEFAULT_TOLERANCES)}")
    try:
        v = float(value)
    except ValueError as exc:
        raise ConfigError(f"tolerance {name} is not a number: {value!r}") from exc
    if not np.isfinite(v) or v <= 0:
        raise ConfigError(f"tolerance {name} must be positive and finite")
    return name, v


def load_config_file(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _number(raw: Mapping, key: str, kind=float):
    try:
        v = kind(raw[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a {kind.__name__}") from exc
    if kind is float and not np.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    return v


def build_config(raw: Mapping | None = None, grid_n: int | None = None,
                 tolerances: Mapping[str, float] | None = None) -> ExperimentConfig:
    """Validate ``raw`` (merged over the defaults) and apply command-line overrides."""
    raw = dict(raw or {})
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = {**DEFAULTS, **raw}

    theta = _number(cfg, "theta")
    tau_raw = cfg["tau"]
    if not (isinstance(tau_raw, (list, tuple)) and len(tau_raw) == 2):
        raise ConfigError("tau must be [re, im]")
    try:
        tau = complex(float(tau_raw[0]), float(tau_raw[1]))
    except (TypeError, ValueError) as exc:
        raise ConfigError("tau entries must be numbers") from exc
    if not tau.imag > 0:
        raise ConfigError("Im(tau) must be positive")
    prune_tol = _number(cfg, "prune_tol")
    if prune_tol < 0:
        raise ConfigError("prune_tol must be non-negative")
    ctx = AlgebraContext(theta, tau, prune_tol=prune_tol)

    try:
        dilaton = element_from_records(ctx, cfg["dilaton"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"dilaton: {exc}") from exc
    if not is_self_adjoint(dilaton, atol=1e-12):
        raise ConfigError("dilaton must be self-adjoint")

    smearings = []
    for i, s in enumerate(cfg["smearing"]):
        if not isinstance(s, Mapping) or "name" not in s:
            raise ConfigError(f"smearing[{i}] needs a name")
        name = str(s["name"])
        if "matrix" in s:
            try:
                F = matrix_from_records(ctx, s["matrix"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"smearing {name}: {exc}") from exc
        elif name == "identity":
            F = MatrixElement.identity(ctx)
        elif name == "random":
            F = random_self_adjoint_matrix(ctx, int(s.get("seed", 0)), int(s.get("radius", 1)))
        else:
            raise ConfigError(f"smearing {name} needs a matrix")
        smearings.append(Smearing(name, F))
    names = [s.name for s in smearings]
    if len(set(names)) != len(names):
        raise ConfigError("smearing names must be unique")

    grid = dict(cfg["grid"])
    if grid_n is not None:
        grid["N"] = grid_n
    n = _number(grid, "N", int)
    guard = _number({"guard": grid.get("guard", 12)}, "guard", int)
    if n < 1 or guard < 0:
        raise ConfigError("grid.N must be positive and grid.guard non-negative")
    if dilaton.radius > guard:
        raise ConfigError("dilaton support exceeds the guard band")

    t_grid = cfg["t_grid"]
    if t_grid is not None:
        try:
            t_grid = tuple(float(t) for t in t_grid)
        except (TypeError, ValueError) as exc:
            raise ConfigError("t_grid must be a list of numbers") from exc
        if not t_grid or min(t_grid) <= 0 or any(b <= a for a, b in zip(t_grid, t_grid[1:])):
            raise ConfigError("t_grid must be strictly positive and strictly increasing")

    radius = _number(cfg, "spectrum_radius", int)
    cheb_n = _number(cfg, "cheb_n", int)
    if radius < max(1, dilaton.radius) or cheb_n < 4:
        raise ConfigError("spectrum_radius must cover the dilaton and cheb_n must be >= 4")
    ident = dict(cfg["identity_grid"])
    identity_n = _number({"n": ident.get("n", 61)}, "n", int)
    identity_limit = _number({"limit": ident.get("limit", 3.0)}, "limit")
    if identity_n < 2 or identity_limit <= 0:
        raise ConfigError("identity_grid needs n >= 2 and a positive limit")

    tols = dict(DEFAULT_TOLERANCES)
    for k, v in dict(cfg["tolerances"]).items():
        tols.update([parse_tolerance(f"{k}={v}")])
    for k, v in dict(tolerances or {}).items():
        tols.update([parse_tolerance(f"{k}={v}")])

    golden = cfg["golden_expansion"]
    normalized = {
        "theta": theta,
        "tau": [tau.real, tau.imag],
        "dilaton": element_to_records(dilaton),
        "smearing": [dict(s) for s in cfg["smearing"]],
        "grid": {"N": n, "guard": guard},
        "t_grid": list(t_grid) if t_grid is not None else None,
        "spectrum_radius": radius,
        "cheb_n": cheb_n,
        "identity_grid": {"n": identity_n, "limit": identity_limit},
        "prune_tol": prune_tol,
        "tolerances": tols,
        "golden_expansion": str(golden) if golden is not None else None,
    }
    try:
        canonical_json(normalized)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config is not JSON-serializable: {exc}") from exc
    return ExperimentConfig(ctx, dilaton, tuple(smearings), n, guard, t_grid, radius, cheb_n,
                            identity_n, identity_limit, tols, normalized["golden_expansion"], normalized)
