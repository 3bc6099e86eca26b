"""TOML configuration parsing.

Model documents carry the top-level keys

    dimension    int, 1 | 2 | 3                      (required)
    mu           float   (lindblad form only)
    confinement  bool    (default true)
    hartree      bool    (default false)
    v1           table {form = "cosine"|"gaussian", ...}
    lindblad     array of tables {alpha, beta, gamma} -- complex numbers as
                 [re, im] pairs, alpha/beta arrays of d pairs
    diffusion    table {dpp, dqq, dpq, eta, drift_x, drift_p}

with exactly one of `lindblad` or `diffusion` present.  Unknown keys are
rejected with their path.  Simulation documents add the sections [grid],
[initial], [run], [compare] and [oracle] documented in the README; the model
keys stay at top level.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import DiffusionForm, LindbladModel, V1Spec

__all__ = [
    "ConfigError",
    "ModelDocument",
    "SimulationDocument",
    "parse_model_config",
    "parse_model_document",
    "parse_simulation_document",
    "apply_overrides",
]


class ConfigError(ValueError):
    """Configuration rejected; the message carries the offending key path."""


MODEL_KEYS = {"dimension", "mu", "confinement", "hartree", "v1", "lindblad", "diffusion"}
GRID_KEYS = {"points", "extent"}
INITIAL_KEYS = {"type", "center", "components", "rank", "width", "path"}
RUN_KEYS = {
    "t_end", "dt", "splitting", "diagnostics_every", "snapshot_every",
    "track_positivity", "seed",
}
COMPARE_KEYS = {
    "fock_levels", "sample_every", "tolerance_linf", "tolerance_moments",
}
ORACLE_KEYS = {"levels", "time", "cp_tolerance", "initial_center"}


@dataclass
class ModelDocument:
    dimension: int
    model: LindbladModel | DiffusionForm
    confinement: bool = True
    hartree: bool = False
    v1: V1Spec | None = None


@dataclass
class SimulationDocument:
    model_doc: ModelDocument
    grid: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)


def _load(source: str | Path | dict) -> dict:
    if isinstance(source, dict):
        return source
    text = Path(source).read_text() if isinstance(source, Path) else source
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc


def _reject_unknown(table: dict, allowed: set[str], path: str) -> None:
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)} in {path}")


def _as_complex(value: Any, path: str) -> complex:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) for v in value)):
        raise ConfigError(f"{path}: complex numbers are written as [re, im]")
    return complex(float(value[0]), float(value[1]))


def _as_complex_vector(value: Any, d: int, path: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != d:
        raise ConfigError(f"{path}: expected {d} [re, im] pairs")
    return np.array([_as_complex(v, f"{path}[{i}]") for i, v in enumerate(value)])


def _parse_v1(table: Any) -> V1Spec:
    if not isinstance(table, dict):
        raise ConfigError("v1: expected a table")
    if "form" not in table:
        raise ConfigError("v1: missing 'form'")
    form = table["form"]
    if form == "cosine":
        _reject_unknown(table, {"form", "amplitude", "wavenumber"}, "v1")
        return V1Spec(form="cosine", amplitude=float(table.get("amplitude", 0.0)),
                      wavenumber=float(table.get("wavenumber", 1.0)))
    if form == "gaussian":
        _reject_unknown(table, {"form", "amplitude", "width"}, "v1")
        return V1Spec(form="gaussian", amplitude=float(table.get("amplitude", 0.0)),
                      width=float(table.get("width", 1.0)))
    raise ConfigError(f"v1.form: unknown analytic form {form!r}")


def parse_model_document(source: str | Path | dict) -> ModelDocument:
    doc = _load(source)
    _reject_unknown(doc, MODEL_KEYS, "top level")
    model_part = doc
    if "dimension" not in model_part:
        raise ConfigError("missing required key 'dimension'")
    d = model_part["dimension"]
    if not isinstance(d, int) or d not in (1, 2, 3):
        raise ConfigError("dimension must be the integer 1, 2 or 3")
    has_lind = "lindblad" in model_part
    has_diff = "diffusion" in model_part
    if has_lind and has_diff:
        raise ConfigError("exactly one of 'lindblad' or 'diffusion' allowed, got both")
    if not has_lind and not has_diff:
        raise ConfigError("one of 'lindblad' or 'diffusion' is required")
    confinement = bool(model_part.get("confinement", True))
    hartree = bool(model_part.get("hartree", False))
    v1 = _parse_v1(model_part["v1"]) if "v1" in model_part else None

    if has_lind:
        entries = model_part["lindblad"]
        if not isinstance(entries, list):
            raise ConfigError("lindblad: expected an array of tables")
        coeffs = []
        for j, entry in enumerate(entries):
            path = f"lindblad[{j}]"
            if not isinstance(entry, dict):
                raise ConfigError(f"{path}: expected a table")
            _reject_unknown(entry, {"alpha", "beta", "gamma"}, path)
            alpha = _as_complex_vector(entry.get("alpha", [[0.0, 0.0]] * d), d,
                                       f"{path}.alpha")
            beta = _as_complex_vector(entry.get("beta", [[0.0, 0.0]] * d), d,
                                      f"{path}.beta")
            gamma = _as_complex(entry.get("gamma", [0.0, 0.0]), f"{path}.gamma")
            coeffs.append((alpha, beta, gamma))
        model = LindbladModel(
            d=d, coeffs=coeffs, mu=float(model_part.get("mu", 0.0)),
            confinement=confinement, v1=v1, hartree=hartree,
        )
        return ModelDocument(dimension=d, model=model, confinement=confinement,
                             hartree=hartree, v1=v1)

    if "mu" in model_part:
        raise ConfigError(
            "mu cannot be set with a diffusion block; the phase-space form "
            "fixes mu = eta/2"
        )
    table = model_part["diffusion"]
    if not isinstance(table, dict):
        raise ConfigError("diffusion: expected a table")
    _reject_unknown(table, {"dpp", "dqq", "dpq", "eta", "drift_x", "drift_p"},
                    "diffusion")
    for key in ("dpp", "dqq"):
        if key not in table:
            raise ConfigError(f"diffusion: missing required key '{key}'")

    def vec(key: str) -> np.ndarray | None:
        if key not in table:
            return None
        raw = table[key]
        if isinstance(raw, (int, float)):
            raw = [raw] * d
        return np.asarray(raw, dtype=float)

    form = DiffusionForm(
        dpp=float(table["dpp"]), dqq=float(table["dqq"]),
        dpq=float(table.get("dpq", 0.0)), eta=float(table.get("eta", 0.0)),
        d=d, drift_x=vec("drift_x"), drift_p=vec("drift_p"),
    )
    return ModelDocument(dimension=d, model=form, confinement=confinement,
                         hartree=hartree, v1=v1)


def parse_model_config(source: str | Path | dict) -> LindbladModel | DiffusionForm:
    """Strict model parse; returns exactly one of the two parameterizations."""
    return parse_model_document(source).model


def parse_simulation_document(source: str | Path | dict) -> SimulationDocument:
    doc = _load(source)
    allowed = MODEL_KEYS | {"grid", "initial", "run", "compare", "oracle"}
    _reject_unknown(doc, allowed, "top level")
    model_doc = parse_model_document({k: v for k, v in doc.items() if k in MODEL_KEYS})
    sections = SimulationDocument(model_doc=model_doc)
    for name, keys in (("grid", GRID_KEYS), ("initial", INITIAL_KEYS),
                       ("run", RUN_KEYS), ("compare", COMPARE_KEYS),
                       ("oracle", ORACLE_KEYS)):
        if name in doc:
            table = doc[name]
            if not isinstance(table, dict):
                raise ConfigError(f"[{name}] must be a table")
            _reject_unknown(table, keys, f"[{name}]")
            setattr(sections, name, table)
    return sections


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply dotted-key=TOML-value overrides to a parsed document."""
    out = doc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw_value = item.split("=", 1)
        try:
            value = tomllib.loads(f"v = {raw_value}")["v"]
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"override {item!r}: bad value ({exc})") from exc
        node = out
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r}: {part} is not a table")
        node[parts[-1]] = value
    return out
