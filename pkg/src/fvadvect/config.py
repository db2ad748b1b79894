"""Experiment and study configuration files.

A configuration is a TOML document with a fixed schema; unknown keys and
wrongly typed values are rejected before anything is computed::

    horizon = 0.5
    xi = 0.1
    snapshots = [0.25]
    output_dir = "runs/square"

    [mesh]
    kind = "cartesian"        # or "perturbed"
    n = 64
    boundary = "periodic"

    [field]
    stream = "uniform"
    a = 1.0

    [initial]
    kind = "indicator"
    rectangle = [0.25, 0.5, 0.25, 0.5]

A study adds ``[study]`` with ``levels = [32, 64, ...]`` and
``window = [lo, hi]``.
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ._validation import check_box, check_positive_int, check_real, check_xi
from .flow import VelocityField, check_compatible
from .mesh import build_cartesian, build_perturbed_cartesian
from .scheme import AnalyticData, IndicatorData, PiecewiseConstantData, SchemeConfig

OUTPUT_ROOT_ENV = "ADVECT_OUTPUT_ROOT"


class ConfigError(ValueError):
    """The configuration does not match the schema."""


_TOP_KEYS = {"horizon", "xi", "c0", "snapshots", "sampling_density", "projection",
             "projection_density", "substeps", "output_dir", "mesh", "field", "initial", "study"}
_MESH_KEYS = {"kind", "n", "perturbation", "seed", "boundary", "domain"}
_FIELD_KEYS = {"stream", "a", "b", "amplitude", "time", "omega"}
_INITIAL_KEYS = {
    "indicator": {"kind", "rectangle", "polygons"},
    "piecewise": {"kind", "nx", "ny", "values", "domain"},
    "analytic": {"kind", "name", "center", "width", "radius", "value"},
}
_STUDY_KEYS = {"levels", "window"}


def _reject_unknown(table: dict, allowed: set, where: str) -> None:
    extra = sorted(set(table) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _table(doc: dict, key: str, required: bool = True) -> dict:
    if key not in doc:
        if required:
            raise ConfigError(f"missing [{key}] table")
        return {}
    value = doc[key]
    if not isinstance(value, dict):
        raise ConfigError(f"{key} must be a table")
    return value


def _typed(table, key, kind, where, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"{where}.{key} is required")
        return default
    v = table[key]
    ok = {
        "int": isinstance(v, int) and not isinstance(v, bool),
        "real": isinstance(v, (int, float)) and not isinstance(v, bool),
        "str": isinstance(v, str),
        "list": isinstance(v, list),
    }[kind]
    if not ok:
        raise ConfigError(f"{where}.{key} must be of type {kind}, got {v!r}")
    return float(v) if kind == "real" else v


def _checked(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class MeshSpec:
    kind: str = "cartesian"
    n: int = 16
    perturbation: float = 0.3
    seed: int = 0
    boundary: str = "periodic"
    domain: tuple = (0.0, 1.0, 0.0, 1.0)

    def build(self, n: int | None = None):
        n = self.n if n is None else n
        if self.kind == "cartesian":
            return build_cartesian(n, n, self.domain, self.boundary)
        return build_perturbed_cartesian(n, n, self.domain, self.perturbation, self.seed, self.boundary)


@dataclass(frozen=True)
class ExperimentConfig:
    mesh: MeshSpec
    field: VelocityField
    initial: object
    horizon: float
    scheme: SchemeConfig = SchemeConfig()
    snapshots: tuple = ()
    sampling_density: int = 8
    substeps: int = 16
    output_dir: str = "advect-out"
    study: "StudySpec | None" = None

    def output_path(self, override: str | None = None) -> Path:
        """``override``, else ``output_dir`` resolved against ``$ADVECT_OUTPUT_ROOT``."""
        path = Path(override if override is not None else self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not path.is_absolute():
            path = Path(root) / path
        return path


@dataclass(frozen=True)
class StudySpec:
    levels: tuple
    window: tuple = field(default=(0.4, 0.65))


def parse_mesh(t: dict) -> MeshSpec:
    _reject_unknown(t, _MESH_KEYS, "[mesh]")
    w = "mesh"
    kind = _typed(t, "kind", "str", w, "cartesian")
    if kind not in ("cartesian", "perturbed"):
        raise ConfigError(f"mesh.kind must be 'cartesian' or 'perturbed', got {kind!r}")
    n = _checked(check_positive_int, _typed(t, "n", "int", w, 16), "mesh.n")
    pert = _typed(t, "perturbation", "real", w, 0.3)
    if not 0.0 <= pert < 0.5:
        raise ConfigError(f"mesh.perturbation must lie in [0, 0.5), got {pert}")
    seed = _typed(t, "seed", "int", w, 0)
    boundary = _typed(t, "boundary", "str", w, "periodic")
    if boundary not in ("periodic", "impermeable"):
        raise ConfigError(f"mesh.boundary must be 'periodic' or 'impermeable', got {boundary!r}")
    domain = _checked(check_box, _typed(t, "domain", "list", w, [0.0, 1.0, 0.0, 1.0]))
    return MeshSpec(kind, n, pert, seed, boundary, domain)


def parse_field(t: dict) -> VelocityField:
    _reject_unknown(t, _FIELD_KEYS, "[field]")
    w = "field"
    kw = {
        "stream": _typed(t, "stream", "str", w, "uniform"),
        "a": _typed(t, "a", "real", w, 1.0),
        "b": _typed(t, "b", "real", w, 0.0),
        "amplitude": _typed(t, "amplitude", "real", w, 1.0),
        "time": _typed(t, "time", "str", w, "constant"),
        "omega": _typed(t, "omega", "real", w, 1.0),
    }
    return _checked(VelocityField, **kw)


def _point_list(v, where):
    try:
        pts = [(float(p[0]), float(p[1])) for p in v]
        if any(len(p) != 2 for p in v):
            raise ValueError
    except (TypeError, ValueError, IndexError):
        raise ConfigError(f"{where} must be a list of [x, y] pairs") from None
    return pts


def parse_initial(t: dict, domain):
    w = "initial"
    kind = _typed(t, "kind", "str", w, required=True)
    if kind not in _INITIAL_KEYS:
        raise ConfigError(f"initial.kind must be one of {sorted(_INITIAL_KEYS)}, got {kind!r}")
    _reject_unknown(t, _INITIAL_KEYS[kind], f"[initial] ({kind})")
    if kind == "indicator":
        if ("rectangle" in t) == ("polygons" in t):
            raise ConfigError("indicator data needs exactly one of initial.rectangle, initial.polygons")
        if "rectangle" in t:
            r = _typed(t, "rectangle", "list", w)
            x0, x1, y0, y1 = _checked(check_box, r)
            return IndicatorData.rectangle(x0, x1, y0, y1)
        polys = [_point_list(p, "initial.polygons entry") for p in _typed(t, "polygons", "list", w)]
        return _checked(IndicatorData, polys)
    if kind == "piecewise":
        nx = _typed(t, "nx", "int", w, required=True)
        ny = _typed(t, "ny", "int", w, required=True)
        values = _typed(t, "values", "list", w, required=True)
        box = _checked(check_box, _typed(t, "domain", "list", w, list(domain)))
        return _checked(PiecewiseConstantData, nx, ny, box, values)
    params = {}
    if "center" in t:
        params["center"] = tuple(_point_list([_typed(t, "center", "list", w)], "initial.center")[0])
    for key in ("width", "radius", "value"):
        if key in t:
            params[key] = _typed(t, key, "real", w)
    return _checked(AnalyticData, _typed(t, "name", "str", w, required=True), params)


def parse_study(t: dict) -> StudySpec:
    _reject_unknown(t, _STUDY_KEYS, "[study]")
    levels = _typed(t, "levels", "list", "study", required=True)
    if len(levels) < 2:
        raise ConfigError("study.levels needs at least two refinement levels")
    for n in levels:
        _checked(check_positive_int, n, "study level")
    if len(set(levels)) != len(levels):
        raise ConfigError("study.levels contains duplicate levels (duplicate h)")
    window = _typed(t, "window", "list", "study", [0.4, 0.65])
    if len(window) != 2 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in window):
        raise ConfigError("study.window must be [lo, hi]")
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ConfigError("study.window needs lo < hi")
    return StudySpec(tuple(levels), (lo, hi))


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a decoded TOML document and build an :class:`ExperimentConfig`."""
    _reject_unknown(doc, _TOP_KEYS, "top level")
    w = "config"
    mesh = parse_mesh(_table(doc, "mesh"))
    fld = parse_field(_table(doc, "field"))
    _checked(check_compatible, fld, mesh.boundary, mesh.domain)
    initial = parse_initial(_table(doc, "initial"), mesh.domain)

    horizon = _checked(check_real, _typed(doc, "horizon", "real", w, required=True),
                       "horizon", lo=0.0, lo_open=True)
    if not math.isfinite(horizon):
        raise ConfigError("horizon must be finite")
    xi = _checked(check_xi, _typed(doc, "xi", "real", w, 0.1))
    c0 = _typed(doc, "c0", "real", w, math.inf)
    projection = _typed(doc, "projection", "str", w, "exact-clip")
    pdens = _typed(doc, "projection_density", "int", w, 4)
    scheme = _checked(SchemeConfig, xi, c0, projection, pdens)

    snaps = _typed(doc, "snapshots", "list", w, [])
    for s in snaps:
        _checked(check_real, s, "snapshot time", lo=0.0, hi=horizon)
    density = _checked(check_positive_int, _typed(doc, "sampling_density", "int", w, 8), "sampling_density")
    substeps = _checked(check_positive_int, _typed(doc, "substeps", "int", w, 16), "substeps")
    out = _typed(doc, "output_dir", "str", w, "advect-out")
    study = parse_study(_table(doc, "study")) if "study" in doc else None
    return ExperimentConfig(mesh, fld, initial, horizon, scheme, tuple(float(s) for s in snaps),
                            density, substeps, out, study)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(doc)


def at_level(config: ExperimentConfig, n: int) -> ExperimentConfig:
    return replace(config, mesh=replace(config.mesh, n=n))
