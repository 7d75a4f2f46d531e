"""Strict experiment configuration.

YAML in, validated plain-data config out.  Unknown keys are fatal and every
diagnostic starts with the dotted path of the offending field; a silently
ignored typo would invalidate a whole experiment run, so nothing is ignored.

The canonical form keeps only plain Python scalars and lists, with all
defaults filled in, so serialize -> parse round-trips to an equal config.
"""

from __future__ import annotations

import difflib
import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import yaml

from .fields import FIELD_NAMES
from .heisenberg import Box
from .targets import Euclidean, Spider

__all__ = [
    "BOUNDARY_PRESETS",
    "COMMANDS",
    "ConfigError",
    "ExperimentConfig",
    "LATTICE_COMMANDS",
    "load_config",
    "parse_config",
    "serialize_config",
]

COMMANDS = (
    "dist",
    "volume",
    "moments",
    "mcp",
    "solve",
    "subsolution",
    "moser",
    "lipschitz",
    "lemma53",
    "pansu",
)
# commands that build a lattice and hence need geometry.h and a boundary
LATTICE_COMMANDS = ("solve", "subsolution", "moser", "lipschitz")
BOUNDARY_PRESETS = ("tripod", "x1", "t", "zero")
TARGET_KINDS = ("euclidean", "spider")


class ConfigError(ValueError):
    """Invalid configuration; the message names the dotted field path."""


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _mapping(v, path: str) -> dict:
    if v is None:
        return {}
    if not isinstance(v, dict):
        _fail(path, "expected a mapping")
    for k in v:
        if not isinstance(k, str):
            _fail(path, f"non-string key {k!r}")
    return v


def _reject_unknown(raw: dict, path: str, known) -> None:
    for k in raw:
        if k not in known:
            hint = difflib.get_close_matches(k, list(known), n=1)
            extra = f" (did you mean {hint[0]!r}?)" if hint else ""
            _fail(f"{path}.{k}" if path else k, "unknown field" + extra)


def _int_value(v, path: str, lo: Optional[int] = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(path, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        _fail(path, f"must be >= {lo}")
    return int(v)


def _float_value(v, path: str, positive: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(path, f"expected a number, got {v!r}")
    out = float(v)
    if not math.isfinite(out):
        _fail(path, "must be finite")
    if positive and out <= 0:
        _fail(path, "must be positive")
    return out


def _str_value(v, path: str) -> str:
    if not isinstance(v, str):
        _fail(path, f"expected a string, got {v!r}")
    return v


def _choice(v, path: str, options) -> str:
    s = _str_value(v, path)
    if s not in options:
        _fail(path, f"must be one of {', '.join(options)}")
    return s


def _float_list(
    v,
    path: str,
    length: Optional[int] = None,
    positive: bool = False,
    decreasing: bool = False,
) -> list[float]:
    if not isinstance(v, list) or not v:
        _fail(path, "expected a nonempty list of numbers")
    out = [_float_value(x, f"{path}[{i}]", positive=positive) for i, x in enumerate(v)]
    if length is not None and len(out) != length:
        _fail(path, f"expected {length} entries, got {len(out)}")
    if decreasing and any(b >= a for a, b in zip(out, out[1:])):
        _fail(path, "entries must be strictly decreasing")
    return out


def _point_value(v, path: str, dim: int) -> list[float]:
    return _float_list(v, path, length=dim)


def _int_list(v, path: str, lo: int, hi: int) -> list[int]:
    if not isinstance(v, list) or not v:
        _fail(path, "expected a nonempty list of integers")
    out = [_int_value(x, f"{path}[{i}]", lo=lo) for i, x in enumerate(v)]
    for i, x in enumerate(out):
        if x > hi:
            _fail(f"{path}[{i}]", f"must be <= {hi}")
    return out


# --- sections -----------------------------------------------------------

def _parse_geometry(doc: dict, command: str) -> dict:
    raw = _mapping(doc.get("geometry"), "geometry")
    _reject_unknown(raw, "geometry", ("n", "bounds", "h"))
    n = _int_value(raw.get("n", 1), "geometry.n", lo=1)
    dim = 2 * n + 1
    braw = _mapping(raw.get("bounds"), "geometry.bounds")
    _reject_unknown(braw, "geometry.bounds", ("lo", "hi"))
    lo = _float_list(braw["lo"], "geometry.bounds.lo", length=dim) if "lo" in braw else [0.0] * dim
    hi = _float_list(braw["hi"], "geometry.bounds.hi", length=dim) if "hi" in braw else [1.0] * dim
    if any(b <= a for a, b in zip(lo, hi)):
        _fail("geometry.bounds", "hi must exceed lo in every coordinate")
    out = {"n": n, "bounds": {"lo": lo, "hi": hi}}
    if command in LATTICE_COMMANDS:
        if "h" not in raw:
            _fail("geometry.h", f"required for command {command!r}")
        out["h"] = _float_value(raw["h"], "geometry.h", positive=True)
    elif "h" in raw:
        _fail("geometry.h", f"not used by command {command!r}")
    return out


def _parse_target(doc: dict, command: str) -> Optional[dict]:
    if command not in LATTICE_COMMANDS:
        if "target" in doc:
            _fail("target", f"not used by command {command!r}")
        return None
    raw = _mapping(doc.get("target"), "target")
    _reject_unknown(raw, "target", ("kind", "parameters"))
    kind = _choice(raw.get("kind", "euclidean"), "target.kind", TARGET_KINDS)
    praw = _mapping(raw.get("parameters"), "target.parameters")
    if kind == "euclidean":
        _reject_unknown(praw, "target.parameters", ("dim",))
        params = {"dim": _int_value(praw.get("dim", 1), "target.parameters.dim", lo=1)}
    else:
        _reject_unknown(praw, "target.parameters", ("legs",))
        params = {"legs": _int_value(praw.get("legs", 3), "target.parameters.legs", lo=3)}
    return {"kind": kind, "parameters": params}


def _parse_boundary(doc: dict, command: str) -> Optional[dict]:
    if command not in LATTICE_COMMANDS:
        if "boundary" in doc:
            _fail("boundary", f"not used by command {command!r}")
        return None
    if "boundary" not in doc:
        _fail("boundary", f"required for command {command!r}")
    raw = _mapping(doc["boundary"], "boundary")
    if "table" in raw:
        _reject_unknown(raw, "boundary", ("table",))
        return {"table": _str_value(raw["table"], "boundary.table")}
    preset = _choice(raw.get("preset"), "boundary.preset", BOUNDARY_PRESETS) \
        if "preset" in raw else _fail("boundary.preset", "required (or give boundary.table)")
    if preset == "tripod":
        _reject_unknown(raw, "boundary", ("preset", "amplitude"))
        return {
            "preset": preset,
            "amplitude": _float_value(raw.get("amplitude", 0.25), "boundary.amplitude", positive=True),
        }
    if preset in ("x1", "t"):
        _reject_unknown(raw, "boundary", ("preset", "scale"))
        return {"preset": preset, "scale": _float_value(raw.get("scale", 1.0), "boundary.scale")}
    _reject_unknown(raw, "boundary", ("preset",))
    return {"preset": preset}


# per-command numerics schema: key -> (parser, default); _REQ marks required
_REQ = object()


def _numerics_schema(command: str) -> dict[str, tuple]:
    seed = {"seed": (lambda v, p: _int_value(v, p, lo=0), 0)}
    if command == "dist":
        return seed
    if command in ("volume", "moments"):
        return {
            **seed,
            "radius": (lambda v, p: _float_value(v, p, positive=True), 1.0),
            "samples": (lambda v, p: _int_value(v, p, lo=2), 1_000_000),
        }
    if command == "mcp":
        return {
            **seed,
            "radius": (lambda v, p: _float_value(v, p, positive=True), 1.0),
            "tau": (lambda v, p: _float_value(v, p, positive=True), 0.5),
            "samples": (lambda v, p: _int_value(v, p, lo=2), 20_000),
            "metric": (lambda v, p: _choice(v, p, ("heisenberg", "euclidean")), "heisenberg"),
        }
    if command in ("lemma53", "pansu"):
        return {
            **seed,
            "samples": (lambda v, p: _int_value(v, p, lo=2), 2000 if command == "lemma53" else 4000),
            "ladder": (lambda v, p: _float_list(v, p, positive=True, decreasing=True), None),
            "eps_top": (lambda v, p: _float_value(v, p, positive=True), 0.4),
            "rungs": (lambda v, p: _int_value(v, p, lo=1), 5),
        }
    solve = {
        **seed,
        "tol": (lambda v, p: _float_value(v, p, positive=True), None),
        "max_sweeps": (lambda v, p: _int_value(v, p, lo=1), 100_000),
        "sweep_order": (lambda v, p: _choice(v, p, ("two-color", "lexicographic")), "two-color"),
    }
    if command == "solve":
        return solve
    if command == "subsolution":
        return {
            **solve,
            "generators": (None, None),  # validated against n later
            "steps": (lambda v, p: _int_value(v, p, lo=1), 1),
            "eta_count": (lambda v, p: _int_value(v, p, lo=1), 5),
            "eta_margin": (lambda v, p: _float_value(v, p, positive=True), None),
        }
    if command == "moser":
        return {
            **solve,
            "generators": (None, None),
            "radii": (lambda v, p: _float_list(v, p, positive=True, decreasing=True), [0.25, 0.125]),
            "centers": (None, None),
        }
    if command == "lipschitz":
        return {
            **solve,
            "scales": (lambda v, p: _float_list(v, p, positive=True, decreasing=True), None),
            "collar": (lambda v, p: _float_value(v, p, positive=True), None),
            "center_target": (lambda v, p: _int_value(v, p, lo=1), 1000),
            "eta_count": (lambda v, p: _int_value(v, p, lo=1), 5),
        }
    raise AssertionError(command)


def _parse_numerics(doc: dict, command: str, n: int, dim: int) -> dict:
    raw = _mapping(doc.get("numerics"), "numerics")
    schema = _numerics_schema(command)
    _reject_unknown(raw, "numerics", schema)
    out: dict[str, Any] = {}
    for key, (parser, default) in schema.items():
        if key in raw:
            if key == "generators":
                out[key] = _int_list(raw[key], "numerics.generators", lo=1, hi=2 * n)
            elif key == "centers":
                if not isinstance(raw[key], list) or not raw[key]:
                    _fail("numerics.centers", "expected a nonempty list of points")
                out[key] = [
                    _point_value(c, f"numerics.centers[{i}]", dim)
                    for i, c in enumerate(raw[key])
                ]
            else:
                out[key] = parser(raw[key], f"numerics.{key}")
        else:
            out[key] = default
    return out


def _parse_fields(doc: dict, command: str) -> Optional[dict]:
    wanted = {"lemma53": ("eta", "f"), "pansu": ("f",)}.get(command)
    if wanted is None:
        if "fields" in doc:
            _fail("fields", f"not used by command {command!r}")
        return None
    if "fields" not in doc:
        _fail("fields", f"required for command {command!r}")
    raw = _mapping(doc["fields"], "fields")
    _reject_unknown(raw, "fields", wanted)
    out = {}
    for key in wanted:
        if key not in raw:
            _fail(f"fields.{key}", "required")
        out[key] = _choice(raw[key], f"fields.{key}", FIELD_NAMES)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, canonicalized experiment description.

    All members are plain Python data (no arrays), so two configs parsed
    from the same document compare equal and the YAML round trip is exact.
    """

    command: str
    geometry: dict
    numerics: dict
    output: str
    target: Optional[dict] = None
    boundary: Optional[dict] = None
    points: Optional[list] = None
    point: Optional[list] = None
    fields: Optional[dict] = None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"command": self.command, "geometry": self.geometry}
        if self.target is not None:
            out["target"] = self.target
        if self.boundary is not None:
            out["boundary"] = self.boundary
        if self.points is not None:
            out["points"] = self.points
        if self.point is not None:
            out["point"] = self.point
        if self.fields is not None:
            out["fields"] = self.fields
        # unset optionals (None) are omitted: they re-parse to the same default
        out["numerics"] = {k: v for k, v in self.numerics.items() if v is not None}
        out["output"] = self.output
        return out

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, numerics={**self.numerics, "seed": int(seed)})

    def with_output(self, output: str) -> "ExperimentConfig":
        return replace(self, output=str(output))

    # convenience accessors used by the runners
    @property
    def n(self) -> int:
        return self.geometry["n"]

    @property
    def seed(self) -> int:
        return self.numerics["seed"]

    def box(self) -> Box:
        b = self.geometry["bounds"]
        return Box(b["lo"], b["hi"])

    def space(self):
        if self.target is None:
            return None
        if self.target["kind"] == "euclidean":
            return Euclidean(self.target["parameters"]["dim"])
        return Spider(self.target["parameters"]["legs"])

    def eps_ladder(self) -> list[float]:
        if self.numerics.get("ladder") is not None:
            return list(self.numerics["ladder"])
        top = self.numerics["eps_top"]
        return [top * 0.5**k for k in range(self.numerics["rungs"])]


_TOP_SECTIONS = (
    "command",
    "geometry",
    "target",
    "boundary",
    "points",
    "point",
    "fields",
    "numerics",
    "output",
)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML config document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"config parse error{where}: {exc}") from exc
    doc = _mapping(doc, "config")
    _reject_unknown(doc, "", _TOP_SECTIONS)
    if "command" not in doc:
        _fail("command", "required")
    command = _choice(doc["command"], "command", COMMANDS)

    geometry = _parse_geometry(doc, command)
    n = geometry["n"]
    dim = 2 * n + 1
    target = _parse_target(doc, command)
    boundary = _parse_boundary(doc, command)
    numerics = _parse_numerics(doc, command, n, dim)
    fields = _parse_fields(doc, command)

    points = None
    if command == "dist":
        if "points" not in doc:
            _fail("points", "required for command 'dist' (two endpoints)")
        raw = doc["points"]
        if not isinstance(raw, list) or len(raw) != 2:
            _fail("points", "expected exactly two points")
        points = [_point_value(p, f"points[{i}]", dim) for i, p in enumerate(raw)]
    elif "points" in doc:
        _fail("points", f"not used by command {command!r}")

    point = None
    if command in ("mcp", "lemma53", "pansu"):
        if "point" in doc:
            point = _point_value(doc["point"], "point", dim)
        else:
            point = [0.0] * dim
    elif "point" in doc:
        _fail("point", f"not used by command {command!r}")

    output = _str_value(doc.get("output", "out"), "output")
    if not output:
        _fail("output", "must be a nonempty path")

    return ExperimentConfig(
        command=command,
        geometry=geometry,
        numerics=numerics,
        output=output,
        target=target,
        boundary=boundary,
        points=points,
        point=point,
        fields=fields,
    )


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical YAML for a config; parse_config(serialize_config(c)) == c."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def load_config(path: str) -> ExperimentConfig:
    """Read and parse a config file.  OSError propagates to the caller."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
