"""Plain-text run configuration: key=value lines, typed schemas, hashing.

A run is described by a flat set of key=value pairs.  They can come from
a config file (one pair per line, ``#`` comments, mandatory
``schema_version``) and from command-line overrides; later sources win.
Every key must belong to the active command's schema, values are parsed
by declared type, and all diagnostics carry the line or argument they
came from.  The resolved configuration canonicalizes to a sorted
key=value text whose hash is embedded in every output artifact, so an
artifact names the exact configuration that regenerates it.

List-valued keys accept comma-separated items; float and int lists also
accept ``lo:hi:step`` range sugar (inclusive of the endpoint up to half a
step).  Point lists for probe sets use ``alpha,beta`` pairs separated by
semicolons.
"""

import hashlib
import math
from dataclasses import dataclass

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Configuration problem, annotated with its source line or field."""


@dataclass(frozen=True)
class FieldSpec:
    """One schema entry: key name, value type, default (None = required)."""

    name: str
    kind: str
    default: object = None
    required: bool = False
    help: str = ""


def _parse_bool(raw: str, where: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {raw!r}")


def _parse_float(raw: str, where: str) -> float:
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {raw!r}") from None
    if not math.isfinite(val):
        raise ConfigError(f"{where}: value must be finite, got {raw!r}")
    return val


def _parse_int(raw: str, where: str) -> int:
    try:
        return int(raw, 10)
    except ValueError:
        raise ConfigError(
            f"{where}: expected an integer, got {raw!r}") from None


def _expand_range(raw: str, where: str):
    lo_s, hi_s, step_s = raw.split(":")
    lo = _parse_float(lo_s, where)
    hi = _parse_float(hi_s, where)
    step = _parse_float(step_s, where)
    if step <= 0.0:
        raise ConfigError(f"{where}: range step must be positive in {raw!r}")
    if hi < lo:
        raise ConfigError(f"{where}: empty range {raw!r}")
    count = int(math.floor((hi - lo) / step + 0.5)) + 1
    return [round(lo + k * step, 12) for k in range(count)]


def _parse_float_list(raw: str, where: str):
    out = []
    for tok in raw.split(","):
        tok = tok.strip()
        if not tok:
            raise ConfigError(f"{where}: empty list item in {raw!r}")
        if ":" in tok:
            out.extend(_expand_range(tok, where))
        else:
            out.append(_parse_float(tok, where))
    return tuple(out)


def _parse_int_list(raw: str, where: str):
    vals = _parse_float_list(raw, where)
    out = []
    for v in vals:
        if abs(v - round(v)) > 1e-9:
            raise ConfigError(f"{where}: expected integers, got {raw!r}")
        out.append(int(round(v)))
    return tuple(out)


def _parse_points(raw: str, where: str):
    pts = []
    for tok in raw.split(";"):
        tok = tok.strip()
        if not tok:
            continue
        parts = tok.split(",")
        if len(parts) != 2:
            raise ConfigError(
                f"{where}: point {tok!r} must be alpha,beta")
        pts.append((_parse_float(parts[0], where),
                    _parse_float(parts[1], where)))
    if not pts:
        raise ConfigError(f"{where}: empty point list")
    return tuple(pts)


_PARSERS = {
    "int": _parse_int,
    "float": _parse_float,
    "bool": _parse_bool,
    "str": lambda raw, where: raw.strip(),
    "floats": _parse_float_list,
    "ints": _parse_int_list,
    "points": _parse_points,
}


def parse_value(kind: str, raw: str, where: str):
    """Parse one raw string by schema type, annotating errors with where."""
    try:
        parser = _PARSERS[kind]
    except KeyError:
        raise ConfigError(f"{where}: unknown schema type {kind!r}") from None
    return parser(raw, where)


def read_config_text(text: str, source: str = "config"):
    """Raw (key, value, where) triples from key=value text.

    Blank lines and ``#`` comments are skipped; a ``schema_version`` line
    is required and must match the supported version.  Duplicate keys are
    rejected, naming both lines.
    """
    items = []
    seen = {}
    version = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        where = f"{source} line {lineno}"
        if "=" not in stripped:
            raise ConfigError(f"{where}: expected key=value, got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        raw = raw.strip()
        if not key:
            raise ConfigError(f"{where}: missing key before '='")
        if key == "schema_version":
            version = _parse_int(raw, where)
            if version != SCHEMA_VERSION:
                raise ConfigError(
                    f"{where}: schema_version {version} is not supported "
                    f"(this build reads version {SCHEMA_VERSION})")
            continue
        if key in seen:
            raise ConfigError(
                f"{where}: duplicate key {key!r} (first set at "
                f"{seen[key]})")
        seen[key] = where
        items.append((key, raw, where))
    if version is None:
        raise ConfigError(
            f"{source}: missing schema_version (expected "
            f"schema_version = {SCHEMA_VERSION})")
    return items


def parse_overrides(tokens):
    """Raw triples from command-line key=value tokens."""
    items = []
    for k, tok in enumerate(tokens, start=1):
        where = f"argument {k} ({tok!r})"
        if "=" not in tok:
            raise ConfigError(f"{where}: expected key=value")
        key, raw = tok.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{where}: missing key before '='")
        items.append((key, raw.strip(), where))
    return items


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration for one command run."""

    command: str
    values: dict
    config_hash: str

    def __getitem__(self, key):
        return self.values[key]

    def canonical_text(self) -> str:
        lines = [f"schema_version = {SCHEMA_VERSION}",
                 f"command = {self.command}"]
        for key in sorted(self.values):
            lines.append(f"{key} = {_canon_value(self.values[key])}")
        return "\n".join(lines) + "\n"


def _canon_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    if isinstance(val, (tuple, list)):
        return ",".join(_canon_value(v) for v in val)
    return str(val)


def resolve(command: str, schema, file_items=(), override_items=()):
    """Typed, validated RunConfig from schema defaults plus two sources.

    File items apply first, command-line overrides second.  Unknown keys
    and type mismatches raise ConfigError with the offending source;
    required keys left unset are reported together.
    """
    by_name = {f.name: f for f in schema}
    values = {f.name: f.default for f in schema}
    explicit = set()
    for key, raw, where in list(file_items) + list(override_items):
        spec = by_name.get(key)
        if spec is None:
            known = ", ".join(sorted(by_name))
            raise ConfigError(
                f"{where}: unknown key {key!r} for command {command!r} "
                f"(known keys: {known})")
        values[key] = parse_value(spec.kind, raw, f"{where}, key {key!r}")
        explicit.add(key)
    missing = [f.name for f in schema
               if f.required and f.name not in explicit]
    if missing:
        raise ConfigError(
            f"command {command!r} requires key(s): {', '.join(missing)}")
    probe = RunConfig(command, values, "")
    digest = hashlib.sha256(probe.canonical_text().encode()).hexdigest()
    return RunConfig(command, values, digest)
