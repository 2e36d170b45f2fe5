"""Sectioned key-value configuration with line-numbered diagnostics.

Grammar: ``[section.sub]`` headers, ``key = value`` entries, ``#`` comments.
Values are numbers, bare words, bracketed comma lists, or inline tables
``{ key = value, ... }``.  The ``piece`` key may repeat inside a material
section; every other duplicate is an error.  Polynomial coefficients are
given in global powers of z.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import CoefficientProfile, DomainSpec, InterfacePath, MaterialPair
from .ports import BoundarySpec
from .counterexample import CounterexampleSpec

_RUN_DEFAULTS = {
    "n_minus": 32,
    "n_plus": 32,
    "dt": 0.002,
    "tau": 1.0,
    "scheme": "implicit-midpoint",
    "seed": 0,
    "cadence": 1,
    "initial": "gaussian",
    "maxshift": 1.0,
    "envelope_c": 50.0,
    "nsamples": 2048,
    "positions": 8,
    "lambda_offsets": [0.25, 0.5, 1.0, 4.0],
    "kato_k": 3,
    "kato_sequences": 5,
    "s_values": [0.0, 0.5, 1.0, 2.0],
    "nquad": 2048,
}

_KNOWN_KEYS = {
    "domain": {"a", "b", "l0"},
    "boundary": {"W_B", "r"},
    "interface": {"t", "l"},
    "run": set(_RUN_DEFAULTS),
    "counterexample": {"epsilon", "xi1", "xi2", "sigma", "klist"},
}


@dataclass
class RawConfig:
    """Parsed sections before semantic validation."""

    sections: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def section(self, name):
        return self.sections.get(name, {})

    def line_of(self, name, key):
        return self.lines.get((name, key))


def _parse_scalar(text, line):
    text = text.strip()
    if not text:
        raise ConfigError("empty value", line)
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        if any(ch in text for ch in ".eE") and not text.lstrip("+-").isdigit():
            return float(text)
        return int(text)
    except ValueError:
        pass
    if all(ch.isalnum() or ch in "-_." for ch in text):
        return text
    raise ConfigError(f"malformed value {text!r}", line)


def _parse_value(text, line):
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError("unterminated list", line)
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(part, line) for part in inner.split(",")]
    if text.startswith("{"):
        if not text.endswith("}"):
            raise ConfigError("unterminated inline table", line)
        return _parse_inline_table(text[1:-1], line)
    return _parse_scalar(text, line)


def _parse_inline_table(inner, line):
    out = {}
    depth = 0
    item = ""
    items = []
    for ch in inner:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            items.append(item)
            item = ""
        else:
            item += ch
    if item.strip():
        items.append(item)
    for part in items:
        if "=" not in part:
            raise ConfigError(f"inline table entry {part.strip()!r} lacks '='", line)
        k, v = part.split("=", 1)
        out[k.strip()] = _parse_value(v, line)
    return out


def _logical_lines(text):
    """Comment-stripped lines, with open brackets joining physical lines."""
    buffer = ""
    start = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped and not buffer:
            continue
        if buffer:
            buffer += " " + stripped
        else:
            buffer, start = stripped, lineno
        if buffer.count("[") + buffer.count("{") > buffer.count("]") + buffer.count("}"):
            continue
        yield start, buffer
        buffer = ""
    if buffer:
        yield start, buffer


def parse_config(path) -> RawConfig:
    """Parse a config file; collects all grammar errors before raising."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    raw = RawConfig()
    errors = []
    section = None
    for lineno, stripped in _logical_lines(text):
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                errors.append(f"line {lineno}: unterminated section header")
                continue
            section = stripped[1:-1].strip()
            raw.sections.setdefault(section, {})
            continue
        if "=" not in stripped:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        if section is None:
            errors.append(f"line {lineno}: entry before any section header")
            continue
        key, value = stripped.split("=", 1)
        key = key.strip()
        try:
            parsed = _parse_value(value, lineno)
        except ConfigError as exc:
            errors.append(str(exc))
            continue
        bucket = raw.sections[section]
        if key == "piece":
            bucket.setdefault("piece", []).append(parsed)
        elif key in bucket:
            errors.append(f"line {lineno}: duplicate key {key!r} in [{section}]")
        else:
            bucket[key] = parsed
        raw.lines[(section, key)] = lineno
    _check_known_keys(raw, errors)
    if errors:
        raise ConfigError("; ".join(errors))
    return raw


def _check_known_keys(raw, errors):
    for name, entries in raw.sections.items():
        if name.startswith("material."):
            parts = name.split(".")
            ok = (len(parts) == 3 and parts[1] in ("minus", "plus")
                  and parts[2] in ("q11", "q22", "q12"))
            if not ok:
                errors.append(f"unknown material section [{name}]")
                continue
            for key in entries:
                if key != "piece":
                    errors.append(
                        f"line {raw.line_of(name, key)}: unknown key {key!r} in [{name}]"
                    )
            continue
        known = _KNOWN_KEYS.get(name)
        if known is None:
            errors.append(f"unknown section [{name}]")
            continue
        for key in entries:
            if key not in known:
                errors.append(
                    f"line {raw.line_of(name, key)}: unknown key {key!r} in [{name}]"
                )


def apply_overrides(raw: RawConfig, pairs):
    """Apply --set section.key=value overrides onto a parsed config."""
    for text in pairs:
        if "=" not in text:
            raise ConfigError(f"override {text!r} must look like section.key=value")
        target, value = text.split("=", 1)
        if "." not in target:
            raise ConfigError(f"override target {target!r} must be section.key")
        section, key = target.rsplit(".", 1)
        raw.sections.setdefault(section, {})[key] = _parse_value(value, None)
    return raw


# -- section builders ----------------------------------------------------

def build_domain(raw: RawConfig) -> DomainSpec:
    sec = raw.section("domain")
    if not sec:
        raise ConfigError("missing [domain] section")
    try:
        return DomainSpec(a=float(sec["a"]), b=float(sec["b"]),
                          l0=float(sec.get("l0", 0.0)))
    except KeyError as exc:
        raise ConfigError(f"[domain] missing key {exc.args[0]!r}") from exc
    except Exception as exc:
        raise ConfigError(f"[domain] invalid: {exc}",
                          raw.line_of("domain", "a")) from exc


def _build_profile(raw, name, dom, positive=True):
    sec = raw.section(name)
    if not sec or "piece" not in sec:
        return None
    pieces = []
    for entry in sec["piece"]:
        if not isinstance(entry, dict):
            raise ConfigError(f"[{name}] piece entries must be inline tables",
                              raw.line_of(name, "piece"))
        missing = {"from", "to", "coeffs"} - set(entry)
        if missing:
            raise ConfigError(f"[{name}] piece missing {sorted(missing)}",
                              raw.line_of(name, "piece"))
        coeffs = [float(c) for c in entry["coeffs"]]
        pieces.append((float(entry["from"]), float(entry["to"]), coeffs))
    try:
        prof = CoefficientProfile.from_pieces(pieces, positive=positive)
    except Exception as exc:
        raise ConfigError(f"[{name}] invalid profile: {exc}",
                          raw.line_of(name, "piece")) from exc
    if abs(prof.a - dom.a) > 1e-12 or abs(prof.b - dom.b) > 1e-12:
        raise ConfigError(
            f"[{name}] covers [{prof.a}, {prof.b}], domain is [{dom.a}, {dom.b}]",
            raw.line_of(name, "piece"))
    return prof


def build_material(raw: RawConfig, dom: DomainSpec) -> MaterialPair:
    entries = {}
    for side in ("minus", "plus"):
        for entry in ("q11", "q22", "q12"):
            entries[(side, entry)] = _build_profile(
                raw, f"material.{side}.{entry}", dom, positive=entry != "q12")
    for side in ("minus", "plus"):
        for entry in ("q11", "q22"):
            if entries[(side, entry)] is None:
                raise ConfigError(f"missing section [material.{side}.{entry}]")
    try:
        return MaterialPair.build(
            qminus11=entries[("minus", "q11")], qminus22=entries[("minus", "q22")],
            qplus11=entries[("plus", "q11")], qplus22=entries[("plus", "q22")],
            qminus12=entries[("minus", "q12")], qplus12=entries[("plus", "q12")],
        )
    except Exception as exc:
        raise ConfigError(f"material invalid: {exc}") from exc


def build_boundary(raw: RawConfig) -> BoundarySpec:
    sec = raw.section("boundary")
    if not sec:
        raise ConfigError("missing [boundary] section")
    wb = sec.get("W_B")
    if wb is None:
        raise ConfigError("[boundary] missing key 'W_B'")
    if not isinstance(wb, list) or len(wb) != 8:
        raise ConfigError(
            f"[boundary] W_B needs exactly 8 entries (row-major 2x4), got "
            f"{len(wb) if isinstance(wb, list) else type(wb).__name__}",
            raw.line_of("boundary", "W_B"))
    W = np.asarray([float(v) for v in wb], dtype=float).reshape(2, 4)
    try:
        return BoundarySpec(W_B=W, r=float(sec.get("r", 0.0)))
    except Exception as exc:
        raise ConfigError(f"[boundary] invalid: {exc}") from exc


def build_path(raw: RawConfig, dom: DomainSpec, tau: float) -> InterfacePath:
    sec = raw.section("interface")
    if not sec:
        return InterfacePath.constant(dom, dom.l0, tau)
    try:
        t = [float(v) for v in sec.get("t", [0.0, tau])]
        l = [float(v) for v in sec.get("l", [dom.l0, dom.l0])]
        return InterfacePath.from_knots(dom, t, l)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"[interface] invalid: {exc}",
                          raw.line_of("interface", "t")) from exc


def build_run(raw: RawConfig) -> dict:
    sec = dict(_RUN_DEFAULTS)
    given = raw.section("run")
    sec.update(given)
    for key in ("n_minus", "n_plus", "seed", "cadence", "positions",
                "kato_k", "kato_sequences", "nsamples", "nquad"):
        sec[key] = int(sec[key])
    for key in ("dt", "tau", "maxshift", "envelope_c"):
        sec[key] = float(sec[key])
    if not isinstance(sec["lambda_offsets"], list):
        sec["lambda_offsets"] = [sec["lambda_offsets"]]
    sec["lambda_offsets"] = [float(v) for v in sec["lambda_offsets"]]
    if not isinstance(sec["s_values"], list):
        sec["s_values"] = [sec["s_values"]]
    sec["s_values"] = [float(v) for v in sec["s_values"]]
    if sec["dt"] <= 0 or sec["tau"] <= 0:
        raise ConfigError("[run] dt and tau must be positive")
    if sec["cadence"] < 1:
        raise ConfigError("[run] cadence must be >= 1")
    return sec


def build_counterexample(raw: RawConfig) -> CounterexampleSpec:
    sec = raw.section("counterexample")
    kwargs = {}
    if "epsilon" in sec:
        kwargs["epsilon"] = float(sec["epsilon"])
    if "xi1" in sec:
        kwargs["xi1"] = float(sec["xi1"])
    if "xi2" in sec:
        kwargs["xi2"] = float(sec["xi2"])
    if "sigma" in sec:
        kwargs["sigma"] = float(sec["sigma"])
    if "klist" in sec:
        klist = sec["klist"]
        if not isinstance(klist, list):
            raise ConfigError("[counterexample] klist must be a list",
                              raw.line_of("counterexample", "klist"))
        kwargs["klist"] = tuple(int(k) for k in klist)
    try:
        return CounterexampleSpec(**kwargs)
    except Exception as exc:
        raise ConfigError(f"[counterexample] invalid: {exc}") from exc
