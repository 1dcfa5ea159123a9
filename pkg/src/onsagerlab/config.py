"""Flat ``key = value`` experiment configs with typed defaults."""
from __future__ import annotations

import hashlib
import json
import math
from fractions import Fraction

from .errors import LabError


class ConfigError(LabError):
    condition = "config"


def parse_value(text):
    """Numbers (including ``inf`` and fractions such as ``2/3``), booleans,
    comma-separated lists, otherwise the stripped string."""
    s = text.strip()
    if "," in s:
        return [parse_value(p) for p in s.split(",") if p.strip()]
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("inf", "+inf", "infinity"):
        return math.inf
    if low in ("none", "null", ""):
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    try:
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError):
        return s


def read_config(path):
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = parse_value(v)
    return out


def _coerce(key, value, default):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} expects true/false, got {value!r}")
        return value
    if isinstance(default, list):
        return list(value) if isinstance(value, list) else [value]
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{key} expects an integer, got {value!r}")
        return value
    if isinstance(default, str) and isinstance(value, (int, float)) and not isinstance(value, bool):
        return str(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} expects a number, got {value!r}")
        return float(value)
    return value


def resolve(defaults, *layers):
    """Merge ``layers`` over ``defaults``; unknown keys are rejected by name."""
    cfg = dict(defaults)
    for layer in layers:
        for k, v in layer.items():
            if k not in defaults:
                raise ConfigError(f"unknown config key '{k}'")
            cfg[k] = _coerce(k, v, defaults[k])
    return cfg


def canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default, allow_nan=True)


def _default(x):
    try:
        return x.item()
    except AttributeError:
        return str(x)


def blob_sha1(data: bytes):
    """Content hash in the format git uses for blobs."""
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()
