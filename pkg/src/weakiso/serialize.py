"""Canonical JSON helpers: sorted keys, compact separators, explicit schema version."""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction

SCHEMA_VERSION = 1


def _default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def dumps(obj, pretty: bool = False) -> str:
    if pretty:
        return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"
    return canonical_json(obj) + "\n"
