"""Run descriptors: YAML or JSON key-value trees and their field parsers.

A descriptor is a mapping.  The commonly used keys are

``system``
    a system descriptor (see :func:`spapprox.psi_system.build_system`);
``element``
    ``{"dimension": d, "coefficients": [[index, re, im], ...]}``,
    ``{"text": "..."}`` or ``{"file": path}`` in the plain text format;
``params``
    command parameters; numeric sweeps accept a scalar, a list, a string
    ``"a..b"`` or ``{"start", "stop", "step"}`` / ``{"geom": [a, b, count]}``.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import DescriptorError
from .sp_space import SpElement


def load_descriptor(path: str | Path | None) -> dict[str, Any]:
    """Read a YAML or JSON descriptor; ``None`` gives an empty one."""
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise DescriptorError(f"config: file {str(path)!r} does not exist")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise DescriptorError(f"config: cannot parse {path.name}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise DescriptorError("config: top level must be a mapping")
    data["_base"] = str(path.parent)
    return data


def canonical_hash(data: Any) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def parse_value(text: str) -> Any:
    """Command-line ``key=value`` right-hand sides are parsed as YAML scalars or lists."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def parse_float(value: Any, field: str) -> float:
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(value)
    except (TypeError, ValueError):
        raise DescriptorError(f"params.{field}: expected a number, got {value!r}") from None


def parse_range(value: Any, field: str, integer: bool = False) -> list:
    """Sweep values from a scalar, list, ``"a..b"`` string or mapping."""
    if value is None:
        raise DescriptorError(f"params.{field}: missing")
    if isinstance(value, str) and ".." in value:
        lo, hi = value.split("..", 1)
        values: list = list(range(int(lo), int(hi) + 1))
    elif isinstance(value, dict):
        if "geom" in value:
            a, b, count = value["geom"]
            values = list(np.geomspace(float(a), float(b), int(count)))
            if integer:
                values = sorted({int(round(x)) for x in values})
        elif "start" in value and "stop" in value:
            start, stop = value["start"], value["stop"]
            step = value.get("step", 1)
            if integer:
                values = list(range(int(start), int(stop) + 1, int(step)))
            else:
                count = int(round((float(stop) - float(start)) / float(step))) + 1
                values = [float(start) + i * float(step) for i in range(count)]
        else:
            raise DescriptorError(f"params.{field}: mapping needs 'geom' or 'start'/'stop'")
    elif isinstance(value, (list, tuple)):
        values = list(value)
    else:
        values = [value]
    if not values:
        raise DescriptorError(f"params.{field}: empty range")
    if integer:
        out = []
        for v in values:
            if isinstance(v, float) and not v.is_integer():
                raise DescriptorError(f"params.{field}: {v!r} is not an integer")
            out.append(int(v))
        return out
    return [parse_float(v, field) for v in values]


def parse_index(raw: Any) -> int | tuple[int, ...]:
    if isinstance(raw, (list, tuple)):
        return tuple(int(x) for x in raw)
    return int(raw)


def parse_element(spec: Any, base: str | None = None) -> SpElement:
    """Build an element from a descriptor block.

    Raises
    ------
    DescriptorError
        With the offending field named.
    """
    if spec is None:
        raise DescriptorError("element: missing")
    if not isinstance(spec, dict):
        raise DescriptorError("element: expected a mapping")
    dim = spec.get("dimension")
    dim = None if dim is None else int(dim)
    if "file" in spec:
        path = Path(base or ".") / spec["file"]
        if not path.is_file():
            raise DescriptorError(f"element.file: {str(path)!r} does not exist")
        return SpElement.from_text(path.read_text(encoding="utf-8"), dim)
    if "text" in spec:
        return SpElement.from_text(str(spec["text"]), dim)
    rows = spec.get("coefficients")
    if not rows:
        raise DescriptorError("element.coefficients: missing or empty")
    coeffs = {}
    for i, row in enumerate(rows):
        if not isinstance(row, (list, tuple)) or len(row) not in (2, 3):
            raise DescriptorError(f"element.coefficients[{i}]: expected [index, re] or [index, re, im]")
        index = parse_index(row[0])
        coeffs[index] = complex(float(row[1]), float(row[2]) if len(row) == 3 else 0.0)
    if dim == 1 and all(isinstance(k, int) for k in coeffs):
        dim = None  # one-dimensional elements are indexed by plain integers
    if dim is None:
        first = next(iter(coeffs))
        dim = len(first) if isinstance(first, tuple) else None
    return SpElement(coeffs, dim)
