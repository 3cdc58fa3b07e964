"""Flat key/value text files and provenance headers.

Parameter sets, fit results, and bob data are stored as plain
``key = value`` lines with ``#`` comments. Floats are written with
``repr`` so a load/save round trip is bit-exact. Output files produced
by the CLI carry a provenance header (tool version, input digests,
key parameters) as comment lines.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

TOOL_VERSION = "0.1.0"


def format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_kv(pairs: dict, path, header: list[str] | None = None) -> None:
    """Write a ``key = value`` file, with optional comment header lines."""
    lines = [f"# {h}" for h in (header or [])]
    lines += [f"{k} = {format_value(v)}" for k, v in pairs.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_kv(path) -> dict[str, str]:
    """Read a ``key = value`` file into a dict of raw strings."""
    out: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed key/value line: {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def provenance_lines(inputs: list, params: dict | None = None) -> list[str]:
    """Comment lines recording tool version, input hashes and parameters."""
    lines = [f"sleddyn {TOOL_VERSION}"]
    for p in inputs:
        lines.append(f"input {Path(p).name} sha256:{file_digest(p)}")
    for k, v in (params or {}).items():
        lines.append(f"param {k} = {format_value(v)}")
    return lines
