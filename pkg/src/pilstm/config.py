"""Line-oriented, versioned ``key = <json value>`` files for run configs and manifests."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping

from pilstm.errors import BadConfig

CONFIG_TAG = "# pilstm-config v1"
MANIFEST_TAG = "# pilstm-manifest v1"


def dump_lines(tag: str, items: Iterable[tuple[str, object]], comments: Iterable[str] = ()) -> str:
    lines = [tag, *(f"# {c}" for c in comments)]
    lines += [f"{k} = {json.dumps(v, sort_keys=True)}" for k, v in items]
    return "\n".join(lines) + "\n"


def parse_lines(text: str, tag: str, *, source: str = "<text>") -> list[tuple[str, object]]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != tag:
        raise BadConfig(f"{source}: first line must be {tag!r}")
    out = []
    for no, line in enumerate(lines[1:], start=2):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        key, sep, value = s.partition("=")
        if not sep or not key.strip():
            raise BadConfig(f"{source}:{no}: expected 'key = value'")
        try:
            out.append((key.strip(), json.loads(value.strip())))
        except json.JSONDecodeError as exc:
            raise BadConfig(f"{source}:{no}: value is not valid JSON: {exc.msg}") from exc
    return out


def read_config(path: str | Path, allowed: Iterable[str]) -> dict[str, object]:
    """Read a config file, rejecting unknown or repeated keys."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    allowed = set(allowed)
    out: dict[str, object] = {}
    for key, value in parse_lines(p.read_text(encoding="utf-8"), CONFIG_TAG, source=str(p)):
        if key not in allowed:
            raise BadConfig(f"{p}: unknown key {key!r} (allowed: {', '.join(sorted(allowed))})")
        if key in out:
            raise BadConfig(f"{p}: key {key!r} given twice")
        out[key] = value
    return out


def write_config(path: str | Path, values: Mapping[str, object], command: str) -> None:
    Path(path).write_text(dump_lines(CONFIG_TAG, sorted(values.items()), [f"resolved options of `{command}`"]), encoding="utf-8")


def digest(obj: object) -> str:
    """Stable SHA-256 of a JSON-serializable object."""
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode("utf-8")).hexdigest()


def write_manifest(path: str | Path, entries: Iterable[Mapping[str, object]], header: Mapping[str, object]) -> None:
    items = list(header.items()) + [("scenario", dict(e)) for e in entries]
    Path(path).write_text(dump_lines(MANIFEST_TAG, items), encoding="utf-8")


def read_manifest(path: str | Path) -> tuple[dict[str, object], list[dict]]:
    p = Path(path)
    header, entries = {}, []
    for key, value in parse_lines(p.read_text(encoding="utf-8"), MANIFEST_TAG, source=str(p)):
        if key == "scenario":
            entries.append(value)
        else:
            header[key] = value
    return header, entries
