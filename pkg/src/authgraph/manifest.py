"""Run manifests: a reproducibility sidecar written beside every CLI output."""

from __future__ import annotations

import json
from datetime import datetime, timezone
from hashlib import blake2b

from . import __version__
from .errors import IoError


def file_checksum(path: str) -> str:
    h = blake2b(digest_size=8)
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    return h.hexdigest()


def build_manifest(command: str, config: dict, inputs: list[str],
                   seed: int | None = None) -> dict:
    return {
        "command": command,
        "config": config,
        "input_checksums": {p: file_checksum(p) for p in sorted(inputs)},
        "seed": seed,
        "tool_version": __version__,
        "wall_clock": datetime.now(timezone.utc).isoformat(),
    }


def write_manifest(output_path: str, manifest: dict) -> str:
    path = f"{output_path}.manifest.json"
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None
    return path
