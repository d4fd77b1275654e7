"""Run manifests: config hash, seed, and checksums of every emitted file."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

TOOL_VERSION = "0.1.0"
MANIFEST_NAME = "manifest.json"


def config_hash(config: dict) -> str:
    """Hash of the experiment content; the output location is incidental."""
    content = {k: v for k, v in config.items() if k != "output"}
    canonical = json.dumps(content, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, config: dict, seed: int, extra: dict | None = None) -> dict:
    """Checksum every file in out_dir and write manifest.json last."""
    out_dir = Path(out_dir)
    files = []
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != MANIFEST_NAME:
            rel = p.relative_to(out_dir).as_posix()
            files.append({"path": rel, "sha256": file_sha256(p),
                          "bytes": p.stat().st_size})
    manifest = {
        "schema_version": 1,
        "tool_version": TOOL_VERSION,
        "config_hash": config_hash(config),
        "seed": seed,
        "files": files,
    }
    if extra:
        manifest.update(extra)
    with open(out_dir / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def verify_manifest(out_dir) -> bool:
    """True when every non-manifest file is listed with a matching checksum."""
    out_dir = Path(out_dir)
    with open(out_dir / MANIFEST_NAME) as fh:
        manifest = json.load(fh)
    listed = {entry["path"]: entry["sha256"] for entry in manifest["files"]}
    on_disk = {p.relative_to(out_dir).as_posix(): p
               for p in sorted(out_dir.rglob("*"))
               if p.is_file() and p.name != MANIFEST_NAME}
    if set(listed) != set(on_disk):
        return False
    return all(file_sha256(on_disk[rel]) == digest for rel, digest in listed.items())
