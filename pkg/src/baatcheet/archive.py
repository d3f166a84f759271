"""Deterministic single-file model archives.

Layout: a gzip-compressed tar with exactly two members, metadata.json
(format version + fingerprint) and project.json (the model payload). All
timestamps, ownership and the gzip header name are zeroed, so packaging
the same payload twice yields byte-identical files. The fingerprint is
the SHA-256 of the canonical payload serialization and is re-verified on
load; any mismatch or unknown version is an explicit error, never a
silent misread.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import tarfile
from pathlib import Path

from .errors import ArchiveError

FORMAT_VERSION = 1
METADATA_MEMBER = "metadata.json"
PAYLOAD_MEMBER = "project.json"


def canonical_bytes(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def fingerprint_payload(payload: dict) -> str:
    return hashlib.sha256(canonical_bytes(payload)).hexdigest()


def _tar_member(name: str, data: bytes) -> tarfile.TarInfo:
    info = tarfile.TarInfo(name)
    info.size = len(data)
    info.mtime = 0
    info.uid = 0
    info.gid = 0
    info.uname = ""
    info.gname = ""
    info.mode = 0o644
    return info


def write_archive(payload: dict, path: str | Path) -> str:
    """Write the payload archive; returns its fingerprint."""
    digest = fingerprint_payload(payload)
    metadata = {"format_version": FORMAT_VERSION, "fingerprint": digest}
    members = [
        (METADATA_MEMBER, json.dumps(metadata, sort_keys=True, indent=2).encode("utf-8")),
        (PAYLOAD_MEMBER, canonical_bytes(payload)),
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as raw:
        with gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
            with tarfile.open(fileobj=gz, mode="w") as tar:
                for name, data in members:
                    tar.addfile(_tar_member(name, data), io.BytesIO(data))
    return digest


def _read_member(tar: tarfile.TarFile, name: str) -> bytes:
    try:
        handle = tar.extractfile(name)
    except KeyError:
        handle = None
    if handle is None:
        raise ArchiveError(f"archive is missing member {name!r}")
    with handle:
        return handle.read()


def read_archive(path: str | Path) -> tuple[dict, str]:
    """Read and verify an archive; returns (payload, fingerprint)."""
    path = Path(path)
    if not path.exists():
        raise ArchiveError(f"no such archive: {path}")
    try:
        with tarfile.open(path, mode="r:gz") as tar:
            metadata = json.loads(_read_member(tar, METADATA_MEMBER))
            payload_bytes = _read_member(tar, PAYLOAD_MEMBER)
    except (tarfile.TarError, gzip.BadGzipFile, OSError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"cannot read archive {path}: {exc}") from exc
    version = metadata.get("format_version")
    if version != FORMAT_VERSION:
        raise ArchiveError(
            f"unsupported archive format version {version!r} (expected {FORMAT_VERSION})"
        )
    try:
        payload = json.loads(payload_bytes)
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"corrupt archive payload: {exc}") from exc
    digest = fingerprint_payload(payload)
    if digest != metadata.get("fingerprint"):
        raise ArchiveError("archive fingerprint mismatch: content was altered")
    return payload, digest
