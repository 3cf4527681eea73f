"""S2MA attention archives: one head-averaged attention matrix per file.

Layout (little-endian, 32-byte header followed by the payload)::

    offset size field
    0      4    magic b"S2MA"
    4      2    format version (u16, currently 1)
    6      4    seed_id (u32)
    10     2    step_index (u16)
    12     2    layer_index (u16)
    14     2    frames_latent      16  2  height_tokens   18  2  width_tokens
    20     2    patch_t            22  2  patch_h         24  2  patch_w
    26     2    frame_height       28  2  frame_width     30  2  frame_count
    32     4*N*N  float32 matrix, row-major, N = total_tokens

A directory of archives carries ``manifest.json`` listing every file with its
(seed_id, step_index, layer_index).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attention import AttentionRecord, TokenGrid, validate_record
from .errors import ArchiveFormatError, InvalidRecord

MAGIC = b"S2MA"
VERSION = 1
HEADER = struct.Struct("<4sHIHH9H")
HEADER_SIZE = HEADER.size
MANIFEST = "manifest.json"
SUFFIX = ".s2ma"

assert HEADER_SIZE == 32


@dataclass(frozen=True)
class ArchiveHeader:
    version: int
    seed_id: int
    step_index: int
    layer_index: int
    grid: TokenGrid


def encode(record: AttentionRecord) -> bytes:
    g = record.grid
    n = g.total_tokens
    matrix = np.asarray(record.matrix)
    if matrix.shape != (n, n):
        raise ArchiveFormatError(f"matrix shape {matrix.shape} != ({n}, {n})")
    try:
        header = HEADER.pack(
            MAGIC, VERSION, record.seed_id, record.step_index, record.layer_index,
            g.frames_latent, g.height_tokens, g.width_tokens, g.patch_t, g.patch_h, g.patch_w,
            g.frame_height, g.frame_width, g.frame_count,
        )
    except struct.error as exc:
        raise ArchiveFormatError(f"header field out of range: {exc}") from exc
    return header + np.ascontiguousarray(matrix, dtype="<f4").tobytes()


def decode_header(data: bytes) -> ArchiveHeader:
    if len(data) < HEADER_SIZE:
        raise ArchiveFormatError(f"archive shorter than its {HEADER_SIZE}-byte header")
    magic, version, seed, step, layer, *dims = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ArchiveFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ArchiveFormatError(f"unsupported archive version {version}")
    ft, ht, wt, pt, ph, pw, fh, fw, fc = dims
    try:
        grid = TokenGrid(ft, ht, wt, pt, ph, pw, fh, fw, fc)
    except ValueError as exc:
        raise ArchiveFormatError(f"inconsistent grid in header: {exc}") from exc
    return ArchiveHeader(version, seed, step, layer, grid)


def decode(data: bytes, validate=True) -> AttentionRecord:
    head = decode_header(data)
    n = head.grid.total_tokens
    expected = HEADER_SIZE + 4 * n * n
    if len(data) != expected:
        raise ArchiveFormatError(f"archive is {len(data)} bytes, expected {expected}")
    matrix = np.frombuffer(data, dtype="<f4", offset=HEADER_SIZE).reshape(n, n).astype(np.float32)
    record = AttentionRecord(head.seed_id, head.step_index, head.layer_index, head.grid, matrix)
    if validate:
        problems = validate_record(record)
        if problems:
            first = problems[0]
            raise InvalidRecord(
                f"seed {head.seed_id} step {head.step_index} layer {head.layer_index}: "
                f"{len(problems)} violation(s), first {first.kind} {first.detail}"
            )
    return record


def archive_name(seed_id, step_index, layer_index):
    return f"seed{seed_id:05d}_step{step_index:03d}_layer{layer_index:03d}{SUFFIX}"


def write_archive(path, record: AttentionRecord):
    Path(path).write_bytes(encode(record))


def read_archive(path, validate=True) -> AttentionRecord:
    return decode(Path(path).read_bytes(), validate=validate)


def write_archive_dir(directory, records, extra=None) -> dict:
    """Write one file per record plus ``manifest.json``; returns the manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in sorted(records, key=lambda r: (r.seed_id, r.step_index, r.layer_index)):
        name = archive_name(rec.seed_id, rec.step_index, rec.layer_index)
        write_archive(directory / name, rec)
        entries.append({"file": name, "seed_id": rec.seed_id, "step_index": rec.step_index,
                        "layer_index": rec.layer_index})
    manifest = {"format": "S2MA", "version": VERSION, "archives": entries}
    if extra:
        manifest.update(extra)
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def list_archives(directory) -> list[dict]:
    """Index entries of a directory, from the manifest or from file headers."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ArchiveFormatError(f"{directory} is not a directory")
    manifest = directory / MANIFEST
    if manifest.exists():
        try:
            return list(json.loads(manifest.read_text())["archives"])
        except (ValueError, KeyError) as exc:
            raise ArchiveFormatError(f"unreadable manifest {manifest}: {exc}") from exc
    entries = []
    for path in sorted(directory.glob(f"*{SUFFIX}")):
        with open(path, "rb") as fh:
            head = decode_header(fh.read(HEADER_SIZE))
        entries.append({"file": path.name, "seed_id": head.seed_id, "step_index": head.step_index,
                        "layer_index": head.layer_index})
    return entries
