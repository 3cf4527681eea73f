"""Attention tensors on a spatiotemporal token grid and per-seed signatures."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyTokenSet, GridMismatch, MissingLayer, RecordMismatch

ROW_SUM_TOLERANCE = 1e-4


class RegionKind(str, enum.Enum):
    FOREGROUND = "Foreground"
    INVERSE_FOREGROUND = "InverseForeground"
    PLACEMENT_MASK = "PlacementMask"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"fg": cls.FOREGROUND, "bg": cls.INVERSE_FOREGROUND, "pl": cls.PLACEMENT_MASK}
        key = str(value)
        if key.lower() in aliases:
            return aliases[key.lower()]
        for member in cls:
            if member.value.lower() == key.lower() or member.name.lower() == key.lower():
                return member
        raise ValueError(f"unknown region kind {value!r}")


@dataclass(frozen=True)
class TokenGrid:
    """Latent patch lattice. Token indices are row-major over (t, h, w)."""

    frames_latent: int
    height_tokens: int
    width_tokens: int
    patch_t: int
    patch_h: int
    patch_w: int
    frame_height: int
    frame_width: int
    frame_count: int

    def __post_init__(self):
        for name in ("patch_t", "patch_h", "patch_w", "frame_height", "frame_width", "frame_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        expected = (
            math.ceil(self.frame_count / self.patch_t),
            math.ceil(self.frame_height / self.patch_h),
            math.ceil(self.frame_width / self.patch_w),
        )
        actual = (self.frames_latent, self.height_tokens, self.width_tokens)
        if actual != expected:
            raise ValueError(f"token counts {actual} inconsistent with frame/patch sizes (expected {expected})")

    @classmethod
    def from_frames(cls, frame_count, frame_height, frame_width, patch_t=1, patch_h=1, patch_w=1):
        return cls(
            frames_latent=math.ceil(frame_count / patch_t),
            height_tokens=math.ceil(frame_height / patch_h),
            width_tokens=math.ceil(frame_width / patch_w),
            patch_t=patch_t,
            patch_h=patch_h,
            patch_w=patch_w,
            frame_height=frame_height,
            frame_width=frame_width,
            frame_count=frame_count,
        )

    @property
    def shape(self):
        return (self.frames_latent, self.height_tokens, self.width_tokens)

    @property
    def tokens_per_slice(self):
        return self.height_tokens * self.width_tokens

    @property
    def total_tokens(self):
        return self.frames_latent * self.height_tokens * self.width_tokens

    def index(self, t, h, w):
        if not (0 <= t < self.frames_latent and 0 <= h < self.height_tokens and 0 <= w < self.width_tokens):
            raise IndexError(f"cell {(t, h, w)} outside grid {self.shape}")
        return (t * self.height_tokens + h) * self.width_tokens + w

    def cell(self, index):
        if not 0 <= index < self.total_tokens:
            raise IndexError(f"token {index} outside [0, {self.total_tokens})")
        t, rest = divmod(index, self.tokens_per_slice)
        h, w = divmod(rest, self.width_tokens)
        return t, h, w

    def coordinates(self):
        """(total_tokens, 3) array of (t, h, w) cell coordinates in token order."""
        t, h, w = np.meshgrid(
            np.arange(self.frames_latent),
            np.arange(self.height_tokens),
            np.arange(self.width_tokens),
            indexing="ij",
        )
        return np.stack([t.ravel(), h.ravel(), w.ravel()], axis=1).astype(np.float64)


@dataclass(frozen=True)
class AttentionRecord:
    """Head-averaged self-attention for one (seed, step, layer).

    Construction does not validate the matrix; use :func:`validate_record`.
    """

    seed_id: int
    step_index: int
    layer_index: int
    grid: TokenGrid
    matrix: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class TokenSet:
    indices: tuple
    region_kind: RegionKind

    def __post_init__(self):
        if not self.indices:
            raise EmptyTokenSet("token set must not be empty")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("token indices must be strictly increasing")
        if self.indices[0] < 0:
            raise ValueError("token indices must be non-negative")

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class Signature:
    seed_id: int
    vector: np.ndarray = field(repr=False)
    step_index: int
    layer_range: tuple
    region_kind: RegionKind


@dataclass(frozen=True)
class Violation:
    kind: str  # "Dimension" | "RowSum" | "Negativity" | "NonFinite"
    row: int | None = None
    col: int | None = None
    detail: str = ""


def _as_binary_mask(mask):
    arr = np.asarray(mask)
    if arr.dtype == bool:
        return arr
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("mask must be binary (0/1 or bool)")
    return arr.astype(bool)


def mask_to_tokens(mask, grid: TokenGrid, region=RegionKind.FOREGROUND, coverage_threshold=0.5) -> TokenSet:
    """Project a first-frame pixel mask onto the t = 0 token slice.

    A cell is selected when the fraction of its pixels inside the mask (or
    outside it, for InverseForeground) is at least ``coverage_threshold``.
    Edge cells that are cut by the frame border use their actual pixel count.
    """
    region = RegionKind.parse(region)
    if not 0.0 < coverage_threshold <= 1.0:
        raise ValueError("coverage_threshold must lie in (0, 1]")
    m = _as_binary_mask(mask)
    if m.shape != (grid.frame_height, grid.frame_width):
        raise GridMismatch(f"mask shape {m.shape} != frame size {(grid.frame_height, grid.frame_width)}")

    ph, pw = grid.patch_h, grid.patch_w
    pad_h = grid.height_tokens * ph - grid.frame_height
    pad_w = grid.width_tokens * pw - grid.frame_width
    inside = np.pad(m.astype(np.int64), ((0, pad_h), (0, pad_w)))
    valid = np.pad(np.ones_like(m, dtype=np.int64), ((0, pad_h), (0, pad_w)))
    blocks = (grid.height_tokens, ph, grid.width_tokens, pw)
    n_in = inside.reshape(blocks).sum(axis=(1, 3))
    n_all = valid.reshape(blocks).sum(axis=(1, 3))
    if region is RegionKind.INVERSE_FOREGROUND:
        coverage = (n_all - n_in) / n_all
    else:
        coverage = n_in / n_all

    cells = np.flatnonzero(coverage.ravel() >= coverage_threshold)
    if cells.size == 0:
        raise EmptyTokenSet(
            f"no token cell reaches {region.value} coverage {coverage_threshold}; retry with a lower threshold"
        )
    # slice t = 0 occupies indices [0, tokens_per_slice)
    return TokenSet(tuple(int(i) for i in cells), region)


def validate_record(record: AttentionRecord) -> list[Violation]:
    """All dimension, negativity and row-sum problems in ``record``."""
    n = record.grid.total_tokens
    m = np.asarray(record.matrix)
    if m.ndim != 2 or m.shape != (n, n):
        return [Violation("Dimension", detail=f"matrix shape {m.shape} != ({n}, {n})")]
    out = []
    finite = np.isfinite(m)
    for r, c in zip(*np.nonzero(~finite)):
        out.append(Violation("NonFinite", int(r), int(c), f"entry {m[r, c]!r}"))
    for r, c in zip(*np.nonzero(finite & (m < 0))):
        out.append(Violation("Negativity", int(r), int(c), f"entry {float(m[r, c])!r} < 0"))
    sums = m.sum(axis=1, dtype=np.float64)
    for r in np.flatnonzero(~(np.abs(sums - 1.0) <= ROW_SUM_TOLERANCE)):
        out.append(Violation("RowSum", int(r), None, f"row sums to {float(sums[r])!r}"))
    return out


def aggregate_signature(
    records: Iterable[AttentionRecord],
    tokens: TokenSet,
    layer_range: Sequence[int] | None = None,
) -> Signature:
    """Mean attention row over ``tokens``, averaged uniformly across layers.

    Layers are summed in ascending ``layer_index`` order, so the result does not
    depend on the order of ``records``. If ``layer_range`` = (m, n) is given,
    every layer m..n must be present and only those are used.
    """
    records = list(records)
    if not records:
        raise MissingLayer("no attention records supplied")
    first = records[0]
    for rec in records[1:]:
        if rec.grid != first.grid:
            raise GridMismatch(f"layer {rec.layer_index} grid differs from layer {first.layer_index}")
        if rec.seed_id != first.seed_id or rec.step_index != first.step_index:
            raise RecordMismatch("records must share seed_id and step_index")
    by_layer = {}
    for rec in records:
        if rec.layer_index in by_layer:
            raise RecordMismatch(f"duplicate record for layer {rec.layer_index}")
        by_layer[rec.layer_index] = rec

    if layer_range is None:
        layers = sorted(by_layer)
    else:
        lo, hi = int(layer_range[0]), int(layer_range[1])
        if lo > hi:
            raise ValueError("layer range must satisfy m <= n")
        layers = list(range(lo, hi + 1))
        missing = [l for l in layers if l not in by_layer]
        if missing:
            raise MissingLayer(f"seed {first.seed_id} step {first.step_index}: missing layers {missing}")

    n = first.grid.total_tokens
    idx = np.asarray(tokens.indices, dtype=np.intp)
    if idx[-1] >= n:
        raise GridMismatch(f"token {int(idx[-1])} outside grid of {n} tokens")

    acc = np.zeros(n, dtype=np.float64)
    for layer in layers:
        rows = np.asarray(by_layer[layer].matrix, dtype=np.float64)[idx]
        acc += rows.mean(axis=0)
    vec = acc / len(layers)
    total = vec.sum()
    # float32 archives drift by ~1e-7 per row
    if abs(total - 1.0) > 1e-12:
        vec = vec / total
    return Signature(
        seed_id=first.seed_id,
        vector=vec,
        step_index=first.step_index,
        layer_range=(layers[0], layers[-1]),
        region_kind=tokens.region_kind,
    )
