"""Object-centric video metrics.

Consistency scores compare embeddings of 224x224 object crops, either between
consecutive frames or against the first frame. End-state scores compare the
penultimate object mask with the target mask: centroid distance (ObjMC) and
IoU after centroid alignment (CA-IoU).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from PIL import Image

from . import _backend
from .compositor import mask_centroid, round_half_away
from .consensus import cosine_similarity
from .errors import AllFramesLost, EmptyMask, FirstFrameLost, PenultimateLost

CROP_SIZE = 224
GRID_CELLS = 4
ORIENTATION_BINS = 8


@dataclass(frozen=True)
class MaskedSequence:
    frames: Sequence[np.ndarray]
    masks: Sequence[np.ndarray]

    def __post_init__(self):
        if len(self.frames) != len(self.masks):
            raise ValueError("frames and masks differ in length")
        if len(self.frames) < 2:
            raise ValueError("a sequence needs at least 2 frames")
        for i, (f, m) in enumerate(zip(self.frames, self.masks)):
            if np.asarray(f).shape[:2] != np.asarray(m).shape:
                raise ValueError(f"frame {i}: image and mask sizes differ")

    def __len__(self):
        return len(self.frames)


@dataclass(frozen=True)
class ObjectCrop:
    pixels: np.ndarray  # (224, 224, 3) uint8, zero outside the object
    mask: np.ndarray  # (224, 224) bool
    frame_index: int = 0
    empty: bool = False


def crop_object(frame, mask, frame_index=0) -> ObjectCrop:
    """Background-zeroed, letterboxed 224x224 crop of the masked object."""
    img = np.asarray(frame)[..., :3]
    m = np.asarray(mask).astype(bool)
    canvas = np.zeros((CROP_SIZE, CROP_SIZE, 3), dtype=np.uint8)
    cmask = np.zeros((CROP_SIZE, CROP_SIZE), dtype=bool)
    ys, xs = np.nonzero(m)
    if xs.size == 0:
        return ObjectCrop(canvas, cmask, frame_index, True)
    y0, y1, x0, x1 = ys.min(), ys.max() + 1, xs.min(), xs.max() + 1
    sub_m = m[y0:y1, x0:x1]
    sub = np.where(sub_m[..., None], img[y0:y1, x0:x1], 0).astype(np.uint8)
    h, w = sub_m.shape
    longer = max(h, w)
    new_w = max(1, int(round_half_away(w * CROP_SIZE / longer)))
    new_h = max(1, int(round_half_away(h * CROP_SIZE / longer)))
    resized = np.asarray(Image.fromarray(sub).resize((new_w, new_h), Image.BILINEAR))
    rmask = np.asarray(
        Image.fromarray(np.where(sub_m, 255, 0).astype(np.uint8)).resize((new_w, new_h), Image.BILINEAR)
    ) >= 128
    ox, oy = (CROP_SIZE - new_w) // 2, (CROP_SIZE - new_h) // 2
    canvas[oy:oy + new_h, ox:ox + new_w] = np.where(rmask[..., None], resized, 0)
    cmask[oy:oy + new_h, ox:ox + new_w] = rmask
    return ObjectCrop(canvas, cmask, frame_index, False)


def cell_features(crop: ObjectCrop) -> np.ndarray:
    """Unnormalised (4, 4, 11) features: mean RGB + 8 orientation bins per cell.

    Orientation bins hold gradient magnitude (luminance, central differences)
    summed per bin and divided by the cell's pixel count.
    """
    rgb = crop.pixels.astype(np.float64) / 255.0
    lum = rgb @ np.array([0.299, 0.587, 0.114])
    gy, gx = np.gradient(lum)
    mag = np.hypot(gx, gy)
    ang = np.arctan2(gy, gx)
    bins = np.floor((ang + np.pi) / (2 * np.pi) * ORIENTATION_BINS).astype(np.intp) % ORIENTATION_BINS

    size = crop.pixels.shape[0]
    step = size // GRID_CELLS
    cell_r = np.minimum(np.arange(size) // step, GRID_CELLS - 1)
    cell_id = cell_r[:, None] * GRID_CELLS + cell_r[None, :]
    counts = np.bincount(cell_id.ravel(), minlength=GRID_CELLS**2).astype(np.float64)

    color = np.stack(
        [np.bincount(cell_id.ravel(), weights=rgb[..., c].ravel(), minlength=GRID_CELLS**2) for c in range(3)],
        axis=1,
    ) / counts[:, None]
    hist = np.bincount(
        (cell_id * ORIENTATION_BINS + bins).ravel(), weights=mag.ravel(), minlength=GRID_CELLS**2 * ORIENTATION_BINS
    ).reshape(GRID_CELLS**2, ORIENTATION_BINS) / counts[:, None]
    return np.concatenate([color, hist], axis=1).reshape(GRID_CELLS, GRID_CELLS, 3 + ORIENTATION_BINS)


class BuiltinEmbedder:
    """Deterministic 176-d descriptor standing in for a learned image embedder.

    Similarity is cosine x 100; distance is the Euclidean distance between the
    unit-length embeddings.
    """

    name = "builtin-grid-color-orientation"
    dim = GRID_CELLS * GRID_CELLS * (3 + ORIENTATION_BINS)

    def embed(self, crop: ObjectCrop) -> np.ndarray:
        if crop.empty:
            return np.zeros(self.dim)
        v = cell_features(crop).ravel()
        norm = math.sqrt(float(np.dot(v, v)))
        return v / norm if norm > 0 else v

    def similarity(self, u, v) -> float:
        zu, zv = not np.any(u), not np.any(v)
        if zu or zv:
            return 100.0 if zu and zv else 0.0
        return 100.0 * cosine_similarity(u, v)

    def distance(self, u, v) -> float:
        d = np.asarray(u, dtype=np.float64) - np.asarray(v, dtype=np.float64)
        return math.sqrt(float(np.dot(d, d)))


def builtin_embedder(crop: ObjectCrop) -> np.ndarray:
    return BuiltinEmbedder().embed(crop)


def _embeddings(seq: MaskedSequence, embedder):
    def one(i):
        crop = crop_object(seq.frames[i], seq.masks[i], i)
        return None if crop.empty else embedder.embed(crop)

    workers = _backend.thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(len(seq))))
    return [one(i) for i in range(len(seq))]


def _pair_score(embedder, mode, u, v):
    if mode == "similarity":
        return embedder.similarity(u, v)
    if mode == "distance":
        return embedder.distance(u, v)
    raise ValueError(f"mode must be 'similarity' or 'distance', not {mode!r}")


def _consecutive(embs, embedder, mode):
    scores = [
        _pair_score(embedder, mode, a, b) for a, b in zip(embs, embs[1:]) if a is not None and b is not None
    ]
    if not scores:
        raise AllFramesLost("no consecutive pair of frames has a visible object")
    return math.fsum(scores) / len(scores)


def _first_anchor(embs, embedder, mode):
    if embs[0] is None:
        raise FirstFrameLost("the object is missing from frame 0")
    scores = [_pair_score(embedder, mode, embs[0], e) for e in embs[1:] if e is not None]
    if not scores:
        raise AllFramesLost("the object is missing from every frame after frame 0")
    return math.fsum(scores) / len(scores)


def consistency_consecutive(seq: MaskedSequence, embedder=None, mode="similarity") -> float:
    """Mean score over consecutive frame pairs; pairs with a lost object are skipped."""
    embedder = embedder or BuiltinEmbedder()
    return _consecutive(_embeddings(seq, embedder), embedder, mode)


def consistency_first_anchor(seq: MaskedSequence, embedder=None, mode="similarity") -> float:
    """Mean score of frame 0 against every later frame with a visible object."""
    embedder = embedder or BuiltinEmbedder()
    return _first_anchor(_embeddings(seq, embedder), embedder, mode)


def objmc(pred_mask, target_mask) -> float:
    """Euclidean distance in pixels between the two mask centroids."""
    try:
        px, py = mask_centroid(np.asarray(pred_mask).astype(bool))
        tx, ty = mask_centroid(np.asarray(target_mask).astype(bool))
    except EmptyMask as exc:
        raise EmptyMask("objmc needs two non-empty masks") from exc
    return math.hypot(tx - px, ty - py)


def shift_mask(mask, dx, dy):
    """Integer translation on the same canvas; pixels leaving it are dropped."""
    m = np.asarray(mask).astype(bool)
    out = np.zeros_like(m)
    H, W = m.shape
    dx, dy = int(dx), int(dy)
    if abs(dx) >= W or abs(dy) >= H:
        return out
    out[max(dy, 0):H + min(dy, 0), max(dx, 0):W + min(dx, 0)] = m[max(-dy, 0):H - max(dy, 0),
                                                                  max(-dx, 0):W - max(dx, 0)]
    return out


def ca_iou(pred_mask, target_mask) -> float:
    """IoU after moving ``pred`` onto the target centroid.

    The offset is rounded per axis, ties away from zero.
    """
    pred = np.asarray(pred_mask).astype(bool)
    target = np.asarray(target_mask).astype(bool)
    if pred.shape != target.shape:
        raise ValueError("ca_iou needs masks on the same canvas")
    try:
        px, py = mask_centroid(pred)
        tx, ty = mask_centroid(target)
    except EmptyMask as exc:
        raise EmptyMask("ca_iou needs two non-empty masks") from exc
    moved = shift_mask(pred, round_half_away(tx - px), round_half_away(ty - py))
    inter = np.count_nonzero(moved & target)
    union = np.count_nonzero(moved | target)
    return inter / union


def end_state_report(seq: MaskedSequence, target_mask):
    """(ObjMC, CA-IoU) of the penultimate frame against the target mask.

    The last frame is skipped because frame-conditioned generators tend to
    copy the given end frame verbatim.
    """
    if len(seq) < 3:
        raise ValueError("end-state metrics need at least 3 frames")
    pen = np.asarray(seq.masks[-2]).astype(bool)
    if not pen.any():
        raise PenultimateLost(f"object mask of frame {len(seq) - 2} is empty")
    return objmc(pen, target_mask), ca_iou(pen, target_mask)


@dataclass(frozen=True)
class MetricReport:
    sim_consecutive: float
    sim_first_frame: float
    dist_consecutive: float
    dist_first_frame: float
    objmc: float
    ca_iou: float
    lost_frame_count: int
    embedder: str = BuiltinEmbedder.name

    def to_json(self):
        return asdict(self)


def evaluate_sequence(seq: MaskedSequence, target_mask, embedder=None) -> MetricReport:
    embedder = embedder or BuiltinEmbedder()
    embs = _embeddings(seq, embedder)
    lost = sum(e is None for e in embs)
    om, iou = end_state_report(seq, target_mask)
    return MetricReport(
        sim_consecutive=_consecutive(embs, embedder, "similarity"),
        sim_first_frame=_first_anchor(embs, embedder, "similarity"),
        dist_consecutive=_consecutive(embs, embedder, "distance"),
        dist_first_frame=_first_anchor(embs, embedder, "distance"),
        objmc=om,
        ca_iou=iou,
        lost_frame_count=lost,
        embedder=embedder.name,
    )
