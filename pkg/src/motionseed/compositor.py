"""Target-frame construction: cut the object out, move it, paste it back.

Images are ``uint8`` arrays of shape (H, W, 3) or (H, W, 4); masks are
boolean (H, W) arrays. Pixel (row y, column x) has its center at (x, y).

Rotation is counter-clockwise as seen on screen (y axis pointing down), the
same sense as ``PIL.Image.rotate``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .errors import DegenerateOutput, EmptyMask, NoValidPlacement, OutOfBounds

ALPHA_THRESHOLD = 0.5


def round_half_away(x):
    """Round to nearest integer, ties away from zero (works on arrays)."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _normalize_degrees(deg):
    d = math.fmod(float(deg), 360.0)
    if d <= -180.0:
        d += 360.0
    elif d > 180.0:
        d -= 360.0
    return d


def _cos_sin(deg):
    # exact values on the axes keep quarter turns lossless
    exact = {0.0: (1.0, 0.0), 90.0: (0.0, 1.0), 180.0: (-1.0, 0.0), -90.0: (0.0, -1.0)}
    if deg in exact:
        return exact[deg]
    r = math.radians(deg)
    return math.cos(r), math.sin(r)


@dataclass(frozen=True)
class AffineTransform:
    """Translation, rotation and uniform scale about ``pivot`` (x, y).

    ``pivot=None`` means "the object's centroid", filled in by the pipeline.
    """

    dx: float = 0.0
    dy: float = 0.0
    rotation_deg: float = 0.0
    scale: float = 1.0
    pivot: tuple | None = None

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("scale must be a positive finite number")
        object.__setattr__(self, "rotation_deg", _normalize_degrees(self.rotation_deg))

    @property
    def is_translation(self):
        return self.rotation_deg == 0.0 and self.scale == 1.0

    def with_pivot(self, pivot):
        return replace(self, pivot=(float(pivot[0]), float(pivot[1])))

    def forward_matrix(self):
        """2x3 matrix mapping source (x, y) to destination (x, y)."""
        if self.pivot is None:
            raise ValueError("transform has no pivot")
        c, s = _cos_sin(self.rotation_deg)
        A = self.scale * np.array([[c, s], [-s, c]])
        p = np.asarray(self.pivot, dtype=np.float64)
        t = p + (self.dx, self.dy) - A @ p
        return np.column_stack([A, t])


@dataclass(frozen=True)
class ExtractedObject:
    rgba: np.ndarray  # (h, w, 4) uint8; color is zeroed where alpha == 0
    origin: tuple  # (x, y) of the crop's top-left pixel in the source image
    centroid: tuple  # (x, y) mean mask pixel coordinate, source image frame

    @property
    def mask(self):
        return self.rgba[..., 3] > 0

    @property
    def bbox(self):
        h, w = self.rgba.shape[:2]
        return (self.origin[0], self.origin[1], w, h)


@dataclass(frozen=True)
class PlacedObject:
    rgba: np.ndarray
    mask: np.ndarray
    origin: tuple  # integer (x, y) top-left in destination image coordinates


@dataclass(frozen=True)
class PlacementSample:
    transform: AffineTransform
    valid: bool
    rejection_reason: str | None = None

    def __post_init__(self):
        if self.valid and self.rejection_reason is not None:
            raise ValueError("a valid sample carries no rejection reason")


def _check_image(image):
    img = np.asarray(image)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] not in (3, 4):
        raise ValueError("image must be uint8 with shape (H, W, 3|4)")
    return img


def _check_mask(mask, shape=None):
    m = np.asarray(mask)
    if m.dtype != bool:
        m = m != 0
    if m.ndim != 2:
        raise ValueError("mask must be 2-D")
    if shape is not None and m.shape != tuple(shape):
        raise ValueError(f"mask shape {m.shape} does not match image {tuple(shape)}")
    return m


def mask_centroid(mask):
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        raise EmptyMask("mask is empty")
    return (float(xs.sum() / xs.size), float(ys.sum() / ys.size))


def extract_object(image, mask) -> ExtractedObject:
    img = _check_image(image)
    m = _check_mask(mask, img.shape[:2])
    ys, xs = np.nonzero(m)
    if xs.size == 0:
        raise EmptyMask("object mask is empty")
    x0, x1, y0, y1 = xs.min(), xs.max() + 1, ys.min(), ys.max() + 1
    sub = m[y0:y1, x0:x1]
    rgba = np.zeros((y1 - y0, x1 - x0, 4), dtype=np.uint8)
    rgba[..., :3] = np.where(sub[..., None], img[y0:y1, x0:x1, :3], 0)
    rgba[..., 3] = np.where(sub, 255, 0)
    return ExtractedObject(rgba, (int(x0), int(y0)), mask_centroid(m))


def _trim(rgba, mask, origin):
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        raise DegenerateOutput("transformed object covers no pixel")
    x0, x1, y0, y1 = xs.min(), xs.max() + 1, ys.min(), ys.max() + 1
    return PlacedObject(
        np.ascontiguousarray(rgba[y0:y1, x0:x1]),
        np.ascontiguousarray(mask[y0:y1, x0:x1]),
        (int(origin[0] + x0), int(origin[1] + y0)),
    )


def apply_affine(obj: ExtractedObject, transform: AffineTransform, kernels=None) -> PlacedObject:
    """Resample the object under ``transform`` by inverse mapping.

    Color is interpolated bilinearly in premultiplied form together with alpha;
    the output mask is alpha >= 0.5. The transformed bounding box is shifted by
    less than a pixel so that its top-left corner lies on a pixel boundary;
    edges of a scaled box then fall between samples rather than on them.
    A pure translation moves the object by (round(dx), round(dy)) without any
    resampling.
    """
    if transform.pivot is None:
        transform = transform.with_pivot(obj.centroid)
    h, w = obj.rgba.shape[:2]
    ox, oy = obj.origin

    if transform.is_translation:
        sx = int(round_half_away(transform.dx))
        sy = int(round_half_away(transform.dy))
        rgba = obj.rgba.copy()
        return PlacedObject(rgba, rgba[..., 3] > 0, (ox + sx, oy + sy))

    M = transform.forward_matrix()
    A, t = M[:, :2], M[:, 2]
    corners = np.array([[ox - 0.5, oy - 0.5], [ox + w - 0.5, oy - 0.5],
                        [ox - 0.5, oy + h - 0.5], [ox + w - 0.5, oy + h - 0.5]])
    edge = (corners @ A.T + t).min(axis=0) + 0.5
    t = t - (edge - round_half_away(edge))
    mapped = corners @ A.T + t
    lo = np.floor(mapped.min(axis=0)).astype(int) - 1
    hi = np.ceil(mapped.max(axis=0)).astype(int) + 1
    out_w, out_h = int(hi[0] - lo[0] + 1), int(hi[1] - lo[1] + 1)
    if out_w <= 0 or out_h <= 0:
        raise DegenerateOutput("transformed bounding box has zero area")

    A_inv = np.linalg.inv(A)
    inv = np.ascontiguousarray(np.column_stack([A_inv, -A_inv @ t]))
    src = obj.rgba.astype(np.float64)
    alpha = src[..., 3:] / 255.0
    premult = np.ascontiguousarray(np.concatenate([src[..., :3] * alpha, alpha], axis=2))
    k = kernels or _backend.kernels
    out = k.warp_bilinear(premult, inv, float(ox), float(oy), int(lo[0]), int(lo[1]), out_h, out_w)

    a = out[..., 3]
    mask = a >= ALPHA_THRESHOLD
    color = np.zeros_like(out[..., :3])
    np.divide(out[..., :3], a[..., None], out=color, where=a[..., None] > 0)
    rgba = np.zeros((out_h, out_w, 4), dtype=np.uint8)
    rgba[..., :3] = np.clip(np.rint(color), 0, 255)
    rgba[..., 3] = np.clip(np.rint(a * 255.0), 0, 255)
    rgba[~mask] = 0
    return _trim(rgba, mask, lo)


def composite(background, obj: PlacedObject, top_left=None):
    """Hard-paste ``obj`` onto ``background``; returns (image, object mask).

    Pixels inside the object mask take the object color, everything else is
    the background, untouched.
    """
    bg = _check_image(background)
    x, y = obj.origin if top_left is None else (int(top_left[0]), int(top_left[1]))
    h, w = obj.mask.shape
    H, W = bg.shape[:2]
    if x < 0 or y < 0 or x + w > W or y + h > H:
        raise OutOfBounds(f"object {w}x{h} at ({x}, {y}) does not fit a {W}x{H} frame")
    out = bg.copy()
    full_mask = np.zeros((H, W), dtype=bool)
    full_mask[y:y + h, x:x + w] = obj.mask
    region = out[y:y + h, x:x + w]
    region[obj.mask, :3] = obj.rgba[obj.mask, :3]
    if out.shape[2] == 4:
        region[obj.mask, 3] = 255
    return out, full_mask


def make_target_frame(first, object_mask, background, transform: AffineTransform):
    """Build the last frame and its object mask from the first frame."""
    first = _check_image(first)
    bg = _check_image(background)
    if bg.shape[:2] != first.shape[:2]:
        raise ValueError("background must have the same size as the first frame")
    obj = extract_object(first, object_mask)
    placed = apply_affine(obj, transform)
    return composite(bg, placed)


def _placement_rng(seed):
    # counter-based generator keyed directly by the seed (no SeedSequence)
    return np.random.Generator(np.random.Philox(key=int(seed)))


def sample_placements(placement_mask, object_mask, scale_range=(0.8, 1.2), rotation_range_deg=(-15.0, 15.0),
                      grid_step=8, count=1, rng_seed=0, image=None):
    """Grid-based placement sampling with random scale and rotation.

    Candidate centers are the grid points (stride ``grid_step``, starting at
    pixel 0) inside the placement mask, visited in a seeded random order. Each
    visited candidate draws a scale and then a rotation uniformly from the
    ranges. The object's centroid is moved onto the candidate; the sample is
    valid when the transformed mask stays inside the frame and its centroid
    lands inside the placement mask.

    Returns up to ``count`` valid samples; if the grid runs out first, the
    rejected samples are appended after the valid ones.
    """
    pm = _check_mask(placement_mask)
    om = _check_mask(object_mask, pm.shape)
    if not pm.any():
        raise EmptyMask("placement mask is empty")
    if scale_range[0] > scale_range[1] or rotation_range_deg[0] > rotation_range_deg[1]:
        raise ValueError("ranges must satisfy lo <= hi")
    if scale_range[0] <= 0:
        raise ValueError("scale range must be positive")
    if grid_step < 1 or count < 1:
        raise ValueError("grid_step and count must be >= 1")

    H, W = pm.shape
    if image is None:
        image = np.zeros((H, W, 3), dtype=np.uint8)
    obj = extract_object(image, om)
    cx, cy = obj.centroid

    gy, gx = np.mgrid[0:H:grid_step, 0:W:grid_step]
    inside = pm[gy, gx]
    candidates = np.stack([gx[inside], gy[inside]], axis=1)
    rng = _placement_rng(rng_seed)
    order = rng.permutation(len(candidates))

    valid, rejected = [], []
    for ci in order:
        tx, ty = candidates[ci]
        u = rng.random(2)
        scale = scale_range[0] + (scale_range[1] - scale_range[0]) * u[0]
        rot = rotation_range_deg[0] + (rotation_range_deg[1] - rotation_range_deg[0]) * u[1]
        tf = AffineTransform(float(tx - cx), float(ty - cy), float(rot), float(scale), (cx, cy))
        reason = _placement_problem(obj, tf, pm)
        if reason is None:
            valid.append(PlacementSample(tf, True))
            if len(valid) == count:
                return valid
        else:
            rejected.append(PlacementSample(tf, False, reason))
    if not valid:
        raise NoValidPlacement(f"none of {len(candidates)} grid candidates admits the object", rejected)
    return valid + rejected


def _placement_problem(obj, tf, placement_mask):
    H, W = placement_mask.shape
    try:
        placed = apply_affine(obj, tf)
    except DegenerateOutput:
        return "degenerate"
    x, y = placed.origin
    h, w = placed.mask.shape
    if x < 0 or y < 0 or x + w > W or y + h > H:
        return "out_of_frame"
    full = np.zeros((H, W), dtype=bool)
    full[y:y + h, x:x + w] = placed.mask
    mx, my = mask_centroid(full)
    px, py = int(round_half_away(mx)), int(round_half_away(my))
    if not placement_mask[py, px]:
        return "centroid_outside_placement"
    return None
