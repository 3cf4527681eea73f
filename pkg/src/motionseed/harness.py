"""Synthetic fixtures: moving-shape videos and attention archives.

Videos show one rectangle or ellipse moving on a straight line, optionally
with Gaussian position jitter. A static colored light gradient tints the
scene, so an object's appearance depends on where it is.

Attention for a seed is modelled as a softmax over key tokens of the negative
distance between each key cell and the object center on that key's latent
slice, blended with the uniform distribution. This is a modelling device for
tests, not a claim about real transformer attention.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .archive import write_archive_dir
from .attention import AttentionRecord, RegionKind, TokenGrid, TokenSet, aggregate_signature
from .compositor import round_half_away
from .errors import TrajectoryLengthMismatch
from .metrics import MaskedSequence


def _rng(*parts):
    # up to four 32-bit parts packed into the 128-bit Philox key
    key = 0
    for i, k in enumerate(parts):
        key |= (int(k) & 0xFFFFFFFF) << (32 * i)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SceneSpec:
    width: int = 64
    height: int = 64
    frame_count: int = 16
    shape: str = "rectangle"  # or "ellipse"
    shape_size: tuple = (12, 8)  # (w, h) in pixels
    color: tuple = (220, 70, 40)
    background: tuple = (40, 40, 40)
    start: tuple = (16.0, 16.0)  # (x, y) center
    end: tuple = (48.0, 40.0)
    jitter_sigma: float = 0.0
    rng_seed: int = 0
    illumination: float = 0.5  # strength of the position-dependent color tint

    def __post_init__(self):
        if self.shape not in ("rectangle", "ellipse"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.frame_count < 1 or self.width < 1 or self.height < 1:
            raise ValueError("frame size and count must be positive")
        if not 0.0 <= self.illumination < 1.0:
            raise ValueError("illumination must lie in [0, 1)")
        for name in ("start", "end"):
            cx, cy = getattr(self, name)
            if not self._fits(cx, cy):
                raise ValueError(f"shape does not fit in the frame at {name} {(cx, cy)}")

    def _limits(self):
        w, h = self.shape_size
        return ((w - 1) / 2, self.width - 1 - (w - 1) / 2), ((h - 1) / 2, self.height - 1 - (h - 1) / 2)

    def _fits(self, cx, cy):
        (xl, xh), (yl, yh) = self._limits()
        return xl <= cx <= xh and yl <= cy <= yh

    @classmethod
    def from_json(cls, data):
        data = dict(data)
        for key in ("shape_size", "color", "background", "start", "end"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def rasterize(spec: SceneSpec, cx, cy):
    """Boolean mask of the shape centred at (cx, cy)."""
    w, h = spec.shape_size
    x0 = int(round_half_away(cx - (w - 1) / 2))
    y0 = int(round_half_away(cy - (h - 1) / 2))
    if spec.shape == "rectangle":
        stamp = np.ones((h, w), dtype=bool)
    else:
        # the ellipse is drawn on the same integer box, so its shape never changes
        ys, xs = np.mgrid[0:h, 0:w]
        stamp = ((xs - (w - 1) / 2) / (w / 2)) ** 2 + ((ys - (h - 1) / 2) / (h / 2)) ** 2 <= 1.0
    mask = np.zeros((spec.height + 2 * h, spec.width + 2 * w), dtype=bool)
    mask[y0 + h:y0 + 2 * h, x0 + w:x0 + 2 * w] = stamp
    return mask[h:h + spec.height, w:w + spec.width]


def _shade(spec: SceneSpec):
    """Per-pixel RGB gains: red fades to the right, green downwards, blue to the left."""
    ys, xs = np.mgrid[0:spec.height, 0:spec.width]
    fx = xs / max(spec.width - 1, 1)
    fy = ys / max(spec.height - 1, 1)
    return 1.0 - spec.illumination * np.stack([fx, fy, 1.0 - fx], axis=-1)


@dataclass(frozen=True)
class SynthVideo:
    sequence: MaskedSequence
    centers: np.ndarray  # (T, 2) commanded (x, y) centers after jitter and clamping
    clamp_count: int


def synth_video(spec: SceneSpec) -> SynthVideo:
    T = spec.frame_count
    s = np.asarray(spec.start, dtype=np.float64)
    e = np.asarray(spec.end, dtype=np.float64)
    frac = np.arange(T) / (T - 1) if T > 1 else np.zeros(1)
    centers = s + (e - s) * frac[:, None]
    # noise is drawn even at sigma 0 so that sigma only rescales one fixed path
    z = _rng(spec.rng_seed).standard_normal((T, 2))
    centers = centers + spec.jitter_sigma * z

    (xl, xh), (yl, yh) = spec._limits()
    clamped = np.column_stack([np.clip(centers[:, 0], xl, xh), np.clip(centers[:, 1], yl, yh)])
    clamp_count = int(np.count_nonzero(np.any(clamped != centers, axis=1)))

    shade = _shade(spec)
    bg = np.clip(np.rint(np.asarray(spec.background, dtype=np.float64) * shade), 0, 255).astype(np.uint8)
    fg = np.clip(np.rint(np.asarray(spec.color, dtype=np.float64) * shade), 0, 255).astype(np.uint8)
    frames, masks = [], []
    for cx, cy in clamped:
        m = rasterize(spec, cx, cy)
        frames.append(np.where(m[..., None], fg, bg))
        masks.append(m)
    return SynthVideo(MaskedSequence(frames, masks), clamped, clamp_count)


@dataclass(frozen=True)
class AttentionNoiseSpec:
    """Attention model for one seed.

    ``trajectory`` gives the object center (x, y) per latent slice in token-cell
    units (column, row).
    """

    trajectory: tuple
    grid: TokenGrid
    concentration: float = 2.0
    mix_uniform: float = 0.0
    rng_seed: int = 0
    logit_noise: float = 0.0  # std of per-layer Gaussian noise on the logits

    def __post_init__(self):
        if not 0.0 <= self.mix_uniform <= 1.0:
            raise ValueError("mix_uniform must lie in [0, 1]")
        if not self.concentration > 0:
            raise ValueError("concentration must be > 0")
        if self.logit_noise < 0:
            raise ValueError("logit_noise must be >= 0")


def attention_row(spec: AttentionNoiseSpec, layer=0) -> np.ndarray:
    grid = spec.grid
    traj = np.asarray(spec.trajectory, dtype=np.float64).reshape(-1, 2)
    if len(traj) != grid.frames_latent:
        raise TrajectoryLengthMismatch(f"{len(traj)} trajectory points for {grid.frames_latent} latent slices")
    coords = grid.coordinates()
    t = coords[:, 0].astype(np.intp)
    dist = np.hypot(coords[:, 2] - traj[t, 0], coords[:, 1] - traj[t, 1])
    logits = -spec.concentration * dist
    if spec.logit_noise > 0:
        logits = logits + spec.logit_noise * _rng(spec.rng_seed, layer).standard_normal(logits.size)
    p = np.exp(logits - logits.max())
    p /= p.sum()
    row = (1.0 - spec.mix_uniform) * p + spec.mix_uniform / p.size
    return row / row.sum()


def synth_attention(spec: AttentionNoiseSpec, layers, step, seed_id) -> list[AttentionRecord]:
    """One record per layer; every query token attends with the same row."""
    n = spec.grid.total_tokens
    out = []
    for layer in layers:
        row = attention_row(spec, layer)
        matrix = np.ascontiguousarray(np.broadcast_to(row, (n, n)))
        out.append(AttentionRecord(int(seed_id), int(step), int(layer), spec.grid, matrix))
    return out


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def all_slice0_tokens(grid: TokenGrid) -> TokenSet:
    return TokenSet(tuple(range(grid.tokens_per_slice)), RegionKind.FOREGROUND)


@dataclass
class Population:
    records: dict  # seed_id -> list[AttentionRecord]
    outlier_seed: int | None
    inlier_seeds: list
    grid: TokenGrid
    step: int
    layers: list
    manifest: dict = field(default_factory=dict)


def make_seed_population(inlier_spec: AttentionNoiseSpec, outlier_spec: AttentionNoiseSpec | None, n_inliers,
                         concentration_jitter=0.2, rng_seed=0, layers=range(22, 27), step=10,
                         out_dir=None) -> Population:
    """N = n_inliers (+1 outlier) seeds whose attention shares ``inlier_spec``.

    Every seed's concentration is scaled by exp(concentration_jitter * N(0, 1)).
    The outlier sits at a random seed position. With ``out_dir`` the archives are written
    in S2MA format together with a manifest naming the outlier.
    """
    if n_inliers < 2:
        raise ValueError("need at least 2 inliers")
    layers = list(layers)
    rng = _rng(rng_seed)
    n = n_inliers + (outlier_spec is not None)
    outlier = int(rng.integers(n)) if outlier_spec is not None else None
    factors = np.exp(concentration_jitter * rng.standard_normal(n))
    records = {}
    for seed in range(n):
        base = outlier_spec if seed == outlier else inlier_spec
        spec = replace(base, concentration=base.concentration * float(factors[seed]),
                       rng_seed=int(rng_seed) * 1000 + seed)
        records[seed] = synth_attention(spec, layers, step, seed)
    inliers = [s for s in range(n) if s != outlier]
    pop = Population(records, outlier, inliers, inlier_spec.grid, step, layers)
    pop.manifest = {"outlier_seed": outlier, "inlier_seeds": inliers, "n_seeds": n, "step_index": step,
                    "layers": layers}
    if out_dir is not None:
        all_records = [r for seed in sorted(records) for r in records[seed]]
        pop.manifest = write_archive_dir(Path(out_dir), all_records, extra=pop.manifest)
    return pop


def random_population_specs(rng_seed, grid: TokenGrid, min_separation=0.5, concentration=2.0,
                            mix_uniform=0.1, logit_noise=0.05):
    """Inlier/outlier specs with random straight trajectories.

    The outlier trajectory is resampled until its signature (all slice-0
    queries, one layer) is at least ``min_separation`` away in total variation
    from the inlier signature.
    """
    rng = _rng(rng_seed, 7)
    T = grid.frames_latent
    hi = np.array([grid.width_tokens - 1, grid.height_tokens - 1], dtype=np.float64)

    def trajectory():
        s = rng.uniform(0, 1, 2) * hi
        e = rng.uniform(0, 1, 2) * hi
        frac = np.arange(T) / (T - 1) if T > 1 else np.zeros(1)
        return tuple(map(tuple, s + (e - s) * frac[:, None]))

    tokens = all_slice0_tokens(grid)

    def signature(spec):
        return aggregate_signature(synth_attention(spec, [0], 0, 0), tokens).vector

    inlier = AttentionNoiseSpec(trajectory(), grid, concentration, mix_uniform, 0, logit_noise)
    h_in = signature(replace(inlier, logit_noise=0.0))
    for _ in range(1000):
        outlier = AttentionNoiseSpec(trajectory(), grid, concentration, mix_uniform, 0, logit_noise)
        if total_variation(h_in, signature(replace(outlier, logit_noise=0.0))) >= min_separation:
            return inlier, outlier
    raise RuntimeError("could not separate the outlier trajectory")
