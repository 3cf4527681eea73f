"""``motionseed`` command line.

Exit codes: 0 success, 1 usage error, 2 data or validation error. Data errors
print a JSON object ``{"error": ..., "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .archive import list_archives, read_archive
from .attention import RegionKind, TokenGrid, aggregate_signature, mask_to_tokens
from .compositor import AffineTransform, apply_affine, composite, extract_object, round_half_away, sample_placements
from .consensus import CosineSimilarity, ace_seed
from .errors import MissingFile, MissingLayer, MotionSeedError, TooFewSeeds
from .harness import (AttentionNoiseSpec, SceneSpec, make_seed_population, random_population_specs,
                      synth_video)
from .imageio import read_image, read_mask, write_image, write_mask
from .metrics import MaskedSequence, evaluate_sequence
from .rankeval import (RecallReport, item_key, random_recall_baseline, ranking_from_scores,
                       read_judgments, recall_at_bottom_k, recall_at_top_k, wins_ranking)
from .sinkhorn import DEFAULT_EPSILON, SinkhornSimilarity

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    t_early: int = 10
    total_steps: int = 50
    layer_start: int = 22
    layer_end: int = 26
    region: str = RegionKind.INVERSE_FOREGROUND.value
    backend: str = "cosine"
    epsilon: float = DEFAULT_EPSILON
    coverage: float = 0.5
    n_seeds: int | None = None

    def __post_init__(self):
        if not 1 <= self.t_early <= self.total_steps:
            raise UsageError(f"t_early must lie in [1, {self.total_steps}]")
        if self.layer_start > self.layer_end:
            raise UsageError("layer range must satisfy m <= n")
        if self.backend not in ("cosine", "sinkhorn"):
            raise UsageError(f"unknown backend {self.backend!r}")
        if not self.epsilon > 0:
            raise UsageError("epsilon must be > 0")
        if not 0 < self.coverage <= 1:
            raise UsageError("coverage must lie in (0, 1]")
        if self.n_seeds is not None and self.n_seeds < 2:
            raise UsageError("need at least 2 seeds")


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, shortest round-trip floats, no NaN."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False, default=_plain) + "\n"


def _emit(payload, out=None):
    text = dumps(payload)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# select-seed

def _load_signatures(archive_dir, mask, cfg: RunConfig):
    index = list_archives(archive_dir)
    entries = [e for e in index
               if e["step_index"] == cfg.t_early and cfg.layer_start <= e["layer_index"] <= cfg.layer_end]
    seeds = sorted({e["seed_id"] for e in index})
    if cfg.n_seeds is not None:
        if len(seeds) < cfg.n_seeds:
            raise TooFewSeeds(f"{len(seeds)} seeds in {archive_dir}, {cfg.n_seeds} requested")
        seeds = seeds[:cfg.n_seeds]
    by_seed = {s: [] for s in seeds}
    for e in entries:
        if e["seed_id"] in by_seed:
            by_seed[e["seed_id"]].append(e["file"])
    for s, files in by_seed.items():
        if not files:
            raise MissingLayer(f"seed {s} has no archives at step {cfg.t_early}")
        for name in files:
            if not (Path(archive_dir) / name).is_file():
                raise MissingFile(f"archive listed in the manifest is missing: {name}", name)

    def one(seed):
        return [read_archive(Path(archive_dir) / f) for f in sorted(by_seed[seed])]

    workers = _backend.thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            loaded = list(pool.map(one, seeds))
    else:
        loaded = [one(s) for s in seeds]

    grid = loaded[0][0].grid
    tokens = mask_to_tokens(mask, grid, cfg.region, cfg.coverage)
    sigs = [aggregate_signature(recs, tokens, (cfg.layer_start, cfg.layer_end)) for recs in loaded]
    return grid, tokens, sigs


def cmd_select_seed(args):
    cfg = RunConfig(args.t_early, args.total_steps, args.layers[0], args.layers[1],
                    RegionKind.parse(args.region).value, args.backend, args.epsilon, args.coverage, args.seeds)
    mask = read_mask(args.mask)
    grid, tokens, sigs = _load_signatures(args.archive_dir, mask, cfg)
    similarity = CosineSimilarity() if cfg.backend == "cosine" else SinkhornSimilarity(grid, cfg.epsilon)
    result = ace_seed(sigs, similarity, threads=_backend.thread_count())
    payload = {
        "scores": {str(k): v for k, v in result.scores.items()},
        "ranking": result.ranking,
        "selected": result.selected,
        "metric": result.metric_name,
        "token_count": len(tokens),
        "config": asdict(cfg),
    }
    return _emit(payload, args.out)


# composite

def _transform_json(tf: AffineTransform):
    return {"dx": tf.dx, "dy": tf.dy, "rotation_deg": tf.rotation_deg, "scale": tf.scale,
            "pivot": None if tf.pivot is None else list(tf.pivot)}


def cmd_composite(args):
    first = read_image(args.first)
    mask = read_mask(args.mask)
    background = read_image(args.background) if args.background else first
    if background.shape[:2] != first.shape[:2]:
        raise ValueError("background and first frame differ in size")
    obj = extract_object(first, mask)
    tf = AffineTransform(args.dx, args.dy, args.rot, args.scale).with_pivot(obj.centroid)
    placed = apply_affine(obj, tf)
    image, full_mask = composite(background, placed)
    out_mask = args.out_mask or str(Path(args.out).with_name(Path(args.out).stem + "_mask.png"))
    write_image(args.out, image)
    write_mask(out_mask, full_mask)
    payload = {
        "image": str(args.out),
        "mask": out_mask,
        "origin": list(placed.origin),
        "mask_pixels": int(np.count_nonzero(full_mask)),
        "transform": _transform_json(tf),
    }
    return _emit(payload, args.json)


# sample-placements

def cmd_sample_placements(args):
    first = read_image(args.first)
    mask = read_mask(args.mask)
    placement = read_mask(args.placement_mask)
    background = read_image(args.background) if args.background else first
    samples = sample_placements(placement, mask, tuple(args.scale_range), tuple(args.rot_range),
                                args.grid_step, args.n, args.seed, image=first)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    obj = extract_object(first, mask)
    rows = []
    for i, s in enumerate(samples):
        row = {"index": i, "valid": s.valid, "rejection_reason": s.rejection_reason,
               "transform": _transform_json(s.transform)}
        if s.valid:
            image, full = composite(background, apply_affine(obj, s.transform))
            row["image"] = f"composite_{i:03d}.png"
            row["mask"] = f"composite_{i:03d}_mask.png"
            write_image(out_dir / row["image"], image)
            write_mask(out_dir / row["mask"], full)
        rows.append(row)
    payload = {
        "requested": args.n,
        "valid_count": sum(s.valid for s in samples),
        "seed": args.seed,
        "grid_step": args.grid_step,
        "scale_range": list(args.scale_range),
        "rotation_range_deg": list(args.rot_range),
        "samples": rows,
    }
    text = dumps(payload)
    (out_dir / "placements.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


# eval-obj

def _pngs(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingFile(f"not a directory: {directory}", str(directory))
    return sorted((p.name for p in directory.glob("*.png")), key=lambda n: item_key(Path(n).stem))


def cmd_eval_obj(args):
    names = _pngs(args.frames_dir)
    if len(names) < 3:
        raise MissingFile(f"{args.frames_dir} holds {len(names)} PNG frames, need at least 3", str(args.frames_dir))
    masks_dir = Path(args.masks_dir)
    frames, masks = [], []
    for name in names:
        if not (masks_dir / name).is_file():
            raise MissingFile(f"no mask for frame {name}", name)
        frames.append(read_image(Path(args.frames_dir) / name)[..., :3])
        masks.append(read_mask(masks_dir / name))
    report = evaluate_sequence(MaskedSequence(frames, masks), read_mask(args.target_mask))
    payload = report.to_json()
    payload["frame_count"] = len(names)
    return _emit(payload, args.out)


# rank-align

def _read_scores(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"scores file not found: {path}", str(path))
    data = json.loads(path.read_text())
    if isinstance(data, dict) and "scores" in data and isinstance(data["scores"], dict):
        return data.get("name", path.stem), data["scores"], bool(data.get("higher_is_better", True))
    if isinstance(data, dict):
        return path.stem, data, True
    raise ValueError(f"{path}: expected a JSON object of item scores")


def cmd_rank_align(args):
    if args.simulate_random is not None:
        top, bottom = random_recall_baseline(args.n, args.k, args.simulate_random, args.seed)
        payload = {"mode": "simulate-random", "n": args.n, "k": args.k, "trials": args.simulate_random,
                   "seed": args.seed, "r_at_top_k": top, "r_at_bottom_k": bottom}
        return _emit(payload, args.out)
    if not args.judgments or not args.scores:
        raise UsageError("rank-align needs --judgments and --scores (or --simulate-random)")
    metrics = [_read_scores(p) for p in args.scores]
    items = sorted(metrics[0][1], key=item_key)
    human = wins_ranking(read_judgments(args.judgments), items)
    per_metric = {}
    tops, bottoms = [], []
    for name, scores, hib in metrics:
        ranking = ranking_from_scores({str(k): float(v) for k, v in scores.items()}, hib)
        t = recall_at_top_k(human, ranking, args.k)
        b = recall_at_bottom_k(human, ranking, args.k)
        if name in per_metric:
            raise ValueError(f"duplicate metric name {name!r}")
        per_metric[name] = {"r_at_top_k": t, "r_at_bottom_k": b}
        tops.append(t)
        bottoms.append(b)
    report = RecallReport(args.k, sum(tops) / len(tops), sum(bottoms) / len(bottoms), per_metric)
    payload = report.to_json()
    payload["human_ranking"] = list(human.items)
    return _emit(payload, args.out)


# synth

def _scene(spec, out_dir):
    scene = SceneSpec.from_json(spec)
    video = synth_video(scene)
    frames_dir, masks_dir = out_dir / "frames", out_dir / "masks"
    frames_dir.mkdir(parents=True, exist_ok=True)
    masks_dir.mkdir(parents=True, exist_ok=True)
    for i, (f, m) in enumerate(zip(video.sequence.frames, video.sequence.masks)):
        write_image(frames_dir / f"{i:03d}.png", f)
        write_mask(masks_dir / f"{i:03d}.png", m)
    return {"frame_count": scene.frame_count, "centers": video.centers.tolist(),
            "clamp_count": video.clamp_count, "frames_dir": "frames", "masks_dir": "masks"}


def _attention(spec, out_dir):
    g = spec["grid"]
    grid = TokenGrid.from_frames(g["frame_count"], g["frame_height"], g["frame_width"],
                                 g.get("patch_t", 1), g.get("patch_h", 1), g.get("patch_w", 1))
    rng_seed = int(spec.get("rng_seed", 0))
    if "inlier" in spec:
        def make(d):
            return AttentionNoiseSpec(tuple(map(tuple, d["trajectory"])), grid, d.get("concentration", 2.0),
                                      d.get("mix_uniform", 0.0), 0, d.get("logit_noise", 0.0))
        inlier = make(spec["inlier"])
        outlier = make(spec["outlier"]) if spec.get("outlier") else None
    else:
        inlier, outlier = random_population_specs(rng_seed, grid, spec.get("min_separation", 0.5))
    layers = spec.get("layers", [22, 26])
    pop = make_seed_population(inlier, outlier, int(spec.get("n_inliers", 9)),
                               spec.get("concentration_jitter", 0.2), rng_seed,
                               range(layers[0], layers[1] + 1), int(spec.get("step", 10)),
                               out_dir / "attention")
    # first-frame object mask at frame resolution, from the inlier trajectory
    first = np.zeros((grid.frame_height, grid.frame_width), dtype=bool)
    cx, cy = inlier.trajectory[0]
    col, row = int(round_half_away(cx)), int(round_half_away(cy))
    first[row * grid.patch_h:(row + 1) * grid.patch_h, col * grid.patch_w:(col + 1) * grid.patch_w] = True
    write_mask(out_dir / "attention_mask.png", first)
    return {"archive_dir": "attention", "outlier_seed": pop.outlier_seed, "inlier_seeds": pop.inlier_seeds,
            "archive_count": len(pop.manifest["archives"]), "first_frame_mask": "attention_mask.png"}


def cmd_synth(args):
    path = Path(args.spec)
    if not path.is_file():
        raise MissingFile(f"spec not found: {path}", str(path))
    spec = json.loads(path.read_text())
    if "scene" not in spec and "attention" not in spec:
        raise ValueError("spec needs a 'scene' and/or an 'attention' section")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {}
    if "scene" in spec:
        payload["scene"] = _scene(spec["scene"], out_dir)
    if "attention" in spec:
        payload["attention"] = _attention(spec["attention"], out_dir)
    text = dumps(payload)
    (out_dir / "synth.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def build_parser():
    p = _Parser(prog="motionseed", description="Attention-consensus seed selection and object-motion metrics.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("select-seed", help="rank noise seeds by attention consensus")
    s.add_argument("archive_dir")
    s.add_argument("--mask", required=True, help="first-frame object mask PNG")
    s.add_argument("--t-early", type=int, default=10)
    s.add_argument("--total-steps", type=int, default=50)
    s.add_argument("--layers", type=int, nargs=2, default=(22, 26), metavar=("M", "N"))
    s.add_argument("--region", default="bg", choices=["fg", "bg", "pl", "Foreground", "InverseForeground",
                                                      "PlacementMask"])
    s.add_argument("--backend", default="cosine", choices=["cosine", "sinkhorn"])
    s.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    s.add_argument("--coverage", type=float, default=0.5)
    s.add_argument("--seeds", type=int, default=None, help="use the N smallest seed ids")
    s.add_argument("--out")
    s.set_defaults(func=cmd_select_seed)

    c = sub.add_parser("composite", help="build the target last frame")
    c.add_argument("--first", required=True)
    c.add_argument("--mask", required=True)
    c.add_argument("--background")
    c.add_argument("--dx", type=float, default=0.0)
    c.add_argument("--dy", type=float, default=0.0)
    c.add_argument("--rot", type=float, default=0.0, help="degrees, counter-clockwise on screen")
    c.add_argument("--scale", type=float, default=1.0)
    c.add_argument("--out", required=True, help="composite PNG")
    c.add_argument("--out-mask", help="object mask PNG (default: <out>_mask.png)")
    c.add_argument("--json", help="write the summary here instead of stdout")
    c.set_defaults(func=cmd_composite)

    sp = sub.add_parser("sample-placements", help="grid-sample object placements")
    sp.add_argument("--first", required=True)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--placement-mask", required=True)
    sp.add_argument("--background")
    sp.add_argument("--scale-range", type=float, nargs=2, default=(0.8, 1.2), metavar=("LO", "HI"))
    sp.add_argument("--rot-range", type=float, nargs=2, default=(-15.0, 15.0), metavar=("LO", "HI"))
    sp.add_argument("--grid-step", type=int, default=8)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_sample_placements)

    e = sub.add_parser("eval-obj", help="object consistency and end-state metrics")
    e.add_argument("--frames-dir", required=True)
    e.add_argument("--masks-dir", required=True)
    e.add_argument("--target-mask", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval_obj)

    r = sub.add_parser("rank-align", help="recall of human rankings among metric rankings")
    r.add_argument("--judgments", help="CSV: item_a,item_b,winner[,annotator]")
    r.add_argument("--scores", nargs="+", help="JSON score files, one per metric")
    r.add_argument("--k", type=int, default=5)
    r.add_argument("--simulate-random", type=int, nargs="?", const=10_000, default=None, metavar="TRIALS")
    r.add_argument("--n", type=int, default=10, help="item count for --simulate-random")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")
    r.set_defaults(func=cmd_rank_align)

    y = sub.add_parser("synth", help="write synthetic videos and attention archives")
    y.add_argument("--spec", required=True)
    y.add_argument("--out-dir", required=True)
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"motionseed: error: {exc}\n")
        return EXIT_USAGE
    except MotionSeedError as exc:
        sys.stderr.write(dumps(exc.to_json()))
        return EXIT_DATA
    except (ValueError, OSError, KeyError, TypeError) as exc:
        sys.stderr.write(dumps({"error": type(exc).__name__, "message": str(exc)}))
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
