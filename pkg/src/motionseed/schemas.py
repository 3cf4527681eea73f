"""JSON Schemas (draft 2020-12) for every command's JSON output."""

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_STR = {"type": "string"}


def _obj(props, extra=False):
    return {"type": "object", "properties": props, "required": sorted(props), "additionalProperties": extra}


TRANSFORM = _obj({
    "dx": _NUM, "dy": _NUM, "rotation_deg": _NUM, "scale": {"type": "number", "exclusiveMinimum": 0},
    "pivot": {"oneOf": [{"type": "null"}, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]},
})

SELECT_SEED = _obj({
    "scores": {"type": "object", "patternProperties": {r"^\d+$": _NUM}, "additionalProperties": False},
    "ranking": {"type": "array", "items": _INT, "minItems": 2},
    "selected": _INT,
    "metric": {"enum": ["cosine", "sinkhorn"]},
    "token_count": {"type": "integer", "minimum": 1},
    "config": _obj({
        "t_early": _INT, "total_steps": _INT, "layer_start": _INT, "layer_end": _INT,
        "region": {"enum": ["Foreground", "InverseForeground", "PlacementMask"]},
        "backend": {"enum": ["cosine", "sinkhorn"]},
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "coverage": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "n_seeds": {"type": ["integer", "null"]},
    }),
})

COMPOSITE = _obj({
    "image": _STR, "mask": _STR,
    "origin": {"type": "array", "items": _INT, "minItems": 2, "maxItems": 2},
    "mask_pixels": {"type": "integer", "minimum": 1},
    "transform": TRANSFORM,
})

_SAMPLE = {
    "type": "object",
    "properties": {
        "index": _INT, "valid": {"type": "boolean"},
        "rejection_reason": {"enum": [None, "degenerate", "out_of_frame", "centroid_outside_placement"]},
        "transform": TRANSFORM, "image": _STR, "mask": _STR,
    },
    "required": ["index", "valid", "rejection_reason", "transform"],
    "additionalProperties": False,
}

SAMPLE_PLACEMENTS = _obj({
    "requested": {"type": "integer", "minimum": 1},
    "valid_count": {"type": "integer", "minimum": 1},
    "seed": _INT, "grid_step": {"type": "integer", "minimum": 1},
    "scale_range": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
    "rotation_range_deg": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
    "samples": {"type": "array", "items": _SAMPLE},
})

EVAL_OBJ = _obj({
    "sim_consecutive": {"type": "number", "minimum": -100, "maximum": 100},
    "sim_first_frame": {"type": "number", "minimum": -100, "maximum": 100},
    "dist_consecutive": {"type": "number", "minimum": 0},
    "dist_first_frame": {"type": "number", "minimum": 0},
    "objmc": {"type": "number", "minimum": 0},
    "ca_iou": {"type": "number", "minimum": 0, "maximum": 1},
    "lost_frame_count": {"type": "integer", "minimum": 0},
    "embedder": _STR,
    "frame_count": {"type": "integer", "minimum": 3},
})

_RECALL = {"type": "number", "minimum": 0, "maximum": 100}

RANK_ALIGN = _obj({
    "k": {"type": "integer", "minimum": 1},
    "r_at_top_k": _RECALL, "r_at_bottom_k": _RECALL,
    "per_metric": {"type": "object",
                   "additionalProperties": _obj({"r_at_top_k": _RECALL, "r_at_bottom_k": _RECALL})},
    "human_ranking": {"type": "array", "items": _STR},
})

RANK_ALIGN_RANDOM = _obj({
    "mode": {"const": "simulate-random"},
    "n": {"type": "integer", "minimum": 2}, "k": {"type": "integer", "minimum": 1},
    "trials": {"type": "integer", "minimum": 1}, "seed": _INT,
    "r_at_top_k": _RECALL, "r_at_bottom_k": _RECALL,
})

SYNTH = {
    "type": "object",
    "properties": {
        "scene": _obj({
            "frame_count": _INT, "clamp_count": {"type": "integer", "minimum": 0},
            "centers": {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
            "frames_dir": _STR, "masks_dir": _STR,
        }),
        "attention": _obj({
            "archive_dir": _STR, "outlier_seed": {"type": ["integer", "null"]},
            "inlier_seeds": {"type": "array", "items": _INT},
            "archive_count": {"type": "integer", "minimum": 1}, "first_frame_mask": _STR,
        }),
    },
    "minProperties": 1,
    "additionalProperties": False,
}

ERROR = {
    "type": "object",
    "properties": {"error": _STR, "message": _STR, "filename": _STR},
    "required": ["error", "message"],
    "additionalProperties": False,
}

SCHEMAS = {
    "select-seed": SELECT_SEED,
    "composite": COMPOSITE,
    "sample-placements": SAMPLE_PLACEMENTS,
    "eval-obj": EVAL_OBJ,
    "rank-align": RANK_ALIGN,
    "rank-align-random": RANK_ALIGN_RANDOM,
    "synth": SYNTH,
    "error": ERROR,
}
