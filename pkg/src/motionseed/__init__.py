"""Attention-consensus seed selection and object-motion video metrics."""

__version__ = "0.1.0"

from ._backend import NAME as KERNEL_BACKEND
from .attention import (AttentionRecord, RegionKind, Signature, TokenGrid, TokenSet, aggregate_signature,
                        mask_to_tokens, validate_record)
from .compositor import AffineTransform, apply_affine, composite, extract_object, make_target_frame, sample_placements
from .consensus import CosineSimilarity, ace_seed, consensus_scores, cosine_similarity, rank_seeds, select_seed
from .errors import MotionSeedError
from .metrics import (BuiltinEmbedder, MaskedSequence, MetricReport, ca_iou, consistency_consecutive,
                      consistency_first_anchor, evaluate_sequence, objmc)
from .rankeval import (PairwiseJudgment, RankingList, pair_count, random_recall_baseline, ranking_from_scores,
                       recall_at_bottom_k, recall_at_top_k, wins_ranking)
from .sinkhorn import SinkhornSimilarity, TransportProblem, cost_matrix, negative_sinkhorn_sim, sinkhorn_distance
