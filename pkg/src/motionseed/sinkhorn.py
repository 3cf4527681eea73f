"""Entropic optimal transport between distributions on a token grid.

The transport cost is the Euclidean distance between cell coordinates,
normalised by the grid diagonal so the largest possible cost is 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _backend
from .attention import TokenGrid
from .errors import InvalidDistribution, NumericalUnderflow

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.05
DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_ITERATIONS = 2000
SMOOTHING_MASS = 1e-12
SUM_TOLERANCE = 1e-8


def cost_matrix(cells) -> np.ndarray:
    """Pairwise Euclidean cost between cells, divided by the diagonal length.

    ``cells`` is a TokenGrid (coordinates (t, h, w), time weighted like space)
    or an explicit (n,) / (n, d) coordinate array.
    """
    coords = cells.coordinates() if isinstance(cells, TokenGrid) else np.asarray(cells, dtype=np.float64)
    if coords.ndim == 1:
        coords = coords[:, None]
    if coords.shape[0] < 1:
        raise ValueError("cost matrix needs at least one cell")
    diff = coords[:, None, :] - coords[None, :, :]
    C = np.sqrt((diff * diff).sum(axis=-1))
    diagonal = float(np.linalg.norm(coords.max(axis=0) - coords.min(axis=0)))
    if diagonal > 0:
        C /= diagonal
    return C


def _check_distribution(p, name):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InvalidDistribution(f"{name} must be a non-empty vector")
    if not np.isfinite(p).all() or (p < 0).any():
        raise InvalidDistribution(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > SUM_TOLERANCE:
        raise InvalidDistribution(f"{name} sums to {p.sum()!r}, not 1")
    return p


def smooth(p):
    """Give zero-mass cells a tiny uniform mass so log-weights stay finite."""
    if (p > 0).all():
        return p
    p = p + SMOOTHING_MASS
    return p / p.sum()


@dataclass(frozen=True)
class TransportProblem:
    source: np.ndarray
    target: np.ndarray
    coords: object  # TokenGrid or coordinate array
    epsilon: float = DEFAULT_EPSILON
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        src = _check_distribution(self.source, "source")
        tgt = _check_distribution(self.target, "target")
        if src.shape != tgt.shape:
            raise InvalidDistribution(f"source length {src.size} != target length {tgt.size}")
        n = self.coords.total_tokens if isinstance(self.coords, TokenGrid) else len(np.asarray(self.coords))
        if n != src.size:
            raise InvalidDistribution(f"{n} coordinates for {src.size} cells")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iterations < 1 or not self.tolerance > 0:
            raise ValueError("max_iterations must be >= 1 and tolerance > 0")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", tgt)

    @cached_property
    def cost(self):
        return cost_matrix(self.coords)


@dataclass(frozen=True)
class TransportResult:
    distance: float
    iterations_used: int
    converged: bool
    marginal_error: float


def sinkhorn_distance(problem: TransportProblem, method="log", cost=None, kernels=None) -> TransportResult:
    """Transport cost <P, C> of the entropic plan.

    The final iterate is rounded onto the transport polytope before the cost
    is taken, so the reported value is the cost of an exactly feasible plan;
    ``marginal_error`` describes the iterate before rounding.

    ``method="log"`` (default) iterates on dual potentials and never
    underflows. ``method="kernel"`` scales the Gibbs kernel exp(-C/eps)
    directly and raises NumericalUnderflow once that kernel hits zero.
    ``cost`` may pass a precomputed matrix for ``problem.coords``.

    The pair is put in a canonical order first (solving the transposed problem
    when needed), so swapping source and target repeats the identical run.
    """
    C = problem.cost if cost is None else cost
    a = smooth(problem.source)
    b = smooth(problem.target)
    differ = np.flatnonzero(a != b)
    if differ.size and a[differ[0]] > b[differ[0]]:
        a, b, C = b, a, C.T
    eps = float(problem.epsilon)
    if method == "log":
        k = kernels or _backend.kernels
        C = np.ascontiguousarray(C, dtype=np.float64)
        f, g, it, err, ok = k.sinkhorn_log(
            C, np.ascontiguousarray(C.T), a, b, eps, int(problem.max_iterations), float(problem.tolerance),
            _backend.thread_count(),
        )
        if not (np.isfinite(f).all() and np.isfinite(g).all() and np.isfinite(err)):
            raise NumericalUnderflow(f"log-domain iteration produced non-finite values at epsilon={eps}")
        distance = _rounded_cost(k.transport_plan(C, f, g, eps, _backend.thread_count()), a, b, C)
    elif method == "kernel":
        distance, it, err, ok = _sinkhorn_kernel(C, a, b, eps, problem.max_iterations, problem.tolerance)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not ok:
        log.warning("sinkhorn stopped after %d iterations with marginal error %.3g", it, err)
    return TransportResult(float(distance), int(it), bool(ok), float(err))


def _sinkhorn_kernel(C, a, b, eps, max_iter, tol):
    with np.errstate(under="ignore"):
        K = np.exp(-C / eps)
    if (K == 0).any():
        raise NumericalUnderflow(f"Gibbs kernel underflows at epsilon={eps}; raise epsilon or use method='log'")
    u = np.ones_like(a)
    v = np.ones_like(b)
    it = 0
    with np.errstate(over="raise", divide="raise", invalid="raise"):
        try:
            while True:
                Kv = K @ v
                err = float(np.max(np.abs(u * Kv - a)))
                if err <= tol or it >= max_iter:
                    break
                u = a / Kv
                v = b / (K.T @ u)
                it += 1
        except FloatingPointError as exc:
            raise NumericalUnderflow(f"kernel scaling lost precision at epsilon={eps}") from exc
    if not (np.isfinite(u).all() and np.isfinite(v).all()):
        raise NumericalUnderflow(f"kernel scaling diverged at epsilon={eps}")
    distance = _rounded_cost(u[:, None] * K * v[None, :], a, b, C)
    return distance, it, err, err <= tol


def _rounded_cost(P, a, b, C):
    """<P', C> for the feasible plan P' nearest the iterate.

    Rows and columns are scaled down to their targets, then the leftover mass
    is added back as a rank-one term, so P' has the exact marginals (a, b).
    The cost changes by at most the size of the marginal error.
    """
    with np.errstate(divide="ignore"):
        P = P * np.minimum(a / P.sum(axis=1), 1.0)[:, None]
        P = P * np.minimum(b / P.sum(axis=0), 1.0)[None, :]
    err_a = a - P.sum(axis=1)
    err_b = b - P.sum(axis=0)
    missing = err_a.sum()
    if missing > 0:
        P = P + np.outer(err_a, err_b) / missing
    return float((P * C).sum())


def negative_sinkhorn_sim(p, q, grid, epsilon=DEFAULT_EPSILON, **options) -> float:
    """Sinkhorn distance as a similarity (larger is closer)."""
    return -sinkhorn_distance(TransportProblem(p, q, grid, epsilon, **options)).distance


class SinkhornSimilarity:
    """Consensus backend: sim(p, q) = -sinkhorn_distance(p, q)."""

    name = "sinkhorn"
    needs_distributions = True

    def __init__(self, cells, epsilon=DEFAULT_EPSILON, tolerance=DEFAULT_TOLERANCE,
                 max_iterations=DEFAULT_MAX_ITERATIONS, method="log"):
        self.cells = cells
        self.epsilon = epsilon
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.method = method
        self._cost = cost_matrix(cells)

    def __call__(self, p, q):
        problem = TransportProblem(p, q, self.cells, self.epsilon, self.max_iterations, self.tolerance)
        return -sinkhorn_distance(problem, method=self.method, cost=self._cost).distance
