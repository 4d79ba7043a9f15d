"""Block coordinate descent solver for joint view and node clustering.

Every data slice Y_k (a symmetric I x I matrix) is approximated by
U diag((A B)_k:) U^T, where A (K x M) carries at most one non-zero per row,
B (M x R) carries at most one non-zero per column, and the columns of U
owned by one view cluster stay orthonormal. The solver alternates an exact
minimization over A with an exact joint minimization over (U, B); both
steps can only lower the squared reconstruction error.

Three constraint flavours exist for each factor: "all_ones" pins non-zeros
to 1, "non_negative" keeps them >= 0, "unconstrained" leaves them free.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .graphs import MultiViewGraph, NormalizedTensor
from .linalg import pool_top_eigenvalues, sym_eig

__all__ = [
    "ConstraintMode",
    "GenClusModel",
    "SolveReport",
    "objective",
    "update_view_weights",
    "update_embeddings",
    "init_model",
    "fit",
]

logger = logging.getLogger(__name__)

CONSTRAINTS = ("all_ones", "unconstrained", "non_negative")

# eigenvalue ranking used by the joint update, per column constraint
_RANKING_FOR = {
    "all_ones": "value",
    "unconstrained": "magnitude",
    "non_negative": "clipped",
}


@dataclass(frozen=True)
class ConstraintMode:
    """Constraint pair: `views` rules the A entries, `columns` the B entries."""

    views: str = "non_negative"
    columns: str = "non_negative"

    def __post_init__(self):
        for name, value in (("views", self.views), ("columns", self.columns)):
            if value not in CONSTRAINTS:
                raise ValueError(
                    f"{name} constraint must be one of {CONSTRAINTS}, got {value!r}"
                )


@dataclass
class GenClusModel:
    """Factors of the shared-embedding model.

    embeddings has one column per currently active component; the active
    width can fall below `rank` when the column constraint filters values
    out. column_owner maps each column to the view cluster it belongs to and
    column_weights holds the diagonal core entry of each column.
    """

    embeddings: np.ndarray
    view_weights: np.ndarray
    column_weights: np.ndarray
    column_owner: np.ndarray
    mode: ConstraintMode
    rank: int

    @property
    def num_view_clusters(self):
        return self.view_weights.shape[1]

    def weight_matrix(self):
        """Dense M x width matrix with column_weights[r] at row column_owner[r]."""
        width = self.column_owner.size
        out = np.zeros((self.num_view_clusters, width))
        if width:
            out[self.column_owner, np.arange(width)] = self.column_weights
        return out

    def view_sets(self):
        """View indices grouped by the cluster their non-zero weight sits in."""
        sets = [[] for _ in range(self.num_view_clusters)]
        for k, row in enumerate(self.view_weights):
            nz = np.flatnonzero(row)
            if nz.size:
                sets[nz[0]].append(k)
        return sets

    def to_dict(self):
        A = self.view_weights
        a_rows, a_cols = np.nonzero(A)
        return {
            "embeddings": self.embeddings.tolist(),
            "view_weights": {
                "shape": list(A.shape),
                "entries": [
                    [int(r), int(c), float(A[r, c])] for r, c in zip(a_rows, a_cols)
                ],
            },
            "column_weights": [
                [int(self.column_owner[r]), int(r), float(self.column_weights[r])]
                for r in range(self.column_owner.size)
            ],
            "mode": {"views": self.mode.views, "columns": self.mode.columns},
            "rank": int(self.rank),
        }

    @classmethod
    def from_dict(cls, payload):
        U = np.asarray(payload["embeddings"], dtype=float)
        shape = tuple(payload["view_weights"]["shape"])
        A = np.zeros(shape)
        for r, c, v in payload["view_weights"]["entries"]:
            A[r, c] = v
        triplets = payload["column_weights"]
        width = len(triplets)
        owner = np.zeros(width, dtype=int)
        weights = np.zeros(width)
        for m, r, v in triplets:
            owner[r] = m
            weights[r] = v
        mode = ConstraintMode(**payload["mode"])
        return cls(
            embeddings=U,
            view_weights=A,
            column_weights=weights,
            column_owner=owner,
            mode=mode,
            rank=int(payload["rank"]),
        )


@dataclass
class SolveReport:
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    phase_seconds: dict = field(default_factory=dict)
    view_sets: list = field(default_factory=list)
    messages: list = field(default_factory=list)

    def to_dict(self):
        return {
            "objective_trace": [float(v) for v in self.objective_trace],
            "iterations": self.iterations,
            "converged": self.converged,
            "phase_seconds": {k: float(v) for k, v in self.phase_seconds.items()},
            "view_sets": self.view_sets,
            "messages": list(self.messages),
        }


def _dense_slices(tensor):
    if isinstance(tensor, NormalizedTensor):
        return tensor.slices
    if isinstance(tensor, MultiViewGraph):
        return tensor.dense_stack()
    arr = np.asarray(tensor, dtype=float)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"expected a (K, I, I) stack, got shape {arr.shape}")
    return arr


def _check_dims(Y, model):
    K, I, _ = Y.shape
    width = model.column_owner.size
    if model.embeddings.shape != (I, width):
        raise ValueError(
            f"embeddings shape {model.embeddings.shape} does not match "
            f"{I} nodes and {width} columns"
        )
    if model.view_weights.shape[0] != K:
        raise ValueError(
            f"view_weights has {model.view_weights.shape[0]} rows for {K} views"
        )
    if model.column_weights.shape != (width,):
        raise ValueError("column_weights length does not match column_owner")
    if width and (model.column_owner.min() < 0 or model.column_owner.max() >= model.num_view_clusters):
        raise ValueError("column_owner refers to a cluster outside [0, M)")


def _slice_inner_products(Y, U):
    """t[k, r] = u_r^T Y_k u_r for every view k and column r."""
    if U.shape[1] == 0:
        return np.zeros((Y.shape[0], 0))
    return np.einsum("kir,ir->kr", Y @ U, U, optimize=True)


def objective(tensor, model):
    """Squared reconstruction error sum_k ||Y_k - U diag((A B)_k:) U^T||^2.

    Evaluated through the trace expansion rather than explicit
    reconstruction; the result is floored at zero against rounding.
    """
    Y = _dense_slices(tensor)
    _check_dims(Y, model)
    U = model.embeddings
    W = (
        model.view_weights[:, model.column_owner] * model.column_weights[None, :]
        if model.column_owner.size
        else np.zeros((Y.shape[0], 0))
    )
    t = _slice_inner_products(Y, U)
    gram = U.T @ U
    gram2 = gram * gram
    value = float(
        np.einsum("kij,kij->", Y, Y)
        - 2.0 * np.einsum("kr,kr->", W, t)
        + np.einsum("kr,rs,ks->", W, gram2, W)
    )
    if not math.isfinite(value):
        raise FloatingPointError("objective is not finite; input data may be corrupted")
    return max(value, 0.0)


def _record(messages, text):
    logger.warning(text)
    if messages is not None:
        messages.append(text)


def update_view_weights(tensor, model, messages=None):
    """Exact per-row minimization over A with U and B held fixed.

    Returns the new K x M view-weight matrix. Every row is treated
    independently: it may place one non-zero at the cluster whose current
    reconstruction explains the view best, or stay all-zero when no cluster
    helps (non_negative) or when every cluster reconstruction is zero.
    """
    Y = _dense_slices(tensor)
    _check_dims(Y, model)
    K = Y.shape[0]
    M = model.num_view_clusters
    t = _slice_inner_products(Y, model.embeddings)
    Bmat = model.weight_matrix()
    scores = t @ Bmat.T  # scores[k, m] = <Y_k, m-th cluster reconstruction>
    sq_norms = (Bmat**2).sum(axis=1)  # squared Frobenius norm of each reconstruction

    A = np.zeros((K, M))
    if not np.any(sq_norms > 0):
        _record(messages, "every cluster reconstruction is zero; view weights zeroed")
        return A

    rows = np.arange(K)
    mode = model.mode.views
    if mode == "all_ones":
        # distance to cluster m differs from ||Y_k||^2 by sq_norms[m] - 2 scores[k, m]
        pick = np.argmin(sq_norms[None, :] - 2.0 * scores, axis=1)
        A[rows, pick] = 1.0
        return A

    root = np.sqrt(sq_norms, where=sq_norms > 0, out=np.zeros_like(sq_norms))
    gain = np.zeros_like(scores)
    base = np.abs(scores) if mode == "unconstrained" else np.maximum(scores, 0.0)
    np.divide(base, root[None, :], out=gain, where=sq_norms[None, :] > 0)
    pick = np.argmax(gain, axis=1)
    chosen_norm = sq_norms[pick]
    chosen_score = scores[rows, pick]
    if mode == "non_negative":
        chosen_score = np.maximum(chosen_score, 0.0)
    values = np.divide(
        chosen_score,
        np.where(chosen_norm > 0, chosen_norm, 1.0),
        out=np.zeros(K),
        where=chosen_norm > 0,
    )
    A[rows, pick] = values
    return A


def update_embeddings(tensor, model, messages=None):
    """Exact joint minimization over (U, B) with A held fixed.

    Builds one aggregate matrix per view cluster, eigendecomposes each, and
    allocates the global column budget across clusters by pooled eigenvalue
    ranking. Returns (embeddings, column_weights, column_owner).

    Clusters holding no views are skipped when the column constraint divides
    by the cluster's weight norm; under the all_ones constraint they stay in
    the pool with an all-zero aggregate so the budget is always filled.
    """
    Y = _dense_slices(tensor)
    _check_dims(Y, model)
    A = model.view_weights
    if not np.any(A != 0):
        _record(messages, "view weights are all zero; embeddings left unchanged")
        return model.embeddings.copy(), model.column_weights.copy(), model.column_owner.copy()

    K, I, _ = Y.shape
    M = model.num_view_clusters
    mode = model.mode.columns
    ranking = _RANKING_FOR[mode]
    col_norms = np.linalg.norm(A, axis=0)
    aggregates = np.tensordot(A.T, Y, axes=1)  # (M, I, I): sum_k A_km Y_k

    if mode == "all_ones":
        clusters = list(range(M))
        eye = np.eye(I)
        stack = [2.0 * aggregates[m] - (col_norms[m] ** 2) * eye for m in clusters]
    else:
        clusters = [m for m in range(M) if col_norms[m] > 0]
        for m in range(M):
            if col_norms[m] == 0:
                _record(messages, f"cluster {m} holds no views; it receives no columns")
        stack = [aggregates[m] / col_norms[m] for m in clusters]

    eigs = [sym_eig(Z) for Z in stack]
    selection = pool_top_eigenvalues([e.values for e in eigs], model.rank, ranking)

    columns = []
    weights = []
    owners = []
    for local_m, m in enumerate(clusters):
        picked = selection.per_cluster_indices[local_m]
        if not picked:
            continue
        vecs = eigs[local_m].vectors[:, picked]
        vals = np.asarray(selection.per_cluster_values[local_m])
        columns.append(vecs)
        owners.append(np.full(len(picked), m, dtype=int))
        if mode == "all_ones":
            weights.append(np.ones(len(picked)))
        else:
            weights.append(vals / col_norms[m])

    if columns:
        U = np.hstack(columns)
        column_weights = np.concatenate(weights)
        column_owner = np.concatenate(owners)
    else:
        U = np.zeros((I, 0))
        column_weights = np.zeros(0)
        column_owner = np.zeros(0, dtype=int)
    return U, column_weights, column_owner


def init_model(tensor, rank, num_view_clusters, mode=None, seed=0):
    """Random feasible starting point: per-cluster orthonormalized Gaussian
    embeddings with columns dealt round-robin, indicator view weights, unit
    column weights."""
    Y = _dense_slices(tensor)
    K, I, _ = Y.shape
    M = int(num_view_clusters)
    R = int(rank)
    if M < 1:
        raise ValueError(f"need at least one view cluster, got {M}")
    if not 1 <= R <= M * I:
        raise ValueError(f"rank must lie in [1, {M * I}], got {R}")
    mode = mode if mode is not None else ConstraintMode()

    rng = np.random.default_rng(seed)
    owner = np.arange(R) % M
    U = np.zeros((I, R))
    for m in range(M):
        cols = np.flatnonzero(owner == m)
        if cols.size:
            gauss = rng.standard_normal((I, cols.size))
            q, _ = np.linalg.qr(gauss)
            U[:, cols] = q
    A = np.zeros((K, M))
    A[np.arange(K), rng.integers(0, M, size=K)] = 1.0
    return GenClusModel(
        embeddings=U,
        view_weights=A,
        column_weights=np.ones(R),
        column_owner=owner,
        mode=mode,
        rank=R,
    )


def fit(
    tensor,
    rank,
    num_view_clusters,
    mode=None,
    init=None,
    tol=1e-6,
    max_iters=1000,
    seed=0,
):
    """Alternate the two exact updates until the objective stalls.

    Convergence is declared when the relative objective change between
    consecutive full iterations drops below `tol`; `tol=inf` therefore stops
    after exactly one iteration. Returns (model, report); the report's
    objective trace holds the initial value followed by one entry per
    half-update and never increases beyond rounding slack.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be at least 1, got {max_iters}")
    mode = mode if mode is not None else ConstraintMode()
    model = init if init is not None else init_model(tensor, rank, num_view_clusters, mode, seed)
    Y = _dense_slices(tensor)

    messages = []
    trace = [objective(Y, model)]
    phase = {"view_weights": 0.0, "embeddings": 0.0}
    converged = False
    iterations = 0
    for _ in range(int(max_iters)):
        start = time.perf_counter()
        model = replace(model, view_weights=update_view_weights(Y, model, messages))
        phase["view_weights"] += time.perf_counter() - start
        trace.append(objective(Y, model))

        start = time.perf_counter()
        U, weights, owner = update_embeddings(Y, model, messages)
        phase["embeddings"] += time.perf_counter() - start
        model = replace(
            model, embeddings=U, column_weights=weights, column_owner=owner
        )
        trace.append(objective(Y, model))

        iterations += 1
        previous, current = trace[-3], trace[-1]
        change = abs(previous - current) / max(abs(previous), np.finfo(float).tiny)
        if change < tol:
            converged = True
            break

    report = SolveReport(
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
        phase_seconds=phase,
        view_sets=model.view_sets(),
        messages=messages,
    )
    return model, report
