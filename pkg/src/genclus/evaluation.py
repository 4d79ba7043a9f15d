"""Model scoring: view assignment, cluster matching, node clustering, metrics.

The chain implemented here turns a fitted model into label sequences and
compares them with ground truth: views are assigned by the dominant entry of
their weight row, computed view clusters are matched to ground-truth
structures through normalized membership overlap, node embeddings are
post-processed and clustered (k-means or inner-product thresholding), and
agreement is scored with chance-adjusted mutual information. AMI, NMI and
ARI follow the standard conventions (natural logarithms, arithmetic-mean
normalization, exact hypergeometric expected mutual information).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.special import gammaln

__all__ = [
    "UNASSIGNED",
    "MatchResult",
    "EvalOptions",
    "ClusteringResult",
    "assign_views",
    "match_view_clusters",
    "postprocess_embeddings",
    "kmeans",
    "inner_product_threshold_cluster",
    "ami",
    "nmi",
    "ari",
    "evaluate",
]

logger = logging.getLogger(__name__)

UNASSIGNED = -1

SCHEMES = ("raw", "weighted", "sqrt_weighted")
CLUSTERERS = ("kmeans", "threshold")


# ---------------------------------------------------------------------------
# view assignment and matching

def assign_views(view_weights):
    """Assign every view to the cluster with the largest-magnitude weight.

    Ties go to the lowest cluster index; an all-zero row gets the sentinel
    UNASSIGNED (-1).
    """
    A = np.asarray(view_weights, dtype=float)
    if A.ndim != 2:
        raise ValueError("view_weights must be a K x M matrix")
    magnitudes = np.abs(A)
    picks = np.argmax(magnitudes, axis=1)
    top = magnitudes[np.arange(A.shape[0]), picks]
    return np.where(top > 0, picks, UNASSIGNED)


@dataclass
class MatchResult:
    """Computed-to-truth cluster pairing with overlap scores.

    pairing maps each computed cluster id to its best truth cluster; scores
    holds the normalized membership inner products; empty lists computed
    clusters that contained no views (matched to truth 0 with score 0).
    """

    pairing: dict
    scores: dict
    empty: list


def match_view_clusters(computed, truth, num_computed=None):
    """Match each computed view cluster to a ground-truth cluster.

    Membership vectors are binary over views and normalized to unit length;
    each computed cluster independently takes the truth cluster with the
    largest inner product (ties to the lowest truth id). Clusters are
    processed in descending size order (ties by lower id) for determinism;
    several computed clusters may share one truth cluster.
    """
    computed = np.asarray(computed)
    truth = np.asarray(truth)
    if computed.shape != truth.shape or computed.ndim != 1:
        raise ValueError("computed and truth assignments must be equal-length vectors")
    truth_ids = np.unique(truth)
    if num_computed is None:
        valid = computed[computed != UNASSIGNED]
        num_computed = int(valid.max()) + 1 if valid.size else 1

    sizes = {c: int(np.sum(computed == c)) for c in range(num_computed)}
    order = sorted(range(num_computed), key=lambda c: (-sizes[c], c))

    pairing = {}
    scores = {}
    empty = []
    for c in order:
        members = (computed == c).astype(float)
        norm = np.linalg.norm(members)
        if norm == 0:
            pairing[c] = int(truth_ids[0])
            scores[c] = 0.0
            empty.append(c)
            logger.warning("computed view cluster %d is empty; matched by convention", c)
            continue
        best_t, best_score = int(truth_ids[0]), -1.0
        for t in truth_ids:
            t_members = (truth == t).astype(float)
            t_norm = np.linalg.norm(t_members)
            score = float(members @ t_members) / (norm * t_norm)
            if score > best_score:
                best_t, best_score = int(t), score
        pairing[c] = best_t
        scores[c] = best_score
    return MatchResult(pairing=pairing, scores=scores, empty=empty)


# ---------------------------------------------------------------------------
# embedding postprocessing and clustering

def postprocess_embeddings(embeddings, weight_matrix, cluster, scheme, unit_normalize=False):
    """Scale embedding columns by a cluster's weight row, optionally row-normalize.

    scheme "raw" returns the embeddings untouched, "weighted" scales column r
    by weight_matrix[cluster, r], "sqrt_weighted" by the square root of its
    magnitude. Row normalization leaves all-zero rows at zero.
    """
    U = np.asarray(embeddings, dtype=float)
    W = np.asarray(weight_matrix, dtype=float)
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    row = W[cluster]
    if scheme == "raw":
        out = U.copy()
    elif scheme == "weighted":
        out = U * row[None, :]
    else:
        out = U * np.sqrt(np.abs(row))[None, :]
    if unit_normalize:
        norms = np.linalg.norm(out, axis=1)
        positive = norms > 0
        out[positive] /= norms[positive, None]
    return out


def _plus_plus_centers(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    dist2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = dist2.sum()
        if total <= 0:
            idx = int(rng.integers(n))  # all points coincide with a center
        else:
            idx = int(rng.choice(n, p=dist2 / total))
        centers[j] = points[idx]
        dist2 = np.minimum(dist2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(points, centers, max_iters, tol):
    previous = None
    labels = np.zeros(points.shape[0], dtype=int)
    inertia = 0.0
    for _ in range(max_iters):
        dist2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(dist2, axis=1)
        inertia = float(dist2[np.arange(points.shape[0]), labels].sum())
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
            # an empty cluster keeps its previous center
        if previous is not None:
            if abs(previous - inertia) <= tol * max(previous, np.finfo(float).tiny):
                break
        previous = inertia
    return labels, inertia


def kmeans(points, k, restarts=10, max_iters=300, tol=1e-6, seed=0):
    """Cluster rows into k groups: k-means++ seeding plus Lloyd iterations.

    Runs `restarts` independent starts and keeps the labeling with the lowest
    inertia (earlier restart wins ties). Distance ties during assignment go
    to the lowest center index. k is capped at the number of points.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if restarts < 1:
        raise ValueError(f"restarts must be positive, got {restarts}")
    k = min(k, points.shape[0])
    rng = np.random.default_rng(seed)
    best_labels = None
    best_inertia = np.inf
    for _ in range(restarts):
        centers = _plus_plus_centers(points, k, rng)
        labels, inertia = _lloyd(points, centers, max_iters, tol)
        if inertia < best_inertia:
            best_inertia = inertia
            best_labels = labels
    return best_labels


def inner_product_threshold_cluster(points, threshold=0.5):
    """Label rows by connected components of the inner-product graph.

    Two rows are linked when their inner product reaches `threshold`;
    component labels count up in order of each component's first row.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = points.shape[0]
    adjacency = (points @ points.T) >= threshold
    labels = np.full(n, -1, dtype=int)
    current = 0
    for start in range(n):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = current
        while stack:
            node = stack.pop()
            neighbors = np.flatnonzero(adjacency[node])
            for nb in neighbors:
                if labels[nb] < 0:
                    labels[nb] = current
                    stack.append(int(nb))
        current += 1
    return labels


# ---------------------------------------------------------------------------
# agreement metrics

def _check_labelings(labels_a, labels_b):
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape:
        raise ValueError(
            f"labelings must have the same length, got {a.shape[0]} and {b.shape[0]}"
        )
    return a, b


def _contingency(a, b):
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1 if ia.size else 0, ib.max() + 1 if ib.size else 0), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _entropy(labels):
    if labels.shape[0] == 0:
        return 1.0
    counts = np.unique(labels, return_counts=True)[1].astype(np.float64)
    if counts.size == 1:
        return 0.0
    total = counts.sum()
    return float(-np.sum((counts / total) * (np.log(counts) - np.log(total))))


def _mutual_information(table):
    total = table.sum()
    row_sums = table.sum(axis=1)
    col_sums = table.sum(axis=0)
    if row_sums.size == 1 or col_sums.size == 1:
        return 0.0
    rows, cols = np.nonzero(table)
    counts = table[rows, cols].astype(np.float64)
    outer = row_sums.take(rows) * col_sums.take(cols)
    frac = counts / total
    log_outer = -np.log(outer) + np.log(row_sums.sum()) + np.log(col_sums.sum())
    terms = frac * (np.log(counts) - np.log(total)) + frac * log_outer
    terms = np.where(np.abs(terms) < np.finfo(terms.dtype).eps, 0.0, terms)
    return float(np.clip(terms.sum(), 0.0, None))


def _expected_mutual_information(table):
    """Exact expectation of MI under the fixed-marginals permutation model."""
    row_sums = np.ravel(table.sum(axis=1)).astype(np.int64)
    col_sums = np.ravel(table.sum(axis=0)).astype(np.int64)
    total = int(table.sum())
    if row_sums.size == 1 or col_sums.size == 1:
        return 0.0
    max_count = int(max(row_sums.max(), col_sums.max()))
    counts = np.arange(max_count + 1, dtype=np.float64)
    counts[0] = 1.0  # index 0 never used; avoids log(0)
    log_total_counts = np.log(total) + np.log(counts)
    gln_counts = gammaln(counts + 1) + gammaln(total + 1)
    log_rows = np.log(row_sums)
    log_cols = np.log(col_sums)
    gln_rows = gammaln(row_sums + 1)
    gln_cols = gammaln(col_sums + 1)
    gln_rows_c = gammaln(total - row_sums + 1)
    gln_cols_c = gammaln(total - col_sums + 1)

    expected = 0.0
    for i, a in enumerate(row_sums):
        for j, b in enumerate(col_sums):
            start = max(1, a + b - total)
            end = min(a, b) + 1
            if start >= end:
                continue
            nij = np.arange(start, end)
            term2 = log_total_counts[nij] - log_rows[i] - log_cols[j]
            gln = (
                gln_rows[i]
                + gln_cols[j]
                + gln_rows_c[i]
                + gln_cols_c[j]
                - gln_counts[nij]
                - gammaln(a - nij + 1)
                - gammaln(b - nij + 1)
                - gammaln(total - a - b + nij + 1)
            )
            expected += float(((nij / total) * term2 * np.exp(gln)).sum())
    return expected


def ami(labels_a, labels_b):
    """Adjusted mutual information, arithmetic-mean normalized, in (-inf, 1]."""
    a, b = _check_labelings(labels_a, labels_b)
    n_a = np.unique(a).size
    n_b = np.unique(b).size
    if (n_a == n_b == 1) or (n_a == n_b == 0):
        return 1.0
    if n_a == 1 or n_b == 1:
        return 0.0
    table = _contingency(a, b)
    mi = _mutual_information(table)
    emi = _expected_mutual_information(table)
    normalizer = float(np.mean([_entropy(a), _entropy(b)]))
    denominator = normalizer - emi
    if denominator < 0:
        denominator = min(denominator, -np.finfo(np.float64).eps)
    else:
        denominator = max(denominator, np.finfo(np.float64).eps)
    numerator = mi - emi
    if numerator < 0:
        numerator = min(numerator, -np.finfo(np.float64).eps)
    else:
        numerator = max(numerator, np.finfo(np.float64).eps)
    return float(numerator / denominator)


def nmi(labels_a, labels_b):
    """Normalized mutual information with arithmetic-mean normalization."""
    a, b = _check_labelings(labels_a, labels_b)
    n_a = np.unique(a).size
    n_b = np.unique(b).size
    if (n_a == n_b == 1) or (n_a == n_b == 0):
        return 1.0
    mi = _mutual_information(_contingency(a, b))
    if mi == 0:
        return 0.0
    return float(mi / np.mean([_entropy(a), _entropy(b)]))


def _pair_confusion(a, b):
    n = np.int64(a.shape[0])
    table = _contingency(a, b)
    row_sums = np.ravel(table.sum(axis=1))
    col_sums = np.ravel(table.sum(axis=0))
    sum_squares = int((table.astype(np.int64) ** 2).sum())
    same_same = sum_squares - n
    same_diff = int((table @ col_sums).sum()) - sum_squares
    diff_same = int((table.T @ row_sums).sum()) - sum_squares
    diff_diff = int(n) ** 2 - same_diff - diff_same - sum_squares
    return diff_diff, same_diff, diff_same, same_same


def ari(labels_a, labels_b):
    """Adjusted Rand index via the pairwise confusion counts."""
    a, b = _check_labelings(labels_a, labels_b)
    tn, fp, fn, tp = _pair_confusion(a, b)
    if fn == 0 and fp == 0:
        return 1.0
    return 2.0 * (tp * tn - fn * fp) / ((tp + fn) * (fn + tn) + (tp + fp) * (fp + tn))


# ---------------------------------------------------------------------------
# full pipeline

@dataclass
class EvalOptions:
    """Grid of clustering pipelines; single-element tuples pin a pipeline."""

    schemes: tuple = SCHEMES
    unit_normalize: tuple = (False, True)
    clusterers: tuple = CLUSTERERS
    threshold: float = 0.5
    kmeans_restarts: int = 10
    kmeans_max_iters: int = 300
    seed: int = 0


@dataclass
class ClusteringResult:
    view_assignment: np.ndarray = None
    matched_pairing: dict = field(default_factory=dict)
    node_labels: dict = field(default_factory=dict)
    scores: dict = field(default_factory=dict)
    per_cluster_node_scores: dict = field(default_factory=dict)
    pipeline: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "view_assignment": [int(v) for v in self.view_assignment],
            "matched_pairing": {str(k): int(v) for k, v in self.matched_pairing.items()},
            "node_labels": {str(k): [int(x) for x in v] for k, v in self.node_labels.items()},
            "scores": {k: float(v) for k, v in self.scores.items()},
            "per_cluster_node_scores": {
                str(k): float(v) for k, v in self.per_cluster_node_scores.items()
            },
            "pipeline": dict(self.pipeline),
        }


def _cluster_nodes(points, clusterer, k, options, seed):
    """Apply one clusterer; all-zero rows form one extra non-cluster label."""
    zero_rows = np.linalg.norm(points, axis=1) == 0
    if clusterer == "threshold":
        return inner_product_threshold_cluster(points, options.threshold)
    labels = np.full(points.shape[0], k, dtype=int)
    active = ~zero_rows
    if active.any():
        labels[active] = kmeans(
            points[active],
            k,
            restarts=options.kmeans_restarts,
            max_iters=options.kmeans_max_iters,
            seed=seed,
        )
    return labels


def evaluate(model, graph, options=None):
    """Score a fitted model against a graph's ground-truth labels.

    Sweeps the configured postprocess x clustering grid, scores every
    combination, and returns the one with the best mean node agreement
    (ties keep the earliest grid point). The view score is the adjusted
    mutual information between the computed view assignment and the truth;
    the node score averages per-computed-cluster adjusted mutual information
    against the labels of the matched structure.
    """
    options = options if options is not None else EvalOptions()
    if graph.view_labels is None or graph.node_labels_per_structure is None:
        raise ValueError("graph is missing ground-truth labels")
    U = model.embeddings
    A = model.view_weights
    W = model.weight_matrix()
    M = A.shape[1]

    assignment = assign_views(A)
    match = match_view_clusters(assignment, graph.view_labels, num_computed=M)
    view_score = ami(assignment, graph.view_labels)

    best = None
    for si, scheme in enumerate(options.schemes):
        for ui, unit in enumerate(options.unit_normalize):
            processed = {
                c: postprocess_embeddings(U, W, c, scheme, unit) for c in range(M)
            }
            for clusterer in options.clusterers:
                labels = {}
                cluster_scores = {}
                for c in range(M):
                    truth_nodes = graph.node_labels_per_structure[match.pairing[c]]
                    k = np.unique(truth_nodes).size
                    seed = np.random.SeedSequence(
                        (options.seed, si, ui, c)
                    ).generate_state(1)[0]
                    labels[c] = _cluster_nodes(
                        processed[c], clusterer, k, options, int(seed)
                    )
                    cluster_scores[c] = ami(labels[c], truth_nodes)
                node_score = float(np.mean(list(cluster_scores.values()))) if M else 0.0
                candidate = ClusteringResult(
                    view_assignment=assignment,
                    matched_pairing=dict(match.pairing),
                    node_labels=labels,
                    scores={"view_ami": view_score, "node_ami": node_score},
                    per_cluster_node_scores=cluster_scores,
                    pipeline={
                        "scheme": scheme,
                        "unit_normalize": bool(unit),
                        "clusterer": clusterer,
                    },
                )
                if best is None or node_score > best.scores["node_ami"]:
                    best = candidate
    return best
