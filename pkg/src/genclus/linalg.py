"""Dense symmetric eigendecomposition helpers and eigenvalue pooling.

These kernels back the solver: a deterministic full eigendecomposition, the
best positive-semidefinite approximation of bounded rank, and the selection
of a global top-R eigenvalue budget across several per-cluster spectra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EigenPairs",
    "SelectionResult",
    "sym_eig",
    "best_psd_approx",
    "pool_top_eigenvalues",
]

RANKINGS = ("value", "magnitude", "clipped")


@dataclass
class EigenPairs:
    """Full spectrum of a symmetric matrix, values descending.

    vectors[:, j] is the unit eigenvector paired with values[j]; the set of
    columns is orthonormal.
    """

    values: np.ndarray
    vectors: np.ndarray


@dataclass
class SelectionResult:
    """Outcome of pooling eigenvalues across clusters under a fixed budget.

    per_cluster_indices[m] lists the chosen positions into cluster m's value
    sequence (ascending); per_cluster_values[m] holds the matching raw
    values. order records the global pick sequence as (cluster, position)
    pairs, best first.
    """

    per_cluster_indices: list
    per_cluster_values: list
    order: list

    @property
    def total(self):
        return len(self.order)


def sym_eig(matrix):
    """Eigendecompose a symmetric matrix deterministically.

    The input must be symmetric within 1e-10 times its Frobenius norm; it is
    symmetrized as (Z + Z^T)/2 before factorization. Values are returned in
    descending order and each eigenvector is flipped so that its
    largest-magnitude entry (lowest index on ties) is positive.
    """
    Z = np.asarray(matrix, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise ValueError("matrix contains NaN or Inf")
    norm = np.linalg.norm(Z)
    asym = np.abs(Z - Z.T).max() if Z.size else 0.0
    if asym > 1e-10 * norm:
        raise ValueError(
            f"matrix is not symmetric: max asymmetry {asym:.3e} exceeds 1e-10 * norm"
        )
    sym = (Z + Z.T) / 2.0
    values, vectors = np.linalg.eigh(sym)
    values = values[::-1].copy()
    vectors = vectors[:, ::-1].copy()
    anchor = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[anchor, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    vectors *= signs
    return EigenPairs(values=values, vectors=vectors)


def best_psd_approx(matrix, rank):
    """Best PSD approximation of a symmetric matrix with rank at most `rank`.

    Keeps the top-`rank` eigenpairs with eigenvalues clipped at zero, which
    minimizes the Frobenius error over all PSD matrices of rank <= rank.
    Returns the approximation together with the eigenpairs it was built from
    (values unclipped).
    """
    Z = np.asarray(matrix, dtype=float)
    n = Z.shape[0] if Z.ndim == 2 else 0
    if not 1 <= rank <= n:
        raise ValueError(f"rank must lie in [1, {n}], got {rank}")
    eig = sym_eig(Z)
    values = eig.values[:rank].copy()
    vectors = eig.vectors[:, :rank].copy()
    clipped = np.maximum(values, 0.0)
    approx = (vectors * clipped) @ vectors.T
    return approx, EigenPairs(values=values, vectors=vectors)


def _ranking_key(value, ranking):
    if ranking == "value":
        return value
    if ranking == "magnitude":
        return abs(value)
    return value  # clipped: admission already filtered to positives


def pool_top_eigenvalues(per_cluster_values, count, ranking):
    """Choose a global budget of `count` eigenvalues across cluster spectra.

    ranking decides both the ordering and which candidates are admissible:
    "value" and "magnitude" admit everything, "clipped" admits only strictly
    positive values (so fewer than `count` picks may be returned). Ties are
    broken by lower cluster index, then lower position within the cluster's
    sequence, making repeated calls on identical input byte-stable.
    """
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    if ranking not in RANKINGS:
        raise ValueError(f"ranking must be one of {RANKINGS}, got {ranking!r}")
    candidates = []
    for m, values in enumerate(per_cluster_values):
        for pos, value in enumerate(np.asarray(values, dtype=float)):
            value = float(value)
            if ranking == "clipped" and value <= 0.0:
                continue
            candidates.append((-_ranking_key(value, ranking), m, pos, value))
    candidates.sort()
    picked = candidates[: min(count, len(candidates))]

    num_clusters = len(per_cluster_values)
    indices = [[] for _ in range(num_clusters)]
    values = [[] for _ in range(num_clusters)]
    order = [(m, pos) for _, m, pos, _ in picked]
    for m, pos, value in sorted((m, pos, v) for _, m, pos, v in picked):
        indices[m].append(pos)
        values[m].append(value)
    return SelectionResult(per_cluster_indices=indices, per_cluster_values=values, order=order)
