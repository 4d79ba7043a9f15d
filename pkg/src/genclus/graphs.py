"""Multi-view graph container and spectral preprocessing.

A multi-view graph is a stack of K adjacency matrices over one shared set of
I nodes. Before solving, each view is rescaled so that its spectrum lands in
[-1, 1]; two constructions are provided, one for symmetric input and one for
directed input based on a teleporting random walk.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "MultiViewGraph",
    "NormalizedTensor",
    "symmetric_normalize",
    "directed_normalize",
    "load_coo_tensor",
    "save_coo_tensor",
    "DEFAULT_TELEPORT",
]

DEFAULT_TELEPORT = 0.01
_STATIONARY_TOL = 1e-10
_STATIONARY_MAX_STEPS = 10_000


def _as_coo(matrix):
    if sp.issparse(matrix):
        out = matrix.tocoo()
    else:
        out = sp.coo_array(np.asarray(matrix, dtype=float))
    out = out.tocsr().tocoo()  # merge duplicate entries, canonical order
    return out


@dataclass
class MultiViewGraph:
    """K non-negative adjacency matrices over a shared node set.

    Parameters
    ----------
    slices : sequence of I x I matrices (dense or scipy sparse)
        One adjacency matrix per view; stored internally in COO form.
    symmetric : bool
        Declares every slice symmetric; verified at construction.
    view_labels : array of length K, optional
        Ground-truth structure id of each view.
    node_labels_per_structure : dict, optional
        Maps structure id to a length-I node labeling.
    """

    slices: list = field(default_factory=list)
    symmetric: bool = True
    view_labels: np.ndarray | None = None
    node_labels_per_structure: dict | None = None

    def __post_init__(self):
        if len(self.slices) == 0:
            raise ValueError("a multi-view graph needs at least one view")
        self.slices = [_as_coo(s) for s in self.slices]
        shape = self.slices[0].shape
        if shape[0] != shape[1]:
            raise ValueError(f"slices must be square, got {shape}")
        for k, s in enumerate(self.slices):
            if s.shape != shape:
                raise ValueError(
                    f"slice {k} has shape {s.shape}, expected {shape}"
                )
            if s.data.size and not np.all(np.isfinite(s.data)):
                raise ValueError(f"slice {k} contains NaN or Inf weights")
            if s.data.size and s.data.min() < 0:
                raise ValueError(f"slice {k} contains negative weights")
            if self.symmetric:
                _require_symmetric(s, k)
        if self.view_labels is not None:
            self.view_labels = np.asarray(self.view_labels)
            if self.view_labels.shape != (len(self.slices),):
                raise ValueError("view_labels must have one entry per view")
        if self.node_labels_per_structure is not None:
            checked = {}
            for key, labels in self.node_labels_per_structure.items():
                labels = np.asarray(labels)
                if labels.shape != (shape[0],):
                    raise ValueError(
                        f"node labels for structure {key} must have length {shape[0]}"
                    )
                checked[key] = labels
            self.node_labels_per_structure = checked

    @property
    def num_nodes(self):
        return self.slices[0].shape[0]

    @property
    def num_views(self):
        return len(self.slices)

    def dense_stack(self):
        """Return the views as one dense (K, I, I) float array."""
        return np.stack([s.toarray() for s in self.slices]).astype(float)


def _require_symmetric(coo, index):
    diff = (coo.tocsr() - coo.tocsr().T).tocoo()
    if diff.data.size and np.abs(diff.data).max() > 0:
        raise ValueError(f"slice {index} is not symmetric")


@dataclass
class NormalizedTensor:
    """Stack of rescaled symmetric view matrices ready for the solver.

    slices is a dense (K, I, I) array; every slice is symmetric and, for the
    two normalization kinds, has eigenvalues in [-1, 1]. Rows and columns of
    degree-zero nodes are all-zero under the symmetric construction.
    """

    slices: np.ndarray
    kind: str = "symmetric"

    def __post_init__(self):
        self.slices = np.asarray(self.slices, dtype=float)
        if self.slices.ndim != 3 or self.slices.shape[1] != self.slices.shape[2]:
            raise ValueError("slices must be a (K, I, I) array")
        if not np.all(np.isfinite(self.slices)):
            raise ValueError("slices contain NaN or Inf")
        asym = np.abs(self.slices - self.slices.transpose(0, 2, 1)).max() if self.slices.size else 0.0
        if asym > 1e-12:
            raise ValueError(f"slices are not symmetric (max asymmetry {asym:.3e})")

    @property
    def num_nodes(self):
        return self.slices.shape[1]

    @property
    def num_views(self):
        return self.slices.shape[0]


def symmetric_normalize(graph):
    """Rescale each symmetric view by the inverse square roots of its degrees.

    Output slice k is D X_k D with D = diag(1/sqrt(column sums of X_k)).
    Degree-zero nodes get a zero scale, so their rows and columns vanish
    instead of producing NaN.
    """
    out = np.empty((graph.num_views, graph.num_nodes, graph.num_nodes))
    for k, s in enumerate(graph.slices):
        _require_symmetric(s, k)
        if s.data.size and s.data.min() < 0:
            raise ValueError(f"slice {k} contains negative weights")
        dense = s.toarray().astype(float)
        degrees = dense.sum(axis=0)
        scale = np.zeros_like(degrees)
        positive = degrees > 0
        scale[positive] = 1.0 / np.sqrt(degrees[positive])
        y = scale[:, None] * dense * scale[None, :]
        out[k] = (y + y.T) / 2.0
    return NormalizedTensor(out, kind="symmetric")


def _stationary_distribution(transition, view_index):
    n = transition.shape[0]
    x = np.full(n, 1.0 / n)
    for _ in range(_STATIONARY_MAX_STEPS):
        nxt = transition.T @ x
        nxt /= nxt.sum()
        if np.abs(nxt - x).sum() <= _STATIONARY_TOL:
            return nxt
        x = nxt
    raise ValueError(
        f"view {view_index}: stationary distribution power iteration "
        f"did not converge within {_STATIONARY_MAX_STEPS} steps"
    )


def directed_normalize(graph, teleport=DEFAULT_TELEPORT):
    """Symmetrize directed views through a teleporting random walk.

    Each view becomes (Phi + Phi^T)/2 where Phi = diag(sqrt(pi)) P
    diag(1/sqrt(pi)), P is the teleport-smoothed row-stochastic transition
    matrix of the view and pi its stationary distribution. Rows with no
    outgoing edges jump uniformly. The output is exactly symmetric with
    spectrum inside [-1, 1].
    """
    if not 0.0 < teleport < 1.0:
        raise ValueError(f"teleport must lie strictly between 0 and 1, got {teleport}")
    n = graph.num_nodes
    out = np.empty((graph.num_views, n, n))
    for k, s in enumerate(graph.slices):
        dense = s.toarray().astype(float)
        row_sums = dense.sum(axis=1)
        transition = np.full((n, n), 1.0 / n)
        has_out = row_sums > 0
        transition[has_out] = dense[has_out] / row_sums[has_out, None]
        transition = (1.0 - teleport) * transition + teleport / n
        pi = _stationary_distribution(transition, k)
        root = np.sqrt(pi)
        phi = (root[:, None] * transition) / root[None, :]
        out[k] = (phi + phi.T) / 2.0
    return NormalizedTensor(out, kind="directed-teleport")


def save_coo_tensor(graph, path):
    """Write a graph as text: header `I K sym|dir`, then `i j k w` lines.

    Paths ending in .gz are gzip-compressed.
    """
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    flag = "sym" if graph.symmetric else "dir"
    with opener(path, "wt") as fh:
        fh.write(f"{graph.num_nodes} {graph.num_views} {flag}\n")
        for k, s in enumerate(graph.slices):
            order = np.lexsort((s.col, s.row))
            for idx in order:
                fh.write(f"{s.row[idx]} {s.col[idx]} {k} {float(s.data[idx])!r}\n")


def load_coo_tensor(path):
    """Read a graph written by save_coo_tensor; inverse on the entry multiset."""
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rt") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 3:
            raise ValueError("line 1: header must be `I K sym|dir`")
        try:
            num_nodes, num_views = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"line 1: bad header counts: {exc}") from None
        if num_nodes < 1 or num_views < 1:
            raise ValueError("line 1: node and view counts must be positive")
        if parts[2] not in ("sym", "dir"):
            raise ValueError(f"line 1: unknown symmetry flag {parts[2]!r}")
        symmetric = parts[2] == "sym"

        rows = [[] for _ in range(num_views)]
        cols = [[] for _ in range(num_views)]
        vals = [[] for _ in range(num_views)]
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: expected `i j k w`, got {line!r}")
            try:
                i, j, k = int(parts[0]), int(parts[1]), int(parts[2])
                w = float(parts[3])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            if not 0 <= i < num_nodes or not 0 <= j < num_nodes:
                raise ValueError(f"line {lineno}: node index out of range")
            if not 0 <= k < num_views:
                raise ValueError(f"line {lineno}: view index out of range")
            if not np.isfinite(w) or w < 0:
                raise ValueError(f"line {lineno}: weight must be finite and non-negative")
            rows[k].append(i)
            cols[k].append(j)
            vals[k].append(w)

    slices = [
        sp.coo_array(
            (np.array(vals[k], dtype=float), (np.array(rows[k], dtype=int), np.array(cols[k], dtype=int))),
            shape=(num_nodes, num_nodes),
        )
        for k in range(num_views)
    ]
    return MultiViewGraph(slices=slices, symmetric=symmetric)
