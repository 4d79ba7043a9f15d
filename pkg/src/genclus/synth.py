"""Synthetic multi-structure multi-view graph generator.

Every structure is a partition of the shared node set into blocks; each of
its views draws intra-block edges independently with a fixed density and
then flips a small random fraction of all node pairs, so cross-block noise
edges appear and some block edges disappear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graphs import MultiViewGraph

__all__ = [
    "GeneratorSpec",
    "DENSITY_GRID",
    "generate",
    "default_benchmark_spec",
    "scaled_benchmark_spec",
]

# densities used by the quality benchmark, high to low
DENSITY_GRID = (0.15, 0.13, 0.11, 0.09, 0.07, 0.05, 0.03, 0.01)

_BENCHMARK_STRUCTURES = (
    (3, (60, 40, 20)),
    (3, (100, 20)),
    (3, (20, 100)),
)


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for one synthetic graph.

    structures is a sequence of (view_count, block_sizes) pairs; block sizes
    must sum to the same node total in every structure. density is the
    intra-block edge probability, flip_fraction the probability of toggling
    any given (ordered) node pair afterwards.
    """

    structures: tuple
    density: float = 0.15
    flip_fraction: float = 0.01
    directed: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.structures:
            raise ValueError("need at least one structure")
        totals = {sum(sizes) for _, sizes in self.structures}
        if len(totals) != 1:
            raise ValueError(f"structures disagree on the node total: {sorted(totals)}")
        if not 0.0 <= self.density <= 1.0:
            raise ValueError(f"density must lie in [0, 1], got {self.density}")
        if not 0.0 <= self.flip_fraction <= 1.0:
            raise ValueError(f"flip_fraction must lie in [0, 1], got {self.flip_fraction}")
        for vc, sizes in self.structures:
            if vc < 1:
                raise ValueError("every structure needs at least one view")
            if any(s < 1 for s in sizes):
                raise ValueError("block sizes must be positive")

    @property
    def num_nodes(self):
        return sum(self.structures[0][1])

    @property
    def num_views(self):
        return sum(vc for vc, _ in self.structures)


def _block_bounds(sizes):
    offsets = np.cumsum((0,) + tuple(sizes))
    return list(zip(offsets[:-1], offsets[1:]))


def _directed_view(rng, n, bounds, density, flip):
    x = np.zeros((n, n))
    for start, stop in bounds:
        size = stop - start
        block = rng.random((size, size)) < density
        x[start:stop, start:stop] = block
    np.fill_diagonal(x, 0.0)
    flips = rng.random((n, n)) < flip
    np.fill_diagonal(flips, False)
    x[flips] = 1.0 - x[flips]
    return x


def _undirected_view(rng, n, bounds, density, flip):
    x = np.zeros((n, n))
    for start, stop in bounds:
        size = stop - start
        draw = rng.random((size, size)) < density
        upper = np.triu(draw, k=1)
        x[start:stop, start:stop] = upper | upper.T
    flips = np.triu(rng.random((n, n)) < flip, k=1)
    flips = flips | flips.T
    x[flips] = 1.0 - x[flips]
    return x


def generate(spec):
    """Sample a multi-view graph with ground-truth labels from a spec.

    Views come out grouped by structure, in declaration order; node labels
    assign consecutive index blocks to clusters. The same seed always yields
    the same graph, entry for entry.
    """
    n = spec.num_nodes
    rng = np.random.default_rng(spec.seed)
    slices = []
    view_labels = []
    node_labels = {}
    for s, (view_count, sizes) in enumerate(spec.structures):
        bounds = _block_bounds(sizes)
        labels = np.repeat(np.arange(len(sizes)), sizes)
        node_labels[s] = labels
        for _ in range(view_count):
            if spec.directed:
                x = _directed_view(rng, n, bounds, spec.density, spec.flip_fraction)
            else:
                x = _undirected_view(rng, n, bounds, spec.density, spec.flip_fraction)
            slices.append(sp.coo_array(x))
            view_labels.append(s)
    return MultiViewGraph(
        slices=slices,
        symmetric=not spec.directed,
        view_labels=np.array(view_labels),
        node_labels_per_structure=node_labels,
    )


def default_benchmark_spec(density=0.15, flip_fraction=0.01, directed=True, seed=0):
    """The standard benchmark recipe: 120 nodes, 9 views, 3 structures.

    The structures partition the nodes into blocks of (60, 40, 20),
    (100, 20) and (20, 100), three views each. density is normally taken
    from DENSITY_GRID.
    """
    return GeneratorSpec(
        structures=_BENCHMARK_STRUCTURES,
        density=density,
        flip_fraction=flip_fraction,
        directed=directed,
        seed=seed,
    )


def _scale_sizes(sizes, total_from, total_to):
    """Largest-remainder proportional rescale keeping every block non-empty."""
    shares = np.array(sizes, dtype=float) * total_to / total_from
    floors = np.floor(shares).astype(int)
    remainder = int(total_to - floors.sum())
    order = np.argsort(-(shares - floors), kind="stable")
    floors[order[:remainder]] += 1
    if (floors < 1).any():
        raise ValueError(
            f"cannot scale blocks {sizes} to {total_to} nodes without emptying one"
        )
    return tuple(int(v) for v in floors)


def scaled_benchmark_spec(
    num_nodes=120,
    num_views=9,
    density=0.15,
    flip_fraction=0.01,
    directed=True,
    seed=0,
):
    """Benchmark recipe with node and view counts rescaled proportionally.

    Block sizes scale by largest-remainder rounding; views are dealt to the
    three structures as evenly as possible, earlier structures first.
    """
    if num_views < len(_BENCHMARK_STRUCTURES):
        raise ValueError(
            f"need at least {len(_BENCHMARK_STRUCTURES)} views, got {num_views}"
        )
    base_total = sum(_BENCHMARK_STRUCTURES[0][1])
    per, extra = divmod(num_views, len(_BENCHMARK_STRUCTURES))
    structures = tuple(
        (per + (1 if s < extra else 0), _scale_sizes(sizes, base_total, num_nodes))
        for s, (_, sizes) in enumerate(_BENCHMARK_STRUCTURES)
    )
    return GeneratorSpec(
        structures=structures,
        density=density,
        flip_fraction=flip_fraction,
        directed=directed,
        seed=seed,
    )

