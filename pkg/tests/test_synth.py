import numpy as np
import pytest

from genclus.synth import (
    DENSITY_GRID,
    GeneratorSpec,
    default_benchmark_spec,
    generate,
    scaled_benchmark_spec,
)


def _block_mask(sizes):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    return labels[:, None] == labels[None, :]


# ---------------------------------------------------------------------------
# GeneratorSpec validation


def test_spec_rejects_empty_and_mismatched_structures():
    with pytest.raises(ValueError, match="at least one structure"):
        GeneratorSpec(structures=())
    with pytest.raises(ValueError, match="node total"):
        GeneratorSpec(structures=((1, (4, 4)), (1, (5, 4))))


def test_spec_rejects_bad_probabilities_and_sizes():
    good = ((1, (3, 3)),)
    with pytest.raises(ValueError, match="density"):
        GeneratorSpec(structures=good, density=1.5)
    with pytest.raises(ValueError, match="flip_fraction"):
        GeneratorSpec(structures=good, flip_fraction=-0.1)
    with pytest.raises(ValueError, match="at least one view"):
        GeneratorSpec(structures=((0, (3, 3)),))
    with pytest.raises(ValueError, match="positive"):
        GeneratorSpec(structures=((1, (3, 0)),))


def test_spec_counts():
    spec = default_benchmark_spec()
    assert spec.num_nodes == 120
    assert spec.num_views == 9
    assert spec.directed
    assert spec.density == 0.15
    assert spec.flip_fraction == 0.01


def test_density_grid_descends_from_015_to_001():
    assert DENSITY_GRID == (0.15, 0.13, 0.11, 0.09, 0.07, 0.05, 0.03, 0.01)


# ---------------------------------------------------------------------------
# generation


def test_generate_default_layout():
    graph = generate(default_benchmark_spec(seed=1))
    assert graph.num_nodes == 120
    assert graph.num_views == 9
    assert not graph.symmetric
    np.testing.assert_array_equal(graph.view_labels, np.repeat([0, 1, 2], 3))
    np.testing.assert_array_equal(
        graph.node_labels_per_structure[0], np.repeat([0, 1, 2], [60, 40, 20])
    )
    np.testing.assert_array_equal(
        graph.node_labels_per_structure[1], np.repeat([0, 1], [100, 20])
    )
    np.testing.assert_array_equal(
        graph.node_labels_per_structure[2], np.repeat([0, 1], [20, 100])
    )


def test_generate_deterministic_per_seed():
    spec = GeneratorSpec(structures=((2, (5, 5)),), density=0.4, seed=3)
    a = generate(spec).dense_stack()
    b = generate(spec).dense_stack()
    np.testing.assert_array_equal(a, b)
    c = generate(GeneratorSpec(structures=((2, (5, 5)),), density=0.4, seed=4))
    assert not np.array_equal(a, c.dense_stack())


def test_generate_directed_is_binary_no_self_loops():
    graph = generate(GeneratorSpec(structures=((2, (6, 6)),), density=0.5, seed=0))
    stack = graph.dense_stack()
    assert set(np.unique(stack)) <= {0.0, 1.0}
    for k in range(stack.shape[0]):
        np.testing.assert_array_equal(np.diag(stack[k]), 0.0)


def test_generate_undirected_is_symmetric():
    spec = GeneratorSpec(structures=((3, (5, 7)),), density=0.4, directed=False, seed=2)
    graph = generate(spec)
    assert graph.symmetric
    stack = graph.dense_stack()
    np.testing.assert_array_equal(stack, stack.transpose(0, 2, 1))
    for k in range(stack.shape[0]):
        np.testing.assert_array_equal(np.diag(stack[k]), 0.0)


def test_generate_full_density_no_noise_gives_clean_blocks():
    spec = GeneratorSpec(
        structures=((1, (4, 3)), (1, (2, 5))), density=1.0, flip_fraction=0.0, seed=5
    )
    stack = generate(spec).dense_stack()
    for k, sizes in ((0, (4, 3)), (1, (2, 5))):
        mask = _block_mask(sizes)
        expected = mask.astype(float)
        np.fill_diagonal(expected, 0.0)
        np.testing.assert_array_equal(stack[k], expected)


def test_generate_zero_density_no_noise_is_empty():
    spec = GeneratorSpec(structures=((2, (5, 5)),), density=0.0, flip_fraction=0.0)
    assert generate(spec).dense_stack().sum() == 0.0


def test_generate_flip_everything_inverts_clean_blocks():
    spec = GeneratorSpec(structures=((1, (3, 3)),), density=1.0, flip_fraction=1.0, seed=0)
    x = generate(spec).dense_stack()[0]
    mask = _block_mask((3, 3))
    np.testing.assert_array_equal(x[mask], 0.0)  # intra-block edges all removed
    off = ~mask
    np.testing.assert_array_equal(x[off], 1.0)  # every cross pair added


def test_generate_respects_each_structures_own_blocks():
    spec = GeneratorSpec(
        structures=((1, (8, 4)), (1, (4, 8))), density=0.7, flip_fraction=0.0, seed=7
    )
    stack = generate(spec).dense_stack()
    assert stack[0][~_block_mask((8, 4))].sum() == 0.0
    assert stack[1][~_block_mask((4, 8))].sum() == 0.0
    assert stack[1][4:8, 8:12].sum() > 0  # crosses structure 0's boundary


def test_generate_intra_block_density_binomial():
    size = 40
    gamma = 0.3
    spec = GeneratorSpec(
        structures=((1, (size, size)),), density=gamma, flip_fraction=0.0, seed=11
    )
    x = generate(spec).dense_stack()[0]
    pairs = 2 * size * (size - 1)  # ordered intra-block pairs, both blocks
    count = x.sum()
    sigma = np.sqrt(pairs * gamma * (1 - gamma))
    assert abs(count - pairs * gamma) <= 4 * sigma


def test_generate_flip_count_binomial_over_seeds():
    n, flip = 30, 0.05
    counts = []
    for seed in range(30):
        spec = GeneratorSpec(
            structures=((1, (n,)),), density=0.0, flip_fraction=flip, seed=seed
        )
        # single blockless... block spans everything, so density 0 means every
        # edge present is a flip
        counts.append(generate(spec).dense_stack().sum())
    pairs = n * (n - 1)
    mean = np.mean(counts)
    sigma = np.sqrt(pairs * flip * (1 - flip) / len(counts))
    assert abs(mean - pairs * flip) <= 4 * sigma


def test_generate_undirected_flip_count_binomial_over_seeds():
    n, flip = 30, 0.05
    counts = []
    for seed in range(30):
        spec = GeneratorSpec(
            structures=((1, (n,)),),
            density=0.0,
            flip_fraction=flip,
            directed=False,
            seed=seed,
        )
        counts.append(np.triu(generate(spec).dense_stack()[0]).sum())
    pairs = n * (n - 1) / 2
    mean = np.mean(counts)
    sigma = np.sqrt(pairs * flip * (1 - flip) / len(counts))
    assert abs(mean - pairs * flip) <= 4 * sigma


# ---------------------------------------------------------------------------
# scaled recipe


def test_scaled_spec_identity_at_default_size():
    spec = scaled_benchmark_spec(num_nodes=120, num_views=9)
    assert spec.structures == default_benchmark_spec().structures


def test_scaled_spec_halves_cleanly():
    spec = scaled_benchmark_spec(num_nodes=60, num_views=9)
    assert spec.structures == ((3, (30, 20, 10)), (3, (50, 10)), (3, (10, 50)))


def test_scaled_spec_distributes_extra_views_to_early_structures():
    spec = scaled_benchmark_spec(num_nodes=120, num_views=10)
    assert tuple(vc for vc, _ in spec.structures) == (4, 3, 3)
    spec = scaled_benchmark_spec(num_nodes=120, num_views=32)
    assert tuple(vc for vc, _ in spec.structures) == (11, 11, 10)


def test_scaled_spec_largest_remainder_preserves_totals():
    for num_nodes in (7, 31, 75, 240, 481):
        spec = scaled_benchmark_spec(num_nodes=num_nodes)
        for _, sizes in spec.structures:
            assert sum(sizes) == num_nodes
            assert min(sizes) >= 1


def test_scaled_spec_rejects_impossible_sizes():
    with pytest.raises(ValueError, match="without emptying"):
        scaled_benchmark_spec(num_nodes=2)
    with pytest.raises(ValueError, match="at least 3 views"):
        scaled_benchmark_spec(num_views=2)
