import gzip

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from genclus.graphs import (
    DEFAULT_TELEPORT,
    MultiViewGraph,
    NormalizedTensor,
    directed_normalize,
    load_coo_tensor,
    save_coo_tensor,
    symmetric_normalize,
)


def _random_graph(rng, num_nodes, num_views, density=0.3, symmetric=False):
    slices = []
    for _ in range(num_views):
        x = (rng.random((num_nodes, num_nodes)) < density) * rng.random(
            (num_nodes, num_nodes)
        )
        np.fill_diagonal(x, 0.0)
        if symmetric:
            x = np.triu(x)
            x = x + x.T
        slices.append(x)
    return MultiViewGraph(slices=slices, symmetric=symmetric)


# ---------------------------------------------------------------------------
# container validation


def test_graph_requires_at_least_one_view():
    with pytest.raises(ValueError, match="at least one view"):
        MultiViewGraph(slices=[])


def test_graph_rejects_non_square():
    with pytest.raises(ValueError, match="square"):
        MultiViewGraph(slices=[np.zeros((2, 3))])


def test_graph_rejects_shape_mismatch():
    with pytest.raises(ValueError, match="slice 1"):
        MultiViewGraph(slices=[np.zeros((2, 2)), np.zeros((3, 3))])


def test_graph_rejects_negative_weights():
    with pytest.raises(ValueError, match="negative"):
        MultiViewGraph(slices=[np.array([[0.0, -1.0], [0.0, 0.0]])])


def test_graph_rejects_nan():
    with pytest.raises(ValueError, match="NaN or Inf"):
        MultiViewGraph(slices=[np.array([[0.0, np.nan], [0.0, 0.0]])])


def test_graph_checks_declared_symmetry():
    asym = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValueError, match="not symmetric"):
        MultiViewGraph(slices=[asym], symmetric=True)
    MultiViewGraph(slices=[asym], symmetric=False)  # fine when not declared


def test_graph_label_length_checks():
    x = np.zeros((2, 2))
    with pytest.raises(ValueError, match="view_labels"):
        MultiViewGraph(slices=[x], view_labels=[0, 1])
    with pytest.raises(ValueError, match="node labels"):
        MultiViewGraph(slices=[x], node_labels_per_structure={0: [0, 1, 2]})


def test_graph_merges_duplicate_coo_entries():
    dup = sp.coo_array((np.array([1.0, 2.0]), (np.array([0, 0]), np.array([1, 1]))), shape=(2, 2))
    g = MultiViewGraph(slices=[dup], symmetric=False)
    assert g.dense_stack()[0, 0, 1] == 3.0


def test_dense_stack_shape_and_counts():
    rng = np.random.default_rng(0)
    g = _random_graph(rng, 5, 3)
    assert g.num_nodes == 5
    assert g.num_views == 3
    assert g.dense_stack().shape == (3, 5, 5)


def test_normalized_tensor_validation():
    with pytest.raises(ValueError, match=r"\(K, I, I\)"):
        NormalizedTensor(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="NaN or Inf"):
        NormalizedTensor(np.full((1, 2, 2), np.nan))
    bad = np.zeros((1, 2, 2))
    bad[0, 0, 1] = 1.0
    with pytest.raises(ValueError, match="not symmetric"):
        NormalizedTensor(bad)


# ---------------------------------------------------------------------------
# symmetric normalization


def test_symmetric_normalize_two_node_example():
    g = MultiViewGraph(slices=[np.array([[0.0, 2.0], [2.0, 0.0]])], symmetric=True)
    out = symmetric_normalize(g)
    np.testing.assert_allclose(out.slices[0], np.array([[0.0, 1.0], [1.0, 0.0]]), atol=1e-12)
    assert out.kind == "symmetric"


def test_symmetric_normalize_isolated_node_stays_zero():
    x = np.zeros((3, 3))
    x[0, 1] = x[1, 0] = 1.0
    out = symmetric_normalize(MultiViewGraph(slices=[x], symmetric=True))
    np.testing.assert_array_equal(out.slices[0][2], 0.0)
    np.testing.assert_array_equal(out.slices[0][:, 2], 0.0)
    assert np.isfinite(out.slices[0]).all()


def test_symmetric_normalize_scale_invariant():
    rng = np.random.default_rng(1)
    g = _random_graph(rng, 8, 2, symmetric=True)
    scaled = MultiViewGraph(
        slices=[37.5 * s.toarray() for s in g.slices], symmetric=True
    )
    a = symmetric_normalize(g).slices
    b = symmetric_normalize(scaled).slices
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_symmetric_normalize_spectrum_in_unit_interval():
    rng = np.random.default_rng(2)
    g = _random_graph(rng, 12, 4, density=0.5, symmetric=True)
    for y in symmetric_normalize(g).slices:
        vals = np.linalg.eigvalsh(y)
        assert vals.min() >= -1.0 - 1e-10
        assert vals.max() <= 1.0 + 1e-10


def test_symmetric_normalize_disconnected_cliques_unit_eigenvalue():
    # c disconnected cliques: eigenvalue 1 with multiplicity exactly c
    sizes = (4, 3, 5)
    n = sum(sizes)
    x = np.zeros((n, n))
    start = 0
    for size in sizes:
        x[start : start + size, start : start + size] = 1.0
        start += size
    np.fill_diagonal(x, 0.0)
    out = symmetric_normalize(MultiViewGraph(slices=[x], symmetric=True))
    vals = np.linalg.eigvalsh(out.slices[0])
    assert np.sum(np.abs(vals - 1.0) < 1e-10) == len(sizes)


def test_symmetric_normalize_all_ones_top_eigenvalue_one():
    x = np.ones((6, 6))
    out = symmetric_normalize(MultiViewGraph(slices=[x], symmetric=True))
    vals = np.linalg.eigvalsh(out.slices[0])
    np.testing.assert_allclose(vals.max(), 1.0, atol=1e-12)


def test_symmetric_normalize_rejects_asymmetric_slice():
    g = _random_graph(np.random.default_rng(3), 4, 1, symmetric=False)
    with pytest.raises(ValueError, match="not symmetric"):
        symmetric_normalize(g)


def test_symmetric_normalize_output_exactly_symmetric():
    g = _random_graph(np.random.default_rng(4), 9, 3, symmetric=True)
    for y in symmetric_normalize(g).slices:
        np.testing.assert_array_equal(y, y.T)


# ---------------------------------------------------------------------------
# directed normalization


def test_directed_normalize_two_cycle_closed_form():
    # uniform stationary distribution, so the output equals the smoothed
    # transition matrix itself
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    alpha = 0.2
    out = directed_normalize(MultiViewGraph(slices=[a], symmetric=False), teleport=alpha)
    expected = (1 - alpha) * a + alpha / 2.0
    np.testing.assert_allclose(out.slices[0], expected, atol=1e-9)
    assert out.kind == "directed-teleport"


def test_directed_normalize_dangling_row_oracle():
    # independent reconstruction: dangling row jumps uniformly, stationary
    # distribution from the dense left eigenvector
    a = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    alpha = 0.15
    n = 3
    transition = np.full((n, n), 1.0 / n)
    row_sums = a.sum(axis=1)
    transition[row_sums > 0] = a[row_sums > 0] / row_sums[row_sums > 0, None]
    transition = (1 - alpha) * transition + alpha / n
    vals, vecs = np.linalg.eig(transition.T)
    pi = np.real(vecs[:, np.argmax(np.real(vals))])
    pi = np.abs(pi) / np.abs(pi).sum()
    phi = np.sqrt(pi)[:, None] * transition / np.sqrt(pi)[None, :]
    expected = (phi + phi.T) / 2.0
    out = directed_normalize(MultiViewGraph(slices=[a], symmetric=False), teleport=alpha)
    np.testing.assert_allclose(out.slices[0], expected, atol=1e-8)


def test_directed_normalize_top_eigenvalue_is_one():
    rng = np.random.default_rng(5)
    g = _random_graph(rng, 10, 3, density=0.4)
    out = directed_normalize(g, teleport=0.05)
    for y in out.slices:
        vals = np.linalg.eigvalsh(y)
        np.testing.assert_allclose(vals.max(), 1.0, atol=1e-7)
        assert vals.min() >= -1.0 - 1e-10


def test_directed_normalize_output_exactly_symmetric():
    g = _random_graph(np.random.default_rng(6), 7, 2)
    out = directed_normalize(g)
    for y in out.slices:
        np.testing.assert_array_equal(y, y.T)


def test_directed_normalize_teleport_limit_matches_symmetric():
    # on a connected aperiodic symmetric graph the teleport construction
    # degenerates to the degree rescaling as the jump probability vanishes
    rng = np.random.default_rng(7)
    x = rng.random((8, 8)) + 0.1
    x = (x + x.T) / 2.0
    g = MultiViewGraph(slices=[x], symmetric=True)
    near = directed_normalize(g, teleport=1e-8)
    base = symmetric_normalize(g)
    np.testing.assert_allclose(near.slices, base.slices, atol=1e-6)


def test_directed_normalize_teleport_range_validation():
    g = _random_graph(np.random.default_rng(8), 4, 1)
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError, match="teleport"):
            directed_normalize(g, teleport=bad)
    directed_normalize(g, teleport=0.99)  # extreme but legal


def test_directed_normalize_default_teleport():
    assert DEFAULT_TELEPORT == 0.01


# ---------------------------------------------------------------------------
# text serialization


def test_coo_round_trip_directed(tmp_path):
    rng = np.random.default_rng(9)
    g = _random_graph(rng, 6, 4)
    path = tmp_path / "tensor.txt"
    save_coo_tensor(g, path)
    back = load_coo_tensor(path)
    assert back.symmetric == g.symmetric
    np.testing.assert_array_equal(back.dense_stack(), g.dense_stack())


def test_coo_round_trip_symmetric_gzip(tmp_path):
    rng = np.random.default_rng(10)
    g = _random_graph(rng, 6, 2, symmetric=True)
    path = tmp_path / "tensor.txt.gz"
    save_coo_tensor(g, path)
    with gzip.open(path, "rt") as fh:
        assert fh.readline().strip() == "6 2 sym"
    back = load_coo_tensor(path)
    assert back.symmetric
    np.testing.assert_array_equal(back.dense_stack(), g.dense_stack())


def test_coo_round_trip_awkward_weights(tmp_path):
    x = np.zeros((3, 3))
    x[0, 1] = 0.1
    x[1, 2] = 1.0 / 3.0
    x[2, 0] = 1e-300
    g = MultiViewGraph(slices=[x], symmetric=False)
    path = tmp_path / "w.txt"
    save_coo_tensor(g, path)
    np.testing.assert_array_equal(load_coo_tensor(path).dense_stack(), g.dense_stack())


def test_coo_round_trip_empty_view(tmp_path):
    g = MultiViewGraph(slices=[np.zeros((4, 4)), np.eye(4)], symmetric=True)
    path = tmp_path / "e.txt"
    save_coo_tensor(g, path)
    back = load_coo_tensor(path)
    assert back.num_views == 2
    np.testing.assert_array_equal(back.dense_stack(), g.dense_stack())


@pytest.mark.parametrize(
    "body, lineno, message",
    [
        ("bogus header", 1, "header"),
        ("2 1", 1, "header"),
        ("2 1 wat", 1, "symmetry flag"),
        ("0 1 sym", 1, "positive"),
        ("2 1 sym\n0 1 0", 2, "expected"),
        ("2 1 sym\n0 1 0 0.5\nx y 0 1.0", 3, ""),
        ("2 1 sym\n0 5 0 1.0", 2, "node index"),
        ("2 1 sym\n0 1 3 1.0", 2, "view index"),
        ("2 1 sym\n0 1 0 -1.0", 2, "weight"),
        ("2 1 sym\n0 1 0 nan", 2, "weight"),
    ],
)
def test_coo_load_errors_carry_line_numbers(tmp_path, body, lineno, message):
    path = tmp_path / "bad.txt"
    path.write_text(body + "\n")
    with pytest.raises(ValueError, match=f"line {lineno}") as err:
        load_coo_tensor(path)
    assert message in str(err.value)


@settings(deadline=None, max_examples=25)
@given(
    seed=st.integers(0, 2**31 - 1),
    num_nodes=st.integers(1, 8),
    num_views=st.integers(1, 4),
    use_gzip=st.booleans(),
)
def test_coo_round_trip_property(tmp_path_factory, seed, num_nodes, num_views, use_gzip):
    rng = np.random.default_rng(seed)
    g = _random_graph(rng, num_nodes, num_views, density=0.5)
    name = "t.txt.gz" if use_gzip else "t.txt"
    path = tmp_path_factory.mktemp("coo") / name
    save_coo_tensor(g, path)
    back = load_coo_tensor(path)
    assert back.symmetric == g.symmetric
    np.testing.assert_array_equal(back.dense_stack(), g.dense_stack())
