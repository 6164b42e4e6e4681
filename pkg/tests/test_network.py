import numpy as np
import pytest

from conftest import random_connected_laplacian
from coherelab.errors import ValidationError
from coherelab.network import (
    EmptyOrFullIndexSet,
    IndexOutOfRange,
    InvalidK,
    LaplacianMatrix,
    NonPositiveWeight,
    SelfLoop,
    algebraic_connectivity,
    complete_graph,
    edges_of,
    grounded,
    grounded_bound_check,
    k_regular_ring,
    laplacian_from_edges,
    read_edge_list,
    scale_connectivity,
    write_edge_list,
)


def ring_eigenvalue_oracle(n: int, k: int, weight: float = 1.0) -> float:
    """Smallest positive circulant eigenvalue of the k-nearest-neighbour ring."""
    best = np.inf
    for m in range(1, n):
        lam = weight * sum(2.0 * (1.0 - np.cos(2.0 * np.pi * m * d / n))
                           for d in range(1, k + 1))
        best = min(best, lam)
    return best


# ---------------------------------------------------------------------------
# construction and validation

def test_path_graph_spectrum_oracle():
    lap = laplacian_from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])
    assert np.allclose(lap.matrix, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    assert np.allclose(lap.eigenvalues, [0.0, 1.0, 3.0], atol=1e-12)


def test_duplicate_edges_are_summed():
    lap = laplacian_from_edges(2, [(0, 1, 1.0), (1, 0, 0.5)])
    assert lap.matrix[0, 1] == pytest.approx(-1.5)


def test_edge_validation_errors():
    with pytest.raises(SelfLoop):
        laplacian_from_edges(2, [(1, 1, 1.0)])
    with pytest.raises(NonPositiveWeight):
        laplacian_from_edges(2, [(0, 1, 0.0)])
    with pytest.raises(IndexOutOfRange):
        laplacian_from_edges(2, [(0, 2, 1.0)])


def test_asymmetric_matrix_rejected():
    with pytest.raises(ValidationError, match="symmetric"):
        LaplacianMatrix([[1.0, -1.0], [-0.5, 0.5]])


def test_positive_off_diagonal_rejected():
    with pytest.raises(ValidationError, match="off-diagonal"):
        LaplacianMatrix([[-1.0, 1.0], [1.0, -1.0]])


def test_nonzero_row_sums_rejected():
    with pytest.raises(ValidationError, match="row sums"):
        LaplacianMatrix([[2.0, -1.0], [-1.0, 1.0]])


def test_single_node_graph():
    lap = LaplacianMatrix([[0.0]])
    assert lap.connected
    assert algebraic_connectivity(lap) == 0.0


def test_disconnected_graph_constructs_with_flag():
    lap = laplacian_from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
    assert not lap.connected
    assert algebraic_connectivity(lap) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# spectral properties

def test_complete_graph_spectrum():
    lap = complete_graph(4)
    assert np.allclose(lap.eigenvalues, [0.0, 4.0, 4.0, 4.0], atol=1e-12)
    assert algebraic_connectivity(complete_graph(7, 2.0)) == pytest.approx(14.0)


def test_eigendecomposition_reconstructs():
    rng = np.random.default_rng(7)
    for n in (2, 5, 9):
        lap = random_connected_laplacian(rng, n)
        V, lam = lap.eigenvectors, lap.eigenvalues
        assert np.allclose(V.T @ V, np.eye(n), atol=1e-10)
        assert np.allclose(V @ np.diag(lam) @ V.T, lap.matrix, atol=1e-9)


def test_first_eigenvector_is_uniform_for_connected_graphs():
    rng = np.random.default_rng(21)
    for n in (2, 6, 11):
        lap = random_connected_laplacian(rng, n)
        assert np.allclose(lap.eigenvectors[:, 0], np.ones(n) / np.sqrt(n),
                           atol=1e-9)


def test_eigenvector_sign_convention_is_deterministic():
    lap1 = complete_graph(5)
    lap2 = complete_graph(5)
    assert np.array_equal(lap1.eigenvectors, lap2.eigenvectors)
    for col in range(5):
        column = lap1.eigenvectors[:, col]
        first = column[np.nonzero(np.abs(column) > 1e-12)[0][0]]
        assert first > 0


def test_ring_matches_circulant_oracle():
    lap = k_regular_ring(20, 3)
    assert algebraic_connectivity(lap) == pytest.approx(
        ring_eigenvalue_oracle(20, 3), abs=1e-9)


def test_small_rings():
    # one neighbour per side on four nodes: the 4-cycle
    lap = k_regular_ring(4, 1)
    assert np.allclose(lap.eigenvalues, [0.0, 2.0, 2.0, 4.0], atol=1e-12)
    # two neighbours per side on five nodes covers every pair
    assert np.allclose(k_regular_ring(5, 2).matrix, complete_graph(5).matrix)


def test_invalid_ring_parameters():
    with pytest.raises(InvalidK):
        k_regular_ring(4, 2)
    with pytest.raises(InvalidK):
        k_regular_ring(10, 0)


def test_scaling_scales_spectrum_exactly():
    rng = np.random.default_rng(3)
    lap = random_connected_laplacian(rng, 6)
    scaled = scale_connectivity(lap, 32.0)
    assert np.array_equal(scaled.eigenvalues, 32.0 * lap.eigenvalues)
    assert np.array_equal(scaled.eigenvectors, lap.eigenvectors)
    assert np.allclose(scaled.matrix, 32.0 * lap.matrix)


def test_scale_rejects_nonpositive():
    with pytest.raises(ValidationError):
        scale_connectivity(complete_graph(3), 0.0)


# ---------------------------------------------------------------------------
# grounding

def test_grounded_triangle_equality_case():
    lam, reference, holds = grounded_bound_check(complete_graph(3), {0})
    assert lam == pytest.approx(1.0, abs=1e-12)
    assert reference == pytest.approx(1.0, abs=1e-12)
    assert holds


def test_grounded_index_validation():
    lap = complete_graph(3)
    with pytest.raises(EmptyOrFullIndexSet):
        grounded(lap, set())
    with pytest.raises(EmptyOrFullIndexSet):
        grounded(lap, {0, 1, 2})
    with pytest.raises(IndexOutOfRange):
        grounded(lap, {5})


def test_grounded_share_of_connectivity_on_random_graphs():
    rng = np.random.default_rng(11)
    for _ in range(40):
        n = int(rng.integers(3, 13))
        lap = random_connected_laplacian(rng, n)
        m = int(rng.integers(1, n))
        removed = rng.choice(n, size=m, replace=False)
        lam, reference, holds = grounded_bound_check(lap, removed)
        assert holds, (lam, reference)


# ---------------------------------------------------------------------------
# files

def test_edge_list_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    lap = random_connected_laplacian(rng, 7)
    path = tmp_path / "graph.txt"
    write_edge_list(path, lap)
    back = read_edge_list(path)
    assert np.allclose(back.matrix, lap.matrix, atol=1e-15)
    assert edges_of(back) == pytest.approx(edges_of(lap))


def test_edge_list_parser_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("nodes 3\nedge 0 1 1.0\nedge 0 oops 1.0\n")
    with pytest.raises(ValidationError, match="line 3"):
        read_edge_list(path)


def test_edge_list_requires_node_count(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("# only a comment\n")
    with pytest.raises(ValidationError, match="nodes"):
        read_edge_list(path)
