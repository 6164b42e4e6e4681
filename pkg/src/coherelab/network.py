"""Weighted graph Laplacians with eagerly cached spectral data.

A :class:`LaplacianMatrix` validates the defining structure (symmetry,
zero row sums, non-positive off-diagonal entries) and stores the full
eigendecomposition so downstream frequency-domain work never recomputes
it.  Eigenvectors follow a deterministic sign convention: the first
component of each that exceeds the noise floor is made positive.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

SYMMETRY_RTOL = 1e-12
ROW_SUM_RTOL = 1e-10
OFF_DIAGONAL_RTOL = 1e-12
ZERO_EIGENVALUE_RTOL = 1e-9
CONNECTIVITY_RTOL = 1e-9


class SelfLoop(ValidationError):
    """An edge connects a node to itself."""


class NonPositiveWeight(ValidationError):
    """An edge weight is zero or negative."""


class IndexOutOfRange(ValidationError):
    """An edge endpoint falls outside 0..n-1."""


class InvalidK(ValidationError):
    """Ring coupling range k violates 1 <= k < n/2."""


class EmptyOrFullIndexSet(ValidationError):
    """Grounding must remove a non-empty strict subset of nodes."""


def _apply_sign_convention(vectors: np.ndarray) -> np.ndarray:
    vectors = np.array(vectors)
    for col in range(vectors.shape[1]):
        column = vectors[:, col]
        nonzero = np.nonzero(np.abs(column) > 1e-12)[0]
        if nonzero.size and column[nonzero[0]] < 0:
            vectors[:, col] = -column
    return vectors


class LaplacianMatrix:
    """Dense symmetric graph Laplacian with cached spectrum."""

    __slots__ = ("matrix", "eigenvalues", "eigenvectors", "norm")

    def __init__(self, matrix, *, _spectrum=None):
        mat = np.asarray(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValidationError("Laplacian must be a square matrix")
        if not np.all(np.isfinite(mat)):
            raise ValidationError("Laplacian entries must be finite")
        n = mat.shape[0]

        if _spectrum is not None:
            eigenvalues, eigenvectors = _spectrum
            scale = float(np.max(np.abs(eigenvalues))) if n else 0.0
        else:
            sym = 0.5 * (mat + mat.T)
            eigenvalues, eigenvectors = np.linalg.eigh(sym)
            scale = float(np.max(np.abs(eigenvalues)))
            asymmetry = float(np.linalg.norm(mat - mat.T))
            if asymmetry > SYMMETRY_RTOL * max(scale, 1e-300):
                raise ValidationError(
                    f"matrix is not symmetric (deviation {asymmetry:.3e})")
            row_sums = float(np.max(np.abs(mat.sum(axis=1))))
            if row_sums > ROW_SUM_RTOL * scale:
                raise ValidationError(
                    f"row sums must vanish (largest {row_sums:.3e})")
            off = mat - np.diag(np.diag(mat))
            worst_off = float(off.max(initial=0.0))
            if worst_off > OFF_DIAGONAL_RTOL * scale:
                raise ValidationError(
                    f"off-diagonal entries must be <= 0 (found {worst_off:.3e})")
            if abs(float(eigenvalues[0])) > ZERO_EIGENVALUE_RTOL * max(scale, 1e-300):
                raise ValidationError(
                    f"smallest eigenvalue {eigenvalues[0]:.3e} is not zero")
            eigenvectors = _apply_sign_convention(eigenvectors)

        self.matrix = mat
        self.eigenvalues = np.asarray(eigenvalues, dtype=float)
        self.eigenvectors = np.asarray(eigenvectors, dtype=float)
        self.norm = scale
        self.matrix.setflags(write=False)
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def connected(self) -> bool:
        if self.n == 1:
            return True
        return float(self.eigenvalues[1]) > CONNECTIVITY_RTOL * max(self.norm, 1e-300)

    def __repr__(self) -> str:
        return f"LaplacianMatrix(n={self.n}, lambda2={algebraic_connectivity(self):.6g})"


@dataclass(frozen=True)
class GroundedLaplacian:
    """Principal submatrix of a Laplacian after removing grounded nodes."""

    matrix: np.ndarray
    kept: tuple[int, ...]
    removed: tuple[int, ...]
    parent_n: int
    eigenvalues: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues",
                           np.linalg.eigvalsh(self.matrix))

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])


def laplacian_from_edges(n: int, edges: Iterable[tuple[int, int, float]]) -> LaplacianMatrix:
    """Build a Laplacian from weighted undirected edges; duplicates are summed."""
    if n < 1:
        raise ValidationError("node count must be positive")
    adjacency = np.zeros((n, n))
    for i, j, w in edges:
        i, j, w = int(i), int(j), float(w)
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"edge ({i}, {j}) outside 0..{n - 1}")
        if i == j:
            raise SelfLoop(f"self-loop at node {i}")
        if not (w > 0.0):
            raise NonPositiveWeight(f"edge ({i}, {j}) has non-positive weight {w}")
        adjacency[i, j] += w
        adjacency[j, i] += w
    return LaplacianMatrix(np.diag(adjacency.sum(axis=1)) - adjacency)


def complete_graph(n: int, weight: float = 1.0) -> LaplacianMatrix:
    if n < 2:
        raise ValidationError("complete graph needs at least two nodes")
    if not (weight > 0.0):
        raise NonPositiveWeight(f"weight {weight} must be positive")
    mat = -weight * np.ones((n, n))
    np.fill_diagonal(mat, weight * (n - 1))
    return LaplacianMatrix(mat)


def k_regular_ring(n: int, k: int, weight: float = 1.0) -> LaplacianMatrix:
    """Ring of n nodes, each coupled to its k nearest neighbours per side."""
    if not (1 <= k < n / 2):
        raise InvalidK(f"need 1 <= k < n/2, got k={k}, n={n}")
    if not (weight > 0.0):
        raise NonPositiveWeight(f"weight {weight} must be positive")
    adjacency = np.zeros((n, n))
    for i in range(n):
        for d in range(1, k + 1):
            adjacency[i, (i + d) % n] = weight
            adjacency[i, (i - d) % n] = weight
    return LaplacianMatrix(np.diag(adjacency.sum(axis=1)) - adjacency)


def algebraic_connectivity(lap: LaplacianMatrix) -> float:
    """Second-smallest Laplacian eigenvalue (0.0 for a single node)."""
    if lap.n == 1:
        return 0.0
    return float(lap.eigenvalues[1])


def scale_connectivity(lap: LaplacianMatrix, alpha: float) -> LaplacianMatrix:
    """Scale all edge weights by alpha > 0; eigenvectors are unchanged."""
    if not (alpha > 0.0):
        raise ValidationError(f"scale factor must be positive, got {alpha}")
    return LaplacianMatrix(
        alpha * lap.matrix,
        _spectrum=(alpha * lap.eigenvalues, lap.eigenvectors),
    )


def grounded(lap: LaplacianMatrix, removed: Iterable[int]) -> GroundedLaplacian:
    removed_set = {int(i) for i in removed}
    if any(i < 0 or i >= lap.n for i in removed_set):
        raise IndexOutOfRange(f"grounded indices {sorted(removed_set)} out of range")
    if not removed_set or len(removed_set) >= lap.n:
        raise EmptyOrFullIndexSet(
            "grounding removes a non-empty strict subset of nodes")
    kept = tuple(i for i in range(lap.n) if i not in removed_set)
    sub = lap.matrix[np.ix_(kept, kept)]
    return GroundedLaplacian(matrix=np.array(sub), kept=kept,
                             removed=tuple(sorted(removed_set)), parent_n=lap.n)


def grounded_bound_check(lap: LaplacianMatrix, removed: Iterable[int],
                         tol: float = 1e-9) -> tuple[float, float, bool]:
    """Compare the grounded submatrix's smallest eigenvalue to (m/n) lambda2.

    Returns ``(lambda_min, reference, holds)`` where the reference value is
    the removed-fraction share of the algebraic connectivity.
    """
    sub = grounded(lap, removed)
    reference = len(sub.removed) / lap.n * algebraic_connectivity(lap)
    lam = sub.lambda_min
    return lam, reference, lam >= reference - tol


# ---------------------------------------------------------------------------
# edge-list text files


def read_edge_list(path: str | os.PathLike) -> LaplacianMatrix:
    """Read ``nodes <n>`` / ``edge <i> <j> <w>`` lines; ``#`` starts a comment."""
    n = None
    edges: list[tuple[int, int, float]] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                if tokens[0] == "nodes" and len(tokens) == 2:
                    n = int(tokens[1])
                elif tokens[0] == "edge" and len(tokens) == 4:
                    edges.append((int(tokens[1]), int(tokens[2]), float(tokens[3])))
                else:
                    raise ValueError("unrecognized directive")
            except ValueError as exc:
                raise ValidationError(f"{path}: line {lineno}: {exc}") from exc
    if n is None:
        raise ValidationError(f"{path}: missing 'nodes <n>' line")
    return laplacian_from_edges(n, edges)


def write_edge_list(path: str | os.PathLike, lap: LaplacianMatrix) -> None:
    lines = [f"nodes {lap.n}"]
    for i in range(lap.n):
        for j in range(i + 1, lap.n):
            w = -float(lap.matrix[i, j])
            if w > 0.0:
                lines.append(f"edge {i} {j} {w!r}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def edges_of(lap: LaplacianMatrix) -> list[tuple[int, int, float]]:
    """Recover the (i < j, weight) edge list from the matrix."""
    out = []
    for i in range(lap.n):
        for j in range(i + 1, lap.n):
            w = -float(lap.matrix[i, j])
            if w > 0.0:
                out.append((i, j, w))
    return out
