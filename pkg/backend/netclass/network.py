"""
Network data model.

Undirected weighted networks on V labeled nodes are stored as symmetric V x V
matrices with zero diagonal. The model only ever sees their upper triangle,
flattened in the fixed row-major order

    (1,2), (1,3), ..., (1,V), (2,3), ..., (V-1,V)

which is also the column order of every dataset and posterior file. Node
indices are 0-based in code and 1-based in file formats and reports.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ValidationError

logger = logging.getLogger(__name__)

# Absolute tolerance for symmetry / zero-diagonal checks on ingest.
SYMMETRY_TOL = 1e-9


def n_edges(V: int) -> int:
    """Number of upper-triangular entries q = V(V-1)/2."""
    return V * (V - 1) // 2


def n_nodes_from_edges(q: int) -> int:
    """
    Invert q = V(V-1)/2.

    Raises:
        ValidationError: if q is not a triangular number.
    """
    if q < 0:
        raise ValidationError(f"edge count must be nonnegative, got {q}")
    V = int(round((1 + np.sqrt(1 + 8 * q)) / 2))
    if n_edges(V) != q:
        raise ValidationError(f"length {q} is not a triangular number V(V-1)/2")
    return V


@lru_cache(maxsize=64)
def edge_index(V: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the canonical edge order (0-based)."""
    rows, cols = np.triu_indices(V, k=1)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def edge_names(V: int) -> List[str]:
    """Column names "k_l" (1-based) in canonical edge order."""
    rows, cols = edge_index(V)
    return [f"{k + 1}_{l + 1}" for k, l in zip(rows, cols)]


def parse_edge_name(name: str) -> Tuple[int, int]:
    """Parse a "k_l" edge name into a 0-based (k, l) pair."""
    try:
        k, l = (int(part) for part in name.split("_"))
    except ValueError as exc:
        raise ValidationError(f"malformed edge name {name!r}") from exc
    return k - 1, l - 1


def edge_position(k: int, l: int, V: int) -> int:
    """Position of the 0-based pair (k, l) in canonical edge order."""
    if k == l:
        raise ValidationError(f"({k + 1},{l + 1}) is a diagonal entry")
    if k > l:
        k, l = l, k
    return k * V - k * (k + 1) // 2 + (l - k - 1)


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class AdjacencyMatrix:
    """
    A symmetric V x V matrix with zero diagonal.

    Use :meth:`from_array` to build one from raw data; it validates symmetry
    and symmetrizes entries that agree within ``SYMMETRY_TOL``.
    """

    entries: np.ndarray

    @classmethod
    def from_array(cls, array: Union[np.ndarray, Sequence], tol: float = SYMMETRY_TOL) -> "AdjacencyMatrix":
        """
        Validate and wrap a raw matrix.

        Args:
            array: Square array of edge weights.
            tol: Absolute tolerance for asymmetry and nonzero diagonal.

        Returns:
            AdjacencyMatrix with exactly symmetric entries and zero diagonal.

        Raises:
            ValidationError: on non-square input, or when an entry pair or a
                diagonal entry is off by more than ``tol``. The message names
                the first offending 1-based index pair.
        """
        A = np.asarray(array, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValidationError(f"adjacency matrix must be square, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            k, l = np.argwhere(~np.isfinite(A))[0]
            raise ValidationError(f"non-finite entry at ({k + 1},{l + 1})")

        diag = np.abs(np.diag(A))
        if np.any(diag > tol):
            k = int(np.argmax(diag > tol))
            raise ValidationError(f"nonzero diagonal entry at ({k + 1},{k + 1}): {A[k, k]!r}")

        gap = np.abs(A - A.T)
        if np.any(gap > tol):
            k, l = np.argwhere(np.triu(gap > tol, k=1))[0]
            raise ValidationError(
                f"asymmetric entries at ({k + 1},{l + 1}): {A[k, l]!r} vs {A[l, k]!r}"
            )

        A = (A + A.T) / 2.0
        np.fill_diagonal(A, 0.0)
        return cls(_frozen(A))

    @property
    def V(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EdgeVector:
    """Length-q vector of upper-triangular values in canonical edge order."""

    values: np.ndarray
    V: int = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValidationError(f"edge vector must be 1-D, got shape {values.shape}")
        V = n_nodes_from_edges(values.shape[0])
        if self.V is not None and self.V != V:
            raise ValidationError(f"edge vector of length {values.shape[0]} does not match V={self.V}")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "V", V)

    def __len__(self) -> int:
        return self.values.shape[0]


def _as_adjacency(A: Union[AdjacencyMatrix, np.ndarray]) -> AdjacencyMatrix:
    if isinstance(A, AdjacencyMatrix):
        return A
    return AdjacencyMatrix.from_array(A)


def _as_edge_values(gamma: Union[EdgeVector, np.ndarray]) -> np.ndarray:
    if isinstance(gamma, EdgeVector):
        return gamma.values
    return np.asarray(gamma, dtype=float)


def vectorize_upper(A: Union[AdjacencyMatrix, np.ndarray]) -> EdgeVector:
    """
    Flatten the upper triangle of a network in canonical edge order.

    Args:
        A: AdjacencyMatrix, or a raw array validated on the way in.

    Returns:
        EdgeVector of length V(V-1)/2.
    """
    A = _as_adjacency(A)
    rows, cols = edge_index(A.V)
    return EdgeVector(A.entries[rows, cols])


def devectorize(v: Union[EdgeVector, np.ndarray, Sequence]) -> AdjacencyMatrix:
    """
    Rebuild the symmetric zero-diagonal matrix from its upper triangle.

    An empty vector gives the 1 x 1 zero matrix.

    Raises:
        ValidationError: if the length is not a triangular number.
    """
    values = _as_edge_values(v) if not isinstance(v, (list, tuple)) else np.asarray(v, dtype=float)
    if values.ndim != 1:
        raise ValidationError(f"edge vector must be 1-D, got shape {values.shape}")
    V = n_nodes_from_edges(values.shape[0])
    rows, cols = edge_index(V)
    A = np.zeros((V, V))
    A[rows, cols] = values
    A[cols, rows] = values
    return AdjacencyMatrix(_frozen(A))


def coefficient_matrix(gamma: Union[EdgeVector, np.ndarray]) -> np.ndarray:
    """The matrix Gamma whose off-diagonal (k,l) entry is gamma_{k,l} / 2."""
    return devectorize(gamma).entries / 2.0


def frobenius_inner(A: np.ndarray, B: np.ndarray) -> float:
    """Frobenius inner product <A, B>_F = sum_{k,l} A_kl B_kl."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValidationError(f"shape mismatch {A.shape} vs {B.shape}")
    return float(np.sum(A * B))


def linear_predictor(A: Union[AdjacencyMatrix, np.ndarray], mu: float,
                     gamma: Union[EdgeVector, np.ndarray]) -> float:
    """
    psi = mu + x' gamma, with x the vectorized upper triangle of A.

    Equals mu + <A, Gamma>_F where Gamma = devectorize(gamma) / 2.

    Raises:
        ValidationError: if A and gamma disagree on V.
    """
    x = vectorize_upper(A).values
    g = _as_edge_values(gamma)
    if g.shape != x.shape:
        raise ValidationError(
            f"network has {x.shape[0]} edges but coefficient vector has {g.shape[0]}"
        )
    return float(mu + x @ g)


@dataclass(frozen=True)
class NetworkDataset:
    """
    n networks on a shared node set plus binary labels.

    Networks are held in vectorized form as the n x q design matrix ``edges``;
    :attr:`networks` rebuilds the matrices on demand.
    """

    edges: np.ndarray
    labels: np.ndarray
    V: int = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.edges, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise ValidationError(f"edge matrix must be 2-D (n x q), got shape {X.shape}")
        V = self.V if self.V is not None else n_nodes_from_edges(X.shape[1])
        if X.shape[1] != n_edges(V):
            raise ValidationError(f"edge matrix has {X.shape[1]} columns, expected {n_edges(V)} for V={V}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValidationError(f"{y.shape[0] if y.ndim == 1 else y.shape} labels for {X.shape[0]} networks")
        if not np.all(np.isin(y, (0, 1))):
            raise ValidationError("labels must be 0 or 1")
        if not np.all(np.isfinite(X)):
            i, j = np.argwhere(~np.isfinite(X))[0]
            raise ValidationError(f"non-finite edge weight for subject {i + 1}, edge {edge_names(V)[j]}")
        object.__setattr__(self, "edges", _frozen(X))
        labels = np.array(y, dtype=np.int8)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "V", V)

    @classmethod
    def from_networks(cls, networks: Sequence[Union[AdjacencyMatrix, np.ndarray]],
                      labels: Sequence[int], V: Optional[int] = None) -> "NetworkDataset":
        """
        Build a dataset from adjacency matrices.

        Raises:
            ValidationError: if the networks do not share V or label count differs.
        """
        mats = [_as_adjacency(A) for A in networks]
        sizes = {A.V for A in mats}
        if len(sizes) > 1:
            raise ValidationError(f"networks have differing node counts {sorted(sizes)}")
        if mats:
            V = mats[0].V
        elif V is None:
            raise ValidationError("V is required for an empty dataset")
        X = np.array([vectorize_upper(A).values for A in mats]).reshape(len(mats), n_edges(V))
        return cls(X, np.asarray(labels, dtype=np.int8).reshape(-1), V=V)

    @property
    def n(self) -> int:
        return self.edges.shape[0]

    @property
    def q(self) -> int:
        return self.edges.shape[1]

    @property
    def networks(self) -> List[AdjacencyMatrix]:
        return [devectorize(x) for x in self.edges]

    def subset(self, index: Sequence[int]) -> "NetworkDataset":
        """Dataset restricted to the given subject indices."""
        index = np.asarray(index, dtype=int)
        return NetworkDataset(self.edges[index], self.labels[index], V=self.V)

    def with_labels(self, labels: Sequence[int]) -> "NetworkDataset":
        return NetworkDataset(self.edges, np.asarray(labels), V=self.V)


@dataclass(frozen=True)
class EdgeLayout:
    """
    Per-node incidence of the canonical edge order.

    ``node_edges[k]`` lists the positions of the V-1 edges touching node k,
    ordered by the other endpoint, and ``node_others[k]`` those endpoints.
    """

    V: int
    rows: np.ndarray
    cols: np.ndarray
    node_edges: Tuple[np.ndarray, ...]
    node_others: Tuple[np.ndarray, ...]

    @classmethod
    def build(cls, V: int) -> "EdgeLayout":
        rows, cols = edge_index(V)
        node_edges = []
        node_others = []
        for k in range(V):
            others = np.array([j for j in range(V) if j != k], dtype=int)
            positions = np.array([edge_position(k, j, V) for j in others], dtype=int)
            node_edges.append(positions)
            node_others.append(others)
        return cls(V, rows, cols, tuple(node_edges), tuple(node_others))

    @property
    def q(self) -> int:
        return self.rows.shape[0]


@lru_cache(maxsize=16)
def edge_layout(V: int) -> EdgeLayout:
    """Cached :class:`EdgeLayout` for V nodes."""
    return EdgeLayout.build(V)
