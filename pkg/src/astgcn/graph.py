"""Road network representation and the symmetric-normalized propagation matrix.

Propagation is stored dense. That is fine up to a few thousand road sections;
beyond that a sparse representation would be needed.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AsymmetricError,
    DimensionMismatchError,
    NegativeEntryError,
    NonSquareError,
)

SYMMETRY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RoadGraph:
    """Immutable road network: raw adjacency plus D^-1/2 (A + I) D^-1/2."""

    adjacency: np.ndarray
    propagation: np.ndarray

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def permuted(self, order) -> "RoadGraph":
        order = np.asarray(order)
        return build_graph(self.adjacency[np.ix_(order, order)])


def normalized_propagation(adjacency: np.ndarray) -> np.ndarray:
    n = adjacency.shape[0]
    a_tilde = adjacency + np.eye(n)
    d_inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    prop = d_inv_sqrt[:, None] * a_tilde * d_inv_sqrt[None, :]
    # floating-point products may differ in the last bit across the diagonal
    upper = np.triu(prop)
    return upper + np.triu(prop, 1).T


def build_graph(adjacency) -> RoadGraph:
    a = np.array(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquareError(a.shape)
    neg = np.argwhere(a < 0)
    if len(neg):
        i, j = neg[0]
        raise NegativeEntryError(i, j, a[i, j])
    diff = np.abs(a - a.T)
    if diff.size and diff.max() > SYMMETRY_TOL:
        i, j = np.unravel_index(np.argmax(diff), diff.shape)
        i, j = min(i, j), max(i, j)
        raise AsymmetricError(i, j, a[i, j], a[j, i])
    a.setflags(write=False)
    prop = normalized_propagation(a)
    prop.setflags(write=False)
    return RoadGraph(adjacency=a, propagation=prop)


def isolated_graph(n: int) -> RoadGraph:
    """Graph without edges; its propagation is the identity (GRU-only baseline)."""
    return build_graph(np.zeros((n, n)))


def propagate(graph: RoadGraph, features) -> np.ndarray:
    """Return propagation @ features. Leading batch axes are allowed."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim < 2 or x.shape[-2] != graph.n:
        raise DimensionMismatchError(
            f"features have shape {x.shape}, expected {graph.n} rows"
        )
    return np.matmul(graph.propagation, x)


def load_adjacency_csv(path) -> RoadGraph:
    from .dataset import read_numeric_csv

    return build_graph(read_numeric_csv(Path(path)))


def write_adjacency_csv(path, graph: RoadGraph) -> None:
    from .dataset import write_numeric_csv

    write_numeric_csv(Path(path), graph.adjacency)
