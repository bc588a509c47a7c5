"""Mixed graphs, their form representations and the linear transformation law.

Conventions used throughout the package:

* ``M[k, l] = A(e_k, e_l)``. Bilinear forms evaluate as ``uᵀ M v``; sesquilinear
  forms are conjugate-linear in the second argument and evaluate as ``uᵀ M v̄``.
* A family ``S_1, …, S_t`` maps ℬ back to 𝒜: ``M_A = S_iᵀ M_B S_j`` for bilinear
  edges and ``M_A = S_iᵀ M_B conj(S_j)`` for sesquilinear ones, which is the
  matrix form of ``A(u, v) = B(S_i u, S_j v)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .linalg import as_complex_matrix, as_complex_vector, frozen, is_invertible, max_abs


class FormError(Exception):
    """Base class for form representation errors."""


class UnknownEdgeError(FormError):
    """Raised when an edge id is not part of the graph."""


class DimensionMismatchError(FormError):
    """Raised when vectors or matrices do not fit the dimension vector."""


class SingularTransformError(FormError):
    """Raised when a family member or basis matrix is numerically singular."""


class StructureMismatchError(FormError):
    """Raised when two representations do not share graph and dimensions."""


class EdgeKind(str, Enum):
    """Undirected edges carry bilinear forms, directed edges sesquilinear ones."""

    BILINEAR = "bilinear"
    SESQUILINEAR = "sesquilinear"


@dataclass(frozen=True)
class Edge:
    """One edge ``tail - head`` (undirected) or ``tail → head`` (vertices are 1-based)."""

    id: str
    tail: int
    head: int
    kind: EdgeKind

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", EdgeKind(self.kind))
        except ValueError as exc:
            raise FormError(f"Edge '{self.id}' has unknown kind {self.kind!r}.") from exc

    @property
    def is_loop(self) -> bool:
        return self.tail == self.head


@dataclass(frozen=True)
class MixedGraph:
    vertex_count: int
    edges: Tuple[Edge, ...] = ()

    def __post_init__(self) -> None:
        if self.vertex_count < 1:
            raise FormError("A mixed graph needs at least one vertex.")
        object.__setattr__(self, "edges", tuple(self.edges))
        seen = set()
        for edge in self.edges:
            if edge.id in seen:
                raise FormError(f"Duplicate edge id '{edge.id}'.")
            seen.add(edge.id)
            for endpoint in (edge.tail, edge.head):
                if not 1 <= endpoint <= self.vertex_count:
                    raise FormError(
                        f"Edge '{edge.id}' endpoint {endpoint} outside 1..{self.vertex_count}."
                    )

    def edge(self, edge_id: str) -> Edge:
        for edge in self.edges:
            if edge.id == edge_id:
                return edge
        raise UnknownEdgeError(f"Unknown edge id '{edge_id}'.")

    def edges_at(self, vertex: int) -> List[Edge]:
        return [edge for edge in self.edges if vertex in (edge.tail, edge.head)]

    @classmethod
    def single_loop(cls, kind: EdgeKind, edge_id: str = "alpha") -> "MixedGraph":
        return cls(1, (Edge(edge_id, 1, 1, kind),))

    @classmethod
    def example_two_vertex(cls) -> "MixedGraph":
        """Bilinear loop at 1, bilinear edge 1-2, sesquilinear 2→1, sesquilinear loop at 2."""

        return cls(
            2,
            (
                Edge("alpha", 1, 1, EdgeKind.BILINEAR),
                Edge("beta", 1, 2, EdgeKind.BILINEAR),
                Edge("gamma", 2, 1, EdgeKind.SESQUILINEAR),
                Edge("delta", 2, 2, EdgeKind.SESQUILINEAR),
            ),
        )


@dataclass(frozen=True)
class FormRepresentation:
    """A mixed graph with a space ℂ^{n_i} per vertex and one matrix per edge."""

    graph: MixedGraph
    dims: Tuple[int, ...]
    form_matrices: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        dims = tuple(int(n) for n in self.dims)
        if len(dims) != self.graph.vertex_count:
            raise DimensionMismatchError(
                f"Dimension vector has {len(dims)} entries for {self.graph.vertex_count} vertices."
            )
        if any(n < 0 for n in dims):
            raise DimensionMismatchError("Dimensions must be non-negative.")
        object.__setattr__(self, "dims", dims)

        ids = {edge.id for edge in self.graph.edges}
        extras = set(self.form_matrices) - ids
        if extras:
            raise UnknownEdgeError(f"Matrices given for unknown edges: {sorted(extras)}.")

        matrices: Dict[str, np.ndarray] = {}
        for edge in self.graph.edges:
            if edge.id not in self.form_matrices:
                raise DimensionMismatchError(f"No matrix supplied for edge '{edge.id}'.")
            shape = self.edge_shape(edge)
            try:
                matrix = as_complex_matrix(self.form_matrices[edge.id], *shape)
            except ValueError as exc:
                raise DimensionMismatchError(f"Edge '{edge.id}': {exc}") from exc
            if matrix.shape != shape:
                raise DimensionMismatchError(
                    f"Edge '{edge.id}' needs a {shape[0]}x{shape[1]} matrix, got {matrix.shape}."
                )
            matrices[edge.id] = frozen(matrix)
        object.__setattr__(self, "form_matrices", MappingProxyType(matrices))

    def edge_shape(self, edge: Edge) -> Tuple[int, int]:
        return self.dims[edge.tail - 1], self.dims[edge.head - 1]

    def matrix(self, edge_id: str) -> np.ndarray:
        self.graph.edge(edge_id)
        return self.form_matrices[edge_id]

    def with_matrices(self, matrices: Mapping[str, np.ndarray]) -> "FormRepresentation":
        return FormRepresentation(self.graph, self.dims, dict(matrices))

    @classmethod
    def single_form(cls, matrix, kind: EdgeKind, edge_id: str = "alpha") -> "FormRepresentation":
        matrix = as_complex_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatchError("A loop form needs a square matrix.")
        return cls(MixedGraph.single_loop(kind, edge_id), (matrix.shape[0],), {edge_id: matrix})


@dataclass(frozen=True)
class TransformFamily:
    """One square matrix per vertex, the linear bijections S_1, …, S_t."""

    matrices: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        checked = []
        for index, matrix in enumerate(self.matrices, start=1):
            matrix = as_complex_matrix(matrix, 0, 0)
            if matrix.shape[0] != matrix.shape[1]:
                raise DimensionMismatchError(f"Family member {index} is not square: {matrix.shape}.")
            checked.append(frozen(matrix))
        object.__setattr__(self, "matrices", tuple(checked))

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(matrix.shape[0] for matrix in self.matrices)

    @classmethod
    def identity(cls, dims: Iterable[int]) -> "TransformFamily":
        return cls(tuple(np.eye(n, dtype=np.complex128) for n in dims))


@dataclass
class VerificationReport:
    ok: bool
    max_residual: float
    worst_edge: Optional[str]
    residuals: Dict[str, float] = field(default_factory=dict)
    tol: float = 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "ok": self.ok,
            "max_residual": self.max_residual,
            "worst_edge": self.worst_edge,
            "tol": self.tol,
            "residuals": dict(self.residuals),
        }


def _second_argument(matrix: np.ndarray, kind: EdgeKind) -> np.ndarray:
    return matrix.conj() if kind is EdgeKind.SESQUILINEAR else matrix


def transform_matrix(matrix: np.ndarray, left: np.ndarray, right: np.ndarray, kind: EdgeKind) -> np.ndarray:
    """``leftᵀ · matrix · right`` with the right factor conjugated for sesquilinear kind."""

    return left.T @ matrix @ _second_argument(right, kind)


def eval_form(rep: FormRepresentation, edge_id: str, u, v) -> complex:
    """Value A_α(u, v) of the form on edge α."""

    edge = rep.graph.edge(edge_id)
    rows, cols = rep.edge_shape(edge)
    try:
        u = as_complex_vector(u, rows)
        v = as_complex_vector(v, cols)
    except ValueError as exc:
        raise DimensionMismatchError(f"Edge '{edge_id}': {exc}") from exc
    return complex(u @ rep.form_matrices[edge_id] @ _second_argument(v, edge.kind))


def _check_family(dims: Sequence[int], family: TransformFamily) -> None:
    if family.dims != tuple(dims):
        raise DimensionMismatchError(
            f"Family sizes {family.dims} do not match dimensions {tuple(dims)}."
        )
    for index, matrix in enumerate(family.matrices, start=1):
        if not is_invertible(matrix):
            raise SingularTransformError(f"Family member {index} is numerically singular.")


def apply_transform(repB: FormRepresentation, family: TransformFamily) -> FormRepresentation:
    """Representation 𝒜 with ``A(u, v) = B(S_i u, S_j v)`` for every edge."""

    _check_family(repB.dims, family)
    matrices = {}
    for edge in repB.graph.edges:
        matrices[edge.id] = transform_matrix(
            repB.form_matrices[edge.id],
            family.matrices[edge.tail - 1],
            family.matrices[edge.head - 1],
            edge.kind,
        )
    return repB.with_matrices(matrices)


def check_same_structure(repA: FormRepresentation, repB: FormRepresentation) -> None:
    """Same vertex count, same edge list (ids, endpoints, kinds, order) and same dims."""

    if repA.graph != repB.graph:
        raise StructureMismatchError("Representations are defined on different graphs.")
    if repA.dims != repB.dims:
        raise StructureMismatchError(f"Dimension vectors differ: {repA.dims} vs {repB.dims}.")


def verify_linear_isomorphism(
    repA: FormRepresentation,
    repB: FormRepresentation,
    family: TransformFamily,
    tol: float,
) -> VerificationReport:
    """Check that ``family`` transforms 𝒜 to ℬ, reporting per-edge relative residuals."""

    if tol < 0:
        raise ValueError("Tolerance must be non-negative.")
    check_same_structure(repA, repB)
    _check_family(repB.dims, family)

    residuals: Dict[str, float] = {}
    worst_edge: Optional[str] = None
    worst = 0.0
    for edge in repA.graph.edges:
        target = repA.form_matrices[edge.id]
        image = transform_matrix(
            repB.form_matrices[edge.id],
            family.matrices[edge.tail - 1],
            family.matrices[edge.head - 1],
            edge.kind,
        )
        residual = max_abs(target - image) / max(1.0, max_abs(target))
        residuals[edge.id] = residual
        if worst_edge is None or residual > worst:
            worst, worst_edge = residual, edge.id

    ok = all(value <= tol for value in residuals.values())
    logging.debug("Verification max residual %.3e on edge %s (tol %.1e).", worst, worst_edge, tol)
    return VerificationReport(ok=ok, max_residual=worst, worst_edge=worst_edge, residuals=residuals, tol=tol)


def matrix_of_form_in_bases(rep: FormRepresentation, edge_id: str, basisU, basisV) -> np.ndarray:
    """Entry (k, l) is A_α(basisU[:, k], basisV[:, l])."""

    edge = rep.graph.edge(edge_id)
    rows, cols = rep.edge_shape(edge)
    basisU = as_complex_matrix(basisU, rows, rows)
    basisV = as_complex_matrix(basisV, cols, cols)
    if basisU.shape != (rows, rows) or basisV.shape != (cols, cols):
        raise DimensionMismatchError(
            f"Edge '{edge_id}' needs bases of sizes {rows} and {cols}, got {basisU.shape} and {basisV.shape}."
        )
    for name, basis in (("basisU", basisU), ("basisV", basisV)):
        if not is_invertible(basis):
            raise SingularTransformError(f"{name} is not a basis.")
    return transform_matrix(rep.form_matrices[edge_id], basisU, basisV, edge.kind)


def compose_families(outer: TransformFamily, inner: TransformFamily) -> TransformFamily:
    """Family equivalent to applying ``inner`` first and ``outer`` second."""

    if outer.dims != inner.dims:
        raise DimensionMismatchError(f"Cannot compose families of sizes {outer.dims} and {inner.dims}.")
    return TransformFamily(tuple(g @ f for f, g in zip(outer.matrices, inner.matrices)))


def invert_family(family: TransformFamily) -> TransformFamily:
    for index, matrix in enumerate(family.matrices, start=1):
        if not is_invertible(matrix):
            raise SingularTransformError(f"Family member {index} is numerically singular.")
    return TransformFamily(tuple(np.linalg.inv(matrix) if matrix.size else matrix for matrix in family.matrices))
