"""Seeded test inputs: random forms and transforms, canonical samples and nonlinear witnesses.

Oracle specs use a small grammar shared with the command line::

    linear:<matrix-file>
    radial:<c>:<p>
    shear:<vector-file>:<g-name>
    compose:[spec,spec,...]

``compose:[f,g,h]`` is ``f ∘ g ∘ h``: ``h`` is applied first.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la
from scipy.optimize import brentq

from .canonical import BlockVariant, CanonicalBlock, CanonicalBlockMultiset, FormKind
from .config import GeneratorConfig
from .forms import (
    DimensionMismatchError,
    EdgeKind,
    FormRepresentation,
    MixedGraph,
    TransformFamily,
    apply_transform,
    eval_form,
    transform_matrix,
)
from .linalg import as_complex_matrix, as_complex_vector, is_invertible, max_abs, null_basis, random_complex, random_unitary
from .linearize import HomeomorphismOracle, TopologicalIsomorphismWitness, linear_oracle


class GeneratorError(Exception):
    """Base class for generator errors."""


class OracleSpecError(GeneratorError, ValueError):
    """Raised for malformed or invalid oracle specs."""


class WitnessError(GeneratorError):
    """Raised when a form-preserving witness cannot be built or fails its check."""


# ---------------------------------------------------------------------------
# g functions for kernel shears


def _norm_squared(y: np.ndarray) -> float:
    return float(np.vdot(y, y).real)


def _g_sin(y: np.ndarray) -> complex:
    return math.sin(_norm_squared(y)) * (1 + 1j)


def _g_osc(y: np.ndarray) -> complex:
    radius = math.sqrt(_norm_squared(y))
    total = sum(0.5**j * math.cos(3.0**j * math.pi * radius) for j in range(8))
    return total * (0.5 - 0.5j)


def _g_ring(y: np.ndarray) -> complex:
    return math.sin(_norm_squared(y) - 1.0) * (1 + 1j)


def _g_fold(y: np.ndarray) -> complex:
    return -math.sqrt(2.0) * _norm_squared(y) + 0j


def _g_zero(y: np.ndarray) -> complex:
    return 0j


G_FUNCTIONS: Dict[str, Callable[[np.ndarray], complex]] = {
    "sin": _g_sin,
    "osc": _g_osc,
    "ring": _g_ring,
    "fold": _g_fold,
    "zero": _g_zero,
}


# ---------------------------------------------------------------------------
# Oracle specs


@dataclass(frozen=True)
class LinearSpec:
    matrix: np.ndarray
    source: Optional[str] = None

    def __post_init__(self) -> None:
        try:
            matrix = as_complex_matrix(self.matrix, 0, 0)
        except ValueError as exc:
            raise OracleSpecError(f"Linear oracle matrix is malformed: {exc}") from exc
        if not is_invertible(matrix):
            raise OracleSpecError("Linear oracle matrix must be square and invertible.")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> Optional[int]:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class RadialSpec:
    c: float
    p: float

    def __post_init__(self) -> None:
        if not (self.c > 0 and self.p > 0 and math.isfinite(self.c) and math.isfinite(self.p)):
            raise OracleSpecError(f"Radial oracle needs positive finite c and p, got c={self.c}, p={self.p}.")

    @property
    def dim(self) -> Optional[int]:
        return None


@dataclass(frozen=True)
class ShearSpec:
    direction: np.ndarray
    g: str = "sin"
    source: Optional[str] = None

    def __post_init__(self) -> None:
        direction = as_complex_vector(self.direction)
        if direction.shape[0] == 0 or not np.all(np.isfinite(direction)) or np.linalg.norm(direction) == 0:
            raise OracleSpecError("Shear direction must be a nonzero finite vector.")
        if self.g not in G_FUNCTIONS:
            raise OracleSpecError(f"Unknown g function '{self.g}'; choose from {sorted(G_FUNCTIONS)}.")
        object.__setattr__(self, "direction", direction)

    @property
    def dim(self) -> Optional[int]:
        return self.direction.shape[0]


@dataclass(frozen=True)
class ComposeSpec:
    parts: Tuple["OracleSpec", ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        parts = tuple(self.parts)
        if not parts:
            raise OracleSpecError("compose needs at least one part.")
        dims = {part.dim for part in parts if part.dim is not None}
        if len(dims) > 1:
            raise OracleSpecError(f"compose parts disagree on dimension: {sorted(dims)}.")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self) -> Optional[int]:
        dims = [part.dim for part in self.parts if part.dim is not None]
        return dims[0] if dims else None


OracleSpec = Union[LinearSpec, RadialSpec, ShearSpec, ComposeSpec]


def _split_top_level(body: str) -> List[str]:
    parts, depth, start = [], 0, 0
    for index, char in enumerate(body):
        if char == "[":
            depth += 1
        elif char == "]":
            depth -= 1
            if depth < 0:
                raise OracleSpecError(f"Unbalanced brackets in '{body}'.")
        elif char == "," and depth == 0:
            parts.append(body[start:index])
            start = index + 1
    if depth != 0:
        raise OracleSpecError(f"Unbalanced brackets in '{body}'.")
    parts.append(body[start:])
    return [part.strip() for part in parts]


def parse_oracle_spec(
    text: str,
    load_matrix: Callable[[str], np.ndarray],
    load_vector: Callable[[str], np.ndarray],
) -> OracleSpec:
    """Parse one grammar term; file references go through the loader callables."""

    text = text.strip()
    head, sep, rest = text.partition(":")
    if not sep:
        raise OracleSpecError(f"Oracle spec '{text}' has no kind prefix.")
    if head == "linear":
        return LinearSpec(load_matrix(rest), source=rest)
    if head == "radial":
        values = rest.split(":")
        if len(values) != 2:
            raise OracleSpecError(f"radial expects radial:<c>:<p>, got '{text}'.")
        try:
            return RadialSpec(float(values[0]), float(values[1]))
        except ValueError as exc:
            raise OracleSpecError(f"radial parameters are not numbers: '{text}'.") from exc
    if head == "shear":
        path, sep, g_name = rest.rpartition(":")
        if not sep or not path:
            raise OracleSpecError(f"shear expects shear:<vector-file>:<g-name>, got '{text}'.")
        return ShearSpec(load_vector(path), g_name, source=path)
    if head == "compose":
        if not (rest.startswith("[") and rest.endswith("]")):
            raise OracleSpecError(f"compose expects compose:[...], got '{text}'.")
        return ComposeSpec(
            tuple(parse_oracle_spec(part, load_matrix, load_vector) for part in _split_top_level(rest[1:-1]))
        )
    raise OracleSpecError(f"Unknown oracle kind '{head}'.")


def format_oracle_spec(spec: OracleSpec) -> str:
    if isinstance(spec, LinearSpec):
        if spec.source is None:
            raise OracleSpecError("Linear spec has no file to refer to.")
        return f"linear:{spec.source}"
    if isinstance(spec, RadialSpec):
        return f"radial:{spec.c!r}:{spec.p!r}"
    if isinstance(spec, ShearSpec):
        if spec.source is None:
            raise OracleSpecError("Shear spec has no file to refer to.")
        return f"shear:{spec.source}:{spec.g}"
    return "compose:[" + ",".join(format_oracle_spec(part) for part in spec.parts) + "]"


def _radial_oracle(dim: int, c: float, p: float) -> HomeomorphismOracle:
    def forward(x: np.ndarray) -> np.ndarray:
        return x * (1.0 + c * np.linalg.norm(x) ** p)

    def inverse(y: np.ndarray) -> np.ndarray:
        target = float(np.linalg.norm(y))
        if target == 0.0:
            return np.array(y, dtype=np.complex128)
        # r·(1 + c·r^p) >= max(r, c·r^(p+1)) bounds the root.
        upper = min(target, (target / c) ** (1.0 / (p + 1.0)))
        radius = brentq(lambda r: r * (1.0 + c * r**p) - target, 0.0, upper, xtol=1e-12, maxiter=200)
        return y * (radius / target)

    return HomeomorphismOracle(dim, forward, inverse, f"radial:{c!r}:{p!r}")


def _shear_oracle(direction: np.ndarray, g_name: str) -> HomeomorphismOracle:
    k = direction / np.linalg.norm(direction)
    g = G_FUNCTIONS[g_name]

    def project(x: np.ndarray) -> np.ndarray:
        return x - np.vdot(k, x) * k

    # π(x + t·k) = π(x), so subtracting the same shift inverts exactly.
    def forward(x: np.ndarray) -> np.ndarray:
        return x + g(project(x)) * k

    def inverse(y: np.ndarray) -> np.ndarray:
        return y - g(project(y)) * k

    return HomeomorphismOracle(k.shape[0], forward, inverse, f"shear:{g_name}")


def _compose_oracles(dim: int, parts: Sequence[HomeomorphismOracle]) -> HomeomorphismOracle:
    def forward(x: np.ndarray) -> np.ndarray:
        for part in reversed(parts):
            x = part.apply(x)
        return x

    def inverse(y: np.ndarray) -> np.ndarray:
        for part in parts:
            y = part.pull_back(y)
        return y

    return HomeomorphismOracle(dim, forward, inverse, "compose[" + ",".join(part.name for part in parts) + "]")


def make_oracle(spec: OracleSpec, dim: Optional[int] = None) -> HomeomorphismOracle:
    """Build a forward/inverse pair from a spec. ``dim`` is needed only for a bare radial spec."""

    if spec.dim is not None:
        if dim is not None and dim != spec.dim:
            raise OracleSpecError(f"Oracle spec has dimension {spec.dim}, expected {dim}.")
        dim = spec.dim
    if dim is None:
        raise OracleSpecError("Cannot infer the oracle dimension from a radial-only spec.")

    if isinstance(spec, LinearSpec):
        return linear_oracle(spec.matrix)
    if isinstance(spec, RadialSpec):
        return _radial_oracle(dim, spec.c, spec.p)
    if isinstance(spec, ShearSpec):
        return _shear_oracle(spec.direction, spec.g)
    return _compose_oracles(dim, [make_oracle(part, dim) for part in spec.parts])


def fold_spec(n: int, seed: int) -> ComposeSpec:
    """``linear(L) ∘ shear((e₁+e₂)/√2, fold)``: maps e₁ and e₂ to opposite images.

    The first two standard basis vectors therefore never extend a basis directly.
    """

    if n < 2:
        raise OracleSpecError("fold_spec needs dimension >= 2.")
    direction = np.zeros(n, dtype=np.complex128)
    direction[:2] = 1.0 / math.sqrt(2.0)
    return ComposeSpec((LinearSpec(random_invertible(n, 10.0, seed)), ShearSpec(direction, "fold")))


# ---------------------------------------------------------------------------
# Random forms and transforms


def random_invertible(n: int, cond_max: float, seed: int) -> np.ndarray:
    """``U · diag(s) · Vᴴ`` with unitary U, V and singular values in ``[1, cond_max]``."""

    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    rng = np.random.default_rng(seed)
    singular = float(cond_max) ** rng.uniform(0.0, 1.0, n)
    return random_unitary(rng, n) @ np.diag(singular) @ random_unitary(rng, n).conj().T


def random_representation(graph: MixedGraph, dims: Sequence[int], seed: int) -> FormRepresentation:
    dims = tuple(int(n) for n in dims)
    if len(dims) != graph.vertex_count or any(n < 0 for n in dims):
        raise DimensionMismatchError(
            f"Dimensions {list(dims)} do not fit a graph with {graph.vertex_count} vertices."
        )
    rng = np.random.default_rng(seed)
    matrices = {
        edge.id: random_complex(rng, (dims[edge.tail - 1], dims[edge.head - 1])) for edge in graph.edges
    }
    return FormRepresentation(graph, dims, matrices)


def random_degenerate_representation(
    graph: MixedGraph,
    dims: Sequence[int],
    seed: int,
    kernel_dims: Optional[Sequence[int]] = None,
) -> FormRepresentation:
    """Random representation whose forms vanish on a random joint-kernel subspace per vertex.

    Each matrix is replaced by ``Π_tailᵀ · M · Π_head`` (``conj(Π_head)`` for
    sesquilinear edges) where ``Π_i`` projects away from the chosen kernel at
    vertex i. ``kernel_dims`` defaults to one direction per nonzero space.
    """

    base = random_representation(graph, dims, seed)
    dims = base.dims
    if kernel_dims is None:
        kernel_dims = [1 if n else 0 for n in dims]
    if len(kernel_dims) != len(dims) or any(not 0 <= k <= n for k, n in zip(kernel_dims, dims)):
        raise GeneratorError(f"kernel_dims {list(kernel_dims)} do not fit dims {list(dims)}.")

    rng = np.random.default_rng((seed, 1))
    projectors = []
    for n, k in zip(dims, kernel_dims):
        projector = np.eye(n, dtype=np.complex128)
        if k:
            kernel = la.orth(random_complex(rng, (n, k)))
            projector -= kernel @ kernel.conj().T
        projectors.append(projector)

    matrices = {
        edge.id: transform_matrix(
            base.matrix(edge.id), projectors[edge.tail - 1], projectors[edge.head - 1], edge.kind
        )
        for edge in graph.edges
    }
    return base.with_matrices(matrices)


def sample_canonical_multiset(total_size: int, kind: FormKind, seed: int) -> CanonicalBlockMultiset:
    """Random valid multiset of the given total size.

    Parameters stay away from exclusion boundaries: ``|μ| ∈ [1.2, 5]`` and λ
    uniform on the unit circle.
    """

    if total_size < 0:
        raise ValueError("total_size must be non-negative")
    kind = FormKind(kind)
    rng = np.random.default_rng(seed)
    blocks: List[CanonicalBlock] = []
    remaining = total_size
    while remaining:
        variants = [BlockVariant.SINGULAR, BlockVariant.GAMMA]
        if remaining >= 2:
            variants.append(BlockVariant.HPAIR)
        variant = variants[int(rng.integers(len(variants)))]
        if variant is BlockVariant.SINGULAR:
            n = int(rng.integers(1, min(3, remaining) + 1))
            blocks.append(CanonicalBlock.singular(n))
        elif variant is BlockVariant.GAMMA:
            n = int(rng.integers(1, min(4, remaining) + 1))
            lam = np.exp(2j * np.pi * rng.uniform()) if kind is FormKind.SESQUILINEAR else None
            blocks.append(CanonicalBlock.gamma(n, lam))
        else:
            n = int(rng.integers(1, min(2, remaining // 2) + 1))
            mu = rng.uniform(1.2, 5.0) * np.exp(2j * np.pi * rng.uniform())
            blocks.append(CanonicalBlock.hpair(n, mu))
        remaining -= blocks[-1].size
    return CanonicalBlockMultiset(kind, tuple(blocks))


# ---------------------------------------------------------------------------
# Form-preserving witnesses


@dataclass(frozen=True)
class WitnessBundle:
    """Two representations and a witness φ with ``A(u, v) = B(φ_i u, φ_j v)``."""

    repA: FormRepresentation
    repB: FormRepresentation
    linear_parts: TransformFamily
    specs: Tuple[OracleSpec, ...]
    witness: TopologicalIsomorphismWitness
    linear_only: Tuple[bool, ...]

    @property
    def nonlinear_vertices(self) -> List[int]:
        return [vertex for vertex, flag in enumerate(self.linear_only, start=1) if not flag]


def joint_kernel(rep: FormRepresentation, vertex: int, threshold: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the vectors k at ``vertex`` with ``B(k, ·) = 0`` and ``B(·, k) = 0`` on every edge."""

    n = rep.dims[vertex - 1]
    rows = []
    for edge in rep.graph.edges:
        matrix = rep.matrix(edge.id)
        if edge.tail == vertex:
            rows.append(matrix.T)
        if edge.head == vertex:
            rows.append(matrix.conj() if edge.kind is EdgeKind.SESQUILINEAR else matrix)
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    stacked = np.vstack(rows) if rows else np.zeros((0, n), dtype=np.complex128)
    return null_basis(stacked, threshold)


def check_witness(
    repA: FormRepresentation,
    repB: FormRepresentation,
    witness: TopologicalIsomorphismWitness,
    samples: int,
    tol: float,
    seed: int,
) -> float:
    """Sample ``A(u, v) = B(φ_i u, φ_j v)`` on every edge; return the worst relative error.

    Raises WitnessError when an edge exceeds ``tol``.
    """

    rng = np.random.default_rng(seed)
    worst = 0.0
    for edge in repA.graph.edges:
        rows, cols = repA.edge_shape(edge)
        if rows == 0 or cols == 0:
            continue
        left, right = witness.oracles[edge.tail - 1], witness.oracles[edge.head - 1]
        scale = max(1.0, max_abs(repB.matrix(edge.id)))
        for _ in range(samples):
            u, v = random_complex(rng, rows), random_complex(rng, cols)
            x, y = left(u), right(v)
            expected = eval_form(repA, edge.id, u, v)
            actual = eval_form(repB, edge.id, x, y)
            bound = max(1.0, abs(expected), scale * np.linalg.norm(x) * np.linalg.norm(y))
            error = abs(expected - actual) / bound
            worst = max(worst, error)
            if error > tol:
                raise WitnessError(f"Witness breaks edge '{edge.id}': relative error {error:.3e} > {tol:.1e}.")
    return worst


def form_preserving_witness(
    rep: FormRepresentation,
    seed: int,
    cfg: Optional[GeneratorConfig] = None,
    g: str = "sin",
    require_nonlinear: bool = False,
) -> WitnessBundle:
    """Build ``repA`` and homeomorphisms carrying it onto ``rep``.

    At a vertex whose forms share a joint kernel the oracle is
    ``shear(k, g) ∘ linear(L_i)``; when every form at the vertex is zero it is
    ``radial ∘ linear(L_i)``; otherwise it is ``linear(L_i)`` alone and the
    vertex is flagged linear-only. ``repA`` is ``rep`` transformed by the L_i.
    """

    cfg = cfg or GeneratorConfig()
    if g not in G_FUNCTIONS:
        raise OracleSpecError(f"Unknown g function '{g}'; choose from {sorted(G_FUNCTIONS)}.")
    rng = np.random.default_rng(seed)

    linear_parts, specs, flags = [], [], []
    for vertex, n in enumerate(rep.dims, start=1):
        matrix = random_invertible(n, cfg.witness_cond_max, int(rng.integers(2**32)))
        linear_parts.append(matrix)
        linear = LinearSpec(matrix)
        kernel = joint_kernel(rep, vertex, cfg.null_threshold)
        if n == 0:
            specs.append(linear)
            flags.append(True)
        elif kernel.shape[1] == n:
            radial = RadialSpec(float(rng.uniform(0.5, 2.0)), float(rng.choice([1.0, 2.0])))
            specs.append(ComposeSpec((radial, linear)))
            flags.append(False)
        elif kernel.shape[1]:
            direction = kernel @ random_complex(rng, kernel.shape[1])
            specs.append(ComposeSpec((ShearSpec(direction / np.linalg.norm(direction), g), linear)))
            flags.append(False)
        else:
            specs.append(linear)
            flags.append(True)

    if require_nonlinear and all(flags):
        raise WitnessError(
            "No vertex admits a nonlinear form-preserving shear: every form system is nondegenerate. "
            "Zero-pad the representation or use a degenerate one."
        )

    family = TransformFamily(tuple(linear_parts))
    repA = apply_transform(rep, family)
    witness = TopologicalIsomorphismWitness(
        tuple(make_oracle(spec, n) for spec, n in zip(specs, rep.dims))
    )
    worst = check_witness(repA, rep, witness, cfg.witness_samples, cfg.witness_tol, seed)
    logging.debug(
        "Witness for dims %s: nonlinear at vertices %s, sampled error %.3e.",
        rep.dims,
        [vertex for vertex, flag in enumerate(flags, start=1) if not flag],
        worst,
    )
    return WitnessBundle(repA, rep, family, tuple(specs), witness, tuple(flags))
