"""Canonical blocks of a single bilinear or sesquilinear form.

Block matrices follow the ``M[k, l] = A(e_k, e_l)`` convention of
:mod:`formrep.forms`:

* ``singular(n)``: the nilpotent Jordan block ``J_n(0)``.
* ``gamma(n)``: the matrix ``Γ_n`` with alternating signs on the anti-diagonal
  and the diagonal just below it; for sesquilinear forms it is scaled by a unit
  scalar ``λ``.
* ``hpair(n, μ)``: ``[[0, I_n], [J_n(μ), 0]]``.

A form is first split into a nonsingular part and singular blocks
(``regularize``). The nonsingular part is classified through the Jordan
structure of its cosquare ``M⁻ᵀM`` (``M⁻*M`` for sesquilinear forms).
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
from scipy.optimize import least_squares

from .config import CanonicalConfig
from .forms import EdgeKind, TransformFamily, transform_matrix
from .linalg import (
    INVERTIBILITY_THRESHOLD,
    RankAmbiguityError,
    as_complex_matrix,
    block_diag,
    condition_number,
    is_invertible,
    max_abs,
    null_basis,
    orthonormal_complement,
    singular_values,
)

FormKind = EdgeKind

_UNIT_TOL = 1e-9
_SENSITIVITY_SAFETY = 10.0
_MAX_RADIUS = 0.05
_CERTIFICATE_TOL = 1e-9


class CanonicalFormError(Exception):
    """Base class for canonical form errors."""


class IllConditionedError(CanonicalFormError):
    """Raised when a rank or eigenvalue decision cannot be made within tolerance."""


class PairingError(IllConditionedError):
    """Raised when cosquare eigenvalues cannot be paired into H blocks."""


class InvalidBlockError(CanonicalFormError, ValueError):
    """Raised for block parameters outside the canonical ranges."""


class SingularFormError(CanonicalFormError):
    """Raised when an operation needs a nonsingular form."""


class BlockVariant(str, Enum):
    SINGULAR = "singular"
    GAMMA = "gamma"
    HPAIR = "hpair"


_VARIANT_ORDER = {BlockVariant.SINGULAR: 0, BlockVariant.GAMMA: 1, BlockVariant.HPAIR: 2}


@dataclass(frozen=True)
class CanonicalBlock:
    """One direct summand. ``param`` is λ for sesquilinear Γ blocks and μ for H pairs."""

    variant: BlockVariant
    n: int
    param: Optional[complex] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", BlockVariant(self.variant))
        if int(self.n) < 1:
            raise InvalidBlockError(f"Block size must be positive, got {self.n}.")
        object.__setattr__(self, "n", int(self.n))
        if self.variant is BlockVariant.SINGULAR and self.param is not None:
            raise InvalidBlockError("Singular blocks carry no parameter.")
        if self.variant is BlockVariant.HPAIR and self.param is None:
            raise InvalidBlockError("H pairs need a parameter μ.")
        if self.param is not None:
            object.__setattr__(self, "param", complex(self.param))

    @classmethod
    def singular(cls, n: int) -> "CanonicalBlock":
        return cls(BlockVariant.SINGULAR, n)

    @classmethod
    def gamma(cls, n: int, lam: Optional[complex] = None) -> "CanonicalBlock":
        return cls(BlockVariant.GAMMA, n, lam)

    @classmethod
    def hpair(cls, n: int, mu: complex) -> "CanonicalBlock":
        return cls(BlockVariant.HPAIR, n, mu)

    @property
    def size(self) -> int:
        return 2 * self.n if self.variant is BlockVariant.HPAIR else self.n

    def to_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {"variant": self.variant.value, "n": self.n}
        if self.variant is BlockVariant.GAMMA and self.param is not None:
            data["lambda"] = [self.param.real, self.param.imag]
        if self.variant is BlockVariant.HPAIR:
            data["mu"] = [self.param.real, self.param.imag]
        return data


def normalize_mu(mu: complex, kind: FormKind) -> complex:
    """Representative of the H-pair parameter class.

    Bilinear: ``μ ~ μ⁻¹``, stored with ``|μ| ≥ 1`` and argument in ``[0, π]`` on
    the unit circle. Sesquilinear: ``μ ~ 1/conj(μ)``, stored with ``|μ| ≥ 1``.
    """

    mu = complex(mu)
    if mu == 0:
        raise InvalidBlockError("μ must be nonzero.")
    modulus = abs(mu)
    if FormKind(kind) is FormKind.SESQUILINEAR:
        return 1.0 / mu.conjugate() if modulus < 1.0 else mu
    if abs(modulus - 1.0) <= _UNIT_TOL:
        return mu.conjugate() if mu.imag < 0 else mu
    return 1.0 / mu if modulus < 1.0 else mu


def validate_block(block: CanonicalBlock, kind: FormKind) -> CanonicalBlock:
    """Check the kind-specific constraints and return the normalized block."""

    kind = FormKind(kind)
    if block.variant is BlockVariant.SINGULAR:
        return block
    if block.variant is BlockVariant.GAMMA:
        if kind is FormKind.BILINEAR:
            if block.param is not None and abs(block.param - 1.0) > _UNIT_TOL:
                raise InvalidBlockError("Bilinear Γ blocks carry no scalar.")
            return CanonicalBlock.gamma(block.n)
        lam = 1.0 + 0j if block.param is None else block.param
        if abs(abs(lam) - 1.0) > _UNIT_TOL:
            raise InvalidBlockError(f"λ must lie on the unit circle, got {lam}.")
        return CanonicalBlock.gamma(block.n, lam / abs(lam))

    mu = normalize_mu(block.param, kind)
    if kind is FormKind.BILINEAR:
        excluded = (-1.0) ** (block.n + 1)
        if abs(mu - excluded) <= _UNIT_TOL:
            raise InvalidBlockError(
                f"Bilinear H pair of half-size {block.n} cannot have μ = {excluded:+.0f}."
            )
    elif abs(mu) <= 1.0 + _UNIT_TOL:
        raise InvalidBlockError(f"Sesquilinear H pair needs |μ| > 1, got {mu}.")
    return CanonicalBlock.hpair(block.n, mu)


def _block_sort_key(block: CanonicalBlock) -> Tuple[int, int, float, float]:
    param = block.param if block.param is not None else 0j
    return (_VARIANT_ORDER[block.variant], block.n, param.real, param.imag)


@dataclass(frozen=True)
class CanonicalBlockMultiset:
    kind: FormKind
    blocks: Tuple[CanonicalBlock, ...] = ()

    def __post_init__(self) -> None:
        kind = FormKind(self.kind)
        object.__setattr__(self, "kind", kind)
        validated = [validate_block(block, kind) for block in self.blocks]
        object.__setattr__(self, "blocks", tuple(sorted(validated, key=_block_sort_key)))

    @property
    def total_size(self) -> int:
        return sum(block.size for block in self.blocks)

    @property
    def singular_sizes(self) -> List[int]:
        return [block.n for block in self.blocks if block.variant is BlockVariant.SINGULAR]

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind.value, "blocks": [block.to_dict() for block in self.blocks]}


# ---------------------------------------------------------------------------
# Block matrices


def jordan_block(n: int, eigenvalue: complex) -> np.ndarray:
    block = eigenvalue * np.eye(n, dtype=np.complex128)
    block += np.eye(n, k=1, dtype=np.complex128)
    return block


def gamma_matrix(n: int) -> np.ndarray:
    matrix = np.zeros((n, n), dtype=np.complex128)
    for row in range(n):
        sign = (-1.0) ** (n - row - 1)
        matrix[row, n - 1 - row] = sign
        if row >= 1:
            matrix[row, n - row] = sign
    return matrix


def canonical_block_matrix(block: CanonicalBlock, kind: FormKind) -> np.ndarray:
    block = validate_block(block, kind)
    n = block.n
    if block.variant is BlockVariant.SINGULAR:
        return jordan_block(n, 0.0)
    if block.variant is BlockVariant.GAMMA:
        matrix = gamma_matrix(n)
        return matrix * block.param if block.param is not None else matrix
    matrix = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    matrix[:n, n:] = np.eye(n)
    matrix[n:, :n] = jordan_block(n, block.param)
    return matrix


def assemble_canonical_matrix(blocks: CanonicalBlockMultiset) -> np.ndarray:
    """Direct sum of the block matrices in multiset order."""

    return block_diag(canonical_block_matrix(block, blocks.kind) for block in blocks.blocks)


# ---------------------------------------------------------------------------
# Regularization and cosquare


def _square(matrix) -> np.ndarray:
    matrix = as_complex_matrix(matrix, 0, 0)
    if matrix.shape[0] != matrix.shape[1]:
        raise CanonicalFormError(f"Form matrix must be square, got shape {matrix.shape}.")
    return matrix


def _second(matrix: np.ndarray, kind: FormKind) -> np.ndarray:
    return matrix.conj() if kind is FormKind.SESQUILINEAR else matrix


@dataclass
class RegularizationResult:
    """``regular = basisᵀ · M · basis`` (conjugated right factor for sesquilinear forms)."""

    regular: np.ndarray
    singular_sizes: List[int]
    basis: np.ndarray
    kernel_dims: List[int] = field(default_factory=list)
    coupling_ranks: List[int] = field(default_factory=list)


def regularize(M, kind: FormKind, cfg: Optional[CanonicalConfig] = None) -> RegularizationResult:
    """Split off the singular blocks of a form.

    Each pass takes the right kernel ``K`` of the current form, measures how
    ``K`` (in the first argument) couples to its orthogonal complement, and
    restricts the form to the part of the complement that ``K`` annihilates.
    Kernel dimensions ``r_j`` and coupling ranks ``a_j`` give
    ``r_j − a_j`` singular blocks of size ``2j + 1`` and ``a_j − r_{j+1}``
    of size ``2j + 2``.
    """

    cfg = cfg or CanonicalConfig()
    kind = FormKind(kind)
    matrix = _square(M)
    n = matrix.shape[0]
    scale = max(1.0, float(singular_values(matrix)[0])) if n else 1.0
    threshold, band = cfg.rank_threshold, cfg.ambiguity_band

    current = matrix
    basis = np.eye(n, dtype=np.complex128)
    kernel_dims: List[int] = []
    coupling_ranks: List[int] = []
    try:
        while True:
            size = current.shape[0]
            if size == 0:
                kernel_dims.append(0)
                break
            kernel = null_basis(current, threshold, band, scale)
            if kind is FormKind.SESQUILINEAR:
                kernel = kernel.conj()
            kernel_dims.append(kernel.shape[1])
            if kernel.shape[1] == 0:
                break
            complement = orthonormal_complement(kernel, size)
            coupling = kernel.T @ current @ _second(complement, kind)
            if kind is FormKind.SESQUILINEAR:
                coupling = coupling.conj()
            coords = null_basis(coupling, threshold, band, scale)
            coupling_ranks.append(complement.shape[1] - coords.shape[1])
            restriction = complement @ coords
            current = restriction.T @ current @ _second(restriction, kind)
            basis = basis @ restriction
    except RankAmbiguityError as exc:
        raise IllConditionedError(f"Rank decision during regularization is ambiguous: {exc}") from exc

    sizes: List[int] = []
    for step, rank in enumerate(coupling_ranks):
        odd = kernel_dims[step] - rank
        even = rank - kernel_dims[step + 1]
        if odd < 0 or even < 0:
            raise IllConditionedError(
                f"Inconsistent kernel sequence {kernel_dims} with coupling ranks {coupling_ranks}."
            )
        sizes.extend([2 * step + 1] * odd + [2 * step + 2] * even)

    logging.debug("Regularization kernels %s, couplings %s -> singular sizes %s.", kernel_dims, coupling_ranks, sizes)
    return RegularizationResult(
        regular=current,
        singular_sizes=sorted(sizes),
        basis=basis,
        kernel_dims=kernel_dims,
        coupling_ranks=coupling_ranks,
    )


def cosquare(M, kind: FormKind, threshold: float = INVERTIBILITY_THRESHOLD) -> np.ndarray:
    """``M⁻ᵀM`` for bilinear forms, ``M⁻*M`` for sesquilinear ones."""

    matrix = _square(M)
    if not is_invertible(matrix, threshold):
        raise SingularFormError("Cosquare needs a nonsingular form.")
    left = matrix.T if FormKind(kind) is FormKind.BILINEAR else matrix.conj().T
    return la.solve(left, matrix)


# ---------------------------------------------------------------------------
# Jordan structure


@dataclass
class EigenCluster:
    """Eigenvalues merged into one cluster with an orthonormal invariant basis."""

    eigenvalue: complex
    sizes: List[int]
    basis: np.ndarray
    restricted: np.ndarray

    @property
    def multiplicity(self) -> int:
        return sum(self.sizes)

    def rank_sequence(self) -> List[int]:
        """Ranks of ``(C − μI)^j`` restricted to the cluster, ``j = 0..max size``."""

        top = max(self.sizes) if self.sizes else 0
        return [sum(max(size - power, 0) for size in self.sizes) for power in range(top + 1)]


def _union_find_clusters(values: np.ndarray, radii: np.ndarray, param_tol: float) -> List[List[int]]:
    parent = list(range(len(values)))

    def find(index: int) -> int:
        while parent[index] != index:
            parent[index] = parent[parent[index]]
            index = parent[index]
        return index

    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            gap = abs(values[i] - values[j])
            scale = max(1.0, abs(values[i]), abs(values[j]))
            if gap <= param_tol * scale or gap <= 4.0 * max(radii[i], radii[j]):
                parent[find(i)] = find(j)

    groups: Dict[int, List[int]] = {}
    for index in range(len(values)):
        groups.setdefault(find(index), []).append(index)
    return list(groups.values())


def _jordan_sizes(nilpotent: np.ndarray, cfg: CanonicalConfig, scale: float) -> List[int]:
    """Jordan block sizes of a numerically nilpotent matrix via its Weyr staircase."""

    weyr: List[int] = []
    current = nilpotent
    while current.shape[0]:
        kernel = null_basis(current, cfg.rank_threshold, cfg.ambiguity_band, scale)
        if kernel.shape[1] == 0:
            raise IllConditionedError("Eigenvalue cluster does not collapse to a single eigenvalue.")
        weyr.append(kernel.shape[1])
        complement = orthonormal_complement(kernel, current.shape[0])
        current = complement.conj().T @ current @ complement

    if any(later > earlier for earlier, later in zip(weyr, weyr[1:])):
        raise IllConditionedError(f"Weyr characteristic {weyr} is not non-increasing.")
    sizes: List[int] = []
    for step, count in enumerate(weyr):
        following = weyr[step + 1] if step + 1 < len(weyr) else 0
        sizes.extend([step + 1] * (count - following))
    return sorted(sizes, reverse=True)


def jordan_structure(
    C,
    cfg: Optional[CanonicalConfig] = None,
    sensitivity: Optional[float] = None,
) -> List[EigenCluster]:
    """Cluster the eigenvalues of ``C`` and recover their Jordan block sizes.

    Two eigenvalues share a cluster when they are within ``param_tol`` relative
    distance or within their perturbation radii, estimated from the eigenvalue
    condition numbers times ``sensitivity`` (an absolute perturbation level of
    ``C``). Each cluster is moved to the top of a reordered complex Schur form.
    """

    cfg = cfg or CanonicalConfig()
    matrix = _square(C)
    size = matrix.shape[0]
    if size == 0:
        return []
    norm = max(1.0, float(singular_values(matrix)[0]))
    if sensitivity is None:
        sensitivity = _SENSITIVITY_SAFETY * np.finfo(float).eps * norm

    values, left, right = la.eig(matrix, left=True, right=True)
    radii = np.empty(size)
    for index in range(size):
        overlap = abs(np.vdot(left[:, index], right[:, index]))
        spread = np.linalg.norm(left[:, index]) * np.linalg.norm(right[:, index])
        kappa = spread / overlap if overlap > 0 else np.inf
        radii[index] = min(kappa * sensitivity, _MAX_RADIUS * max(1.0, abs(values[index])))

    clusters: List[EigenCluster] = []
    try:
        for members in _union_find_clusters(values, radii, cfg.param_tol):
            mean = complex(np.mean(values[members]))
            spread = max(abs(values[index] - mean) for index in members)
            reach = 1.5 * spread + cfg.param_tol * max(1.0, abs(mean))
            schur_form, schur_basis, selected = la.schur(
                matrix, output="complex", sort=lambda value, mean=mean, reach=reach: abs(value - mean) <= reach
            )
            if selected != len(members):
                raise IllConditionedError(
                    f"Eigenvalue cluster at {mean:.6g} has {len(members)} members but Schur reordering selected {selected}."
                )
            restricted = schur_form[:selected, :selected]
            nilpotent = restricted - mean * np.eye(selected)
            sizes = _jordan_sizes(nilpotent, cfg, norm)
            clusters.append(EigenCluster(mean, sizes, schur_basis[:, :selected], restricted))
    except RankAmbiguityError as exc:
        raise IllConditionedError(f"Jordan rank decision is ambiguous: {exc}") from exc

    clusters.sort(key=lambda cluster: (abs(cluster.eigenvalue), np.angle(cluster.eigenvalue)))
    logging.debug(
        "Cosquare clusters: %s",
        ", ".join(f"{cluster.eigenvalue:.6g}:{cluster.sizes}" for cluster in clusters),
    )
    return clusters


# ---------------------------------------------------------------------------
# Mapping eigenstructure to blocks


def _find_partner(
    clusters: Sequence[EigenCluster], used: List[bool], target: complex, cfg: CanonicalConfig
) -> int:
    best, best_gap = -1, np.inf
    for index, cluster in enumerate(clusters):
        if used[index]:
            continue
        gap = abs(cluster.eigenvalue - target)
        if gap < best_gap:
            best, best_gap = index, gap
    if best < 0 or best_gap > cfg.param_tol * max(1.0, abs(target)):
        raise PairingError(f"No cosquare eigenvalue pairs with {target:.6g}.")
    return best


def _paired_blocks(
    clusters: Sequence[EigenCluster],
    used: List[bool],
    index: int,
    target: complex,
    cfg: CanonicalConfig,
    kind: FormKind,
) -> List[CanonicalBlock]:
    cluster = clusters[index]
    partner_index = _find_partner(clusters, used, target, cfg)
    partner = clusters[partner_index]
    if sorted(cluster.sizes) != sorted(partner.sizes):
        raise PairingError(
            f"Jordan sizes {cluster.sizes} at {cluster.eigenvalue:.6g} do not match {partner.sizes} "
            f"at {partner.eigenvalue:.6g}."
        )
    used[partner_index] = True
    mirrored = 1.0 / partner.eigenvalue
    if kind is FormKind.SESQUILINEAR:
        mirrored = mirrored.conjugate()
    mu = 0.5 * (cluster.eigenvalue + mirrored)
    # A Jordan block at a self-paired eigenvalue splits by roughly the square root of the perturbation.
    radius = np.sqrt(cfg.param_tol) * max(1.0, abs(mu))
    if kind is FormKind.SESQUILINEAR:
        straddles = abs(abs(mu) - 1.0) <= radius
    else:
        straddles = min(abs(mu - 1.0), abs(mu + 1.0)) <= radius
    if straddles:
        raise IllConditionedError(
            f"Cosquare eigenvalues {cluster.eigenvalue:.9g} and {partner.eigenvalue:.9g} may be a split "
            "self-paired Jordan block."
        )
    return [CanonicalBlock.hpair(size, mu) for size in cluster.sizes]


def _sign_one_blocks(cluster: EigenCluster, sign: float) -> List[CanonicalBlock]:
    blocks: List[CanonicalBlock] = []
    for size, count in sorted(Counter(cluster.sizes).items()):
        if (-1.0) ** (size + 1) == sign:
            blocks.extend(CanonicalBlock.gamma(size) for _ in range(count))
            continue
        if count % 2:
            raise PairingError(
                f"{count} Jordan blocks of size {size} at eigenvalue {sign:+.0f} cannot be paired."
            )
        blocks.extend(CanonicalBlock.hpair(size, sign) for _ in range(count // 2))
    return blocks


def _bilinear_blocks(clusters: Sequence[EigenCluster], cfg: CanonicalConfig) -> List[CanonicalBlock]:
    used = [False] * len(clusters)
    blocks: List[CanonicalBlock] = []
    for index, cluster in enumerate(clusters):
        if used[index]:
            continue
        used[index] = True
        mu = cluster.eigenvalue
        for sign in (1.0, -1.0):
            if abs(mu - sign) <= cfg.param_tol:
                blocks.extend(_sign_one_blocks(cluster, sign))
                break
        else:
            blocks.extend(_paired_blocks(clusters, used, index, 1.0 / mu, cfg, FormKind.BILINEAR))
    return blocks


def _chain_inertia(
    form: np.ndarray,
    restricted: np.ndarray,
    eigenvalue: complex,
    sizes: Sequence[int],
    size: int,
    lam: complex,
    band: float,
) -> Tuple[int, int]:
    """Inertia of the Hermitian form induced on the tops of the Jordan chains of length ``size``.

    ``form`` is the sesquilinear form on cluster coordinates, ``restricted`` the
    cosquare on the same coordinates. The form ``F(x, N^{size-1} y) / lam`` with
    ``N = conj(restricted / eigenvalue) − I`` is Hermitian; its nonzero part has
    one dimension per Jordan block of length exactly ``size``.
    """

    dim = restricted.shape[0]
    count = sum(1 for value in sizes if value == size)
    shift = np.conj(restricted / eigenvalue) - np.eye(dim)
    kernel_dim = sum(min(value, size) for value in sizes)
    _, _, vh = la.svd(np.linalg.matrix_power(shift, size))
    chains = vh[dim - kernel_dim :].conj().T
    tops = np.linalg.matrix_power(shift, size - 1) @ chains
    hermitian = chains.T @ form @ tops.conj() / lam
    hermitian = 0.5 * (hermitian + hermitian.conj().T)
    values = la.eigvalsh(hermitian)
    order = np.argsort(-np.abs(values))
    chosen = values[order[:count]]
    smallest = float(np.min(np.abs(chosen)))
    if count < len(values) and smallest <= band * abs(values[order[count]]):
        raise IllConditionedError(
            f"Sign characteristic of size-{size} blocks at {eigenvalue:.6g} is ambiguous."
        )
    positive = int(np.count_nonzero(chosen > 0))
    return positive, count - positive


@lru_cache(maxsize=None)
def _reference_sign(size: int) -> float:
    """Sign of the chain-top form of ``Γ_size`` itself."""

    gamma = gamma_matrix(size)
    restricted = cosquare(gamma, FormKind.SESQUILINEAR)
    positive, _ = _chain_inertia(gamma, restricted, (-1.0) ** (size + 1), [size], size, 1.0, 1.0)
    return 1.0 if positive else -1.0


def _unit_circle_blocks(regular: np.ndarray, cluster: EigenCluster, cfg: CanonicalConfig) -> List[CanonicalBlock]:
    nu = cluster.eigenvalue / abs(cluster.eigenvalue)
    form = cluster.basis.conj().T @ regular @ cluster.basis
    blocks: List[CanonicalBlock] = []
    for size in sorted(set(cluster.sizes)):
        lam = complex(np.sqrt(nu * (-1.0) ** (size + 1)))
        lam /= abs(lam)
        positive, negative = _chain_inertia(
            form, cluster.restricted, cluster.eigenvalue, cluster.sizes, size, lam, cfg.ambiguity_band
        )
        reference = _reference_sign(size)
        blocks.extend(CanonicalBlock.gamma(size, reference * lam) for _ in range(positive))
        blocks.extend(CanonicalBlock.gamma(size, -reference * lam) for _ in range(negative))
    return blocks


def _sesquilinear_blocks(
    regular: np.ndarray, clusters: Sequence[EigenCluster], cfg: CanonicalConfig
) -> List[CanonicalBlock]:
    used = [False] * len(clusters)
    blocks: List[CanonicalBlock] = []
    for index, cluster in enumerate(clusters):
        if used[index]:
            continue
        mu = cluster.eigenvalue
        if abs(abs(mu) - 1.0) <= cfg.param_tol:
            used[index] = True
            blocks.extend(_unit_circle_blocks(regular, cluster, cfg))
        elif abs(mu) > 1.0:
            used[index] = True
            blocks.extend(
                _paired_blocks(clusters, used, index, 1.0 / mu.conjugate(), cfg, FormKind.SESQUILINEAR)
            )
    if not all(used):
        leftover = [f"{clusters[i].eigenvalue:.6g}" for i, flag in enumerate(used) if not flag]
        raise PairingError(f"Cosquare eigenvalues {', '.join(leftover)} have no partner outside the unit circle.")
    return blocks


def canonical_blocks(M, kind: FormKind, cfg: Optional[CanonicalConfig] = None) -> CanonicalBlockMultiset:
    """Canonical block multiset of a single form under congruence (*congruence)."""

    cfg = cfg or CanonicalConfig()
    kind = FormKind(kind)
    matrix = _square(M)
    reduction = regularize(matrix, kind, cfg)
    blocks = [CanonicalBlock.singular(size) for size in reduction.singular_sizes]

    regular = reduction.regular
    if regular.shape[0]:
        try:
            square = cosquare(regular, kind)
        except SingularFormError as exc:
            raise IllConditionedError("Regular part is numerically singular.") from exc
        norm = max(1.0, float(singular_values(square)[0]))
        sensitivity = _SENSITIVITY_SAFETY * np.finfo(float).eps * condition_number(regular) * norm
        clusters = jordan_structure(square, cfg, sensitivity)
        if kind is FormKind.BILINEAR:
            blocks.extend(_bilinear_blocks(clusters, cfg))
        else:
            blocks.extend(_sesquilinear_blocks(regular, clusters, cfg))

    try:
        result = CanonicalBlockMultiset(kind, tuple(blocks))
    except InvalidBlockError as exc:
        raise IllConditionedError(f"Recovered block is outside the canonical range: {exc}") from exc
    if result.total_size != matrix.shape[0]:
        raise IllConditionedError(
            f"Recovered blocks cover {result.total_size} dimensions of {matrix.shape[0]}."
        )
    logging.debug("Canonical blocks: %s", result.to_dict()["blocks"])
    return result


# ---------------------------------------------------------------------------
# Comparison


def _same_block(first: CanonicalBlock, second: CanonicalBlock, kind: FormKind, tol: float) -> bool:
    if first.variant is not second.variant or first.n != second.n:
        return False
    if first.param is None or second.param is None:
        return first.param is None and second.param is None
    candidates = [second.param]
    if kind is FormKind.BILINEAR and first.variant is BlockVariant.HPAIR:
        candidates.append(1.0 / second.param)
    return any(abs(first.param - value) <= tol * max(1.0, abs(first.param)) for value in candidates)


def blocks_match(first: CanonicalBlockMultiset, second: CanonicalBlockMultiset, tol: float = 1e-6) -> bool:
    """Multiset equality with parameter tolerance."""

    if first.kind is not second.kind or len(first.blocks) != len(second.blocks):
        return False
    remaining = list(second.blocks)
    for block in first.blocks:
        for index, candidate in enumerate(remaining):
            if _same_block(block, candidate, first.kind, tol):
                del remaining[index]
                break
        else:
            return False
    return True


@dataclass
class EquivalenceDecision:
    equivalent: bool
    first: Optional[CanonicalBlockMultiset] = None
    second: Optional[CanonicalBlockMultiset] = None
    certificate: Optional[TransformFamily] = None


def search_certificate(
    M1, M2, kind: FormKind, cfg: Optional[CanonicalConfig] = None, seed: int = 0
) -> Optional[TransformFamily]:
    """Look for an invertible ``S`` with ``M2 = Sᵀ M1 S`` (``S̄`` on the right for sesquilinear forms).

    Seeded Levenberg–Marquardt restarts over the real and imaginary parts of S.
    Returns None when no restart converges.
    """

    cfg = cfg or CanonicalConfig()
    kind = FormKind(kind)
    first, second = _square(M1), _square(M2)
    n = first.shape[0]
    if n == 0:
        return TransformFamily.identity((0,))
    tol = _CERTIFICATE_TOL * max(1.0, max_abs(second))

    def unpack(params: np.ndarray) -> np.ndarray:
        return (params[: n * n] + 1j * params[n * n :]).reshape(n, n)

    def residual(params: np.ndarray) -> np.ndarray:
        diff = transform_matrix(first, unpack(params), unpack(params), kind) - second
        return np.concatenate([diff.real.ravel(), diff.imag.ravel()])

    rng = np.random.default_rng(seed)
    for attempt in range(cfg.certificate_restarts):
        fit = least_squares(residual, rng.standard_normal(2 * n * n), method="lm", xtol=1e-15, ftol=1e-15)
        candidate = unpack(fit.x)
        if np.max(np.abs(fit.fun)) <= tol and is_invertible(candidate):
            logging.debug("Congruence certificate found on restart %d.", attempt + 1)
            return TransformFamily((candidate,))
    logging.warning("No congruence certificate found after %d restarts.", cfg.certificate_restarts)
    return None


def congruent_decision(
    M1,
    M2,
    kind: FormKind,
    cfg: Optional[CanonicalConfig] = None,
    certificate: bool = False,
    seed: int = 0,
) -> EquivalenceDecision:
    """Decide whether two single forms are congruent (*congruent)."""

    cfg = cfg or CanonicalConfig()
    kind = FormKind(kind)
    first, second = _square(M1), _square(M2)
    if first.shape != second.shape:
        return EquivalenceDecision(False)
    blocks_first = canonical_blocks(first, kind, cfg)
    blocks_second = canonical_blocks(second, kind, cfg)
    equivalent = blocks_match(blocks_first, blocks_second, cfg.param_tol)
    decision = EquivalenceDecision(equivalent, blocks_first, blocks_second)
    if equivalent and certificate:
        if first.shape[0] <= cfg.certificate_max_dim:
            decision.certificate = search_certificate(first, second, kind, cfg, seed)
        else:
            logging.info(
                "Skipping certificate search: dimension %d exceeds %d.", first.shape[0], cfg.certificate_max_dim
            )
    return decision
