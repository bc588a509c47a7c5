"""Linearization of topological isomorphisms given by homeomorphism oracles.

A homeomorphism φ of ℂⁿ is only available through ``forward`` and ``inverse``
callables. ``extract_basis_pair`` builds bases ``u_1..u_n`` and ``v_k = φ(u_k)``
by extending one vector at a time; when the image of a candidate falls into the
span of the accepted images, it walks along ``v + a·w`` (``w`` orthogonal to the
accepted images) and pulls the point back through φ⁻¹ until both sets are
independent again.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from .config import LinearizeConfig
from .forms import (
    DimensionMismatchError,
    FormRepresentation,
    TransformFamily,
    VerificationReport,
    check_same_structure,
    verify_linear_isomorphism,
)
from .linalg import (
    as_complex_matrix,
    as_complex_vector,
    column_independence,
    condition_number,
    is_invertible,
    orthonormal_complement,
    random_complex,
)

VectorMap = Callable[[np.ndarray], np.ndarray]

_PHASES = (1.0, 1j, -1.0, -1j)
_MIN_DIRECTION_NORM = 1e-12


class LinearizationError(Exception):
    """Base class for linearization failures."""


class OracleRoundTripError(LinearizationError):
    """Raised when forward and inverse of an oracle do not undo each other."""


class BasisExtractionError(LinearizationError):
    """Raised when no candidate or perturbation yields an independent extension."""

    def __init__(self, message: str, best_singular_value: float = 0.0, step: int = 0) -> None:
        super().__init__(message)
        self.best_singular_value = best_singular_value
        self.step = step


@dataclass(frozen=True)
class HomeomorphismOracle:
    """Black-box continuous bijection of ℂⁿ with its inverse."""

    dim: int
    forward: VectorMap
    inverse: VectorMap
    name: str = "oracle"

    def __call__(self, x) -> np.ndarray:
        return self.apply(x)

    def apply(self, x) -> np.ndarray:
        return as_complex_vector(self.forward(as_complex_vector(x, self.dim)), self.dim)

    def pull_back(self, y) -> np.ndarray:
        return as_complex_vector(self.inverse(as_complex_vector(y, self.dim)), self.dim)


@dataclass(frozen=True)
class TopologicalIsomorphismWitness:
    oracles: Tuple[HomeomorphismOracle, ...]

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(oracle.dim for oracle in self.oracles)


@dataclass
class ExtractionTrace:
    """Counters describing how a basis pair was found."""

    candidates_tried: int = 0
    random_candidates: int = 0
    perturbation_steps: int = 0
    magnitudes_tried: int = 0
    accepted_magnitudes: List[float] = field(default_factory=list)


@dataclass
class BasisPair:
    U: np.ndarray
    V: np.ndarray
    trace: ExtractionTrace = field(default_factory=ExtractionTrace)

    @property
    def condition_numbers(self) -> Tuple[float, float]:
        return condition_number(self.U), condition_number(self.V)

    def to_dict(self) -> dict:
        cond_u, cond_v = self.condition_numbers
        return {
            "cond_U": cond_u,
            "cond_V": cond_v,
            "candidates_tried": self.trace.candidates_tried,
            "perturbation_steps": self.trace.perturbation_steps,
        }


@dataclass
class OracleSelfTestReport:
    ok: bool
    max_roundtrip_error: float
    trials: int
    failure: Optional[str] = None


@dataclass
class LinearizationResult:
    family: TransformFamily
    report: VerificationReport
    basis_pairs: List[BasisPair]

    @property
    def ok(self) -> bool:
        return self.report.ok


def linear_oracle(matrix, name: str = "linear") -> HomeomorphismOracle:
    """Wrap an invertible matrix as an opaque oracle."""

    matrix = as_complex_matrix(matrix, 0, 0)
    if not is_invertible(matrix):
        raise LinearizationError("A linear oracle needs an invertible matrix.")
    n = matrix.shape[0]
    if n == 0:
        return HomeomorphismOracle(0, lambda x: x, lambda y: y, name)
    factors = la.lu_factor(matrix)
    return HomeomorphismOracle(
        n,
        lambda x: matrix @ x,
        lambda y: la.lu_solve(factors, y),
        name,
    )


def oracles_from_family(family: TransformFamily) -> TopologicalIsomorphismWitness:
    """A linear isomorphism, viewed as a topological one."""

    return TopologicalIsomorphismWitness(
        tuple(linear_oracle(matrix, f"linear[{i}]") for i, matrix in enumerate(family.matrices, start=1))
    )


def oracle_self_test(phi: HomeomorphismOracle, trials: int, seed: int, tol: float = 1e-8) -> OracleSelfTestReport:
    """Check inverse∘forward and forward∘inverse on seeded random points."""

    if trials < 1:
        raise ValueError("trials must be >= 1")
    if phi.dim == 0:
        return OracleSelfTestReport(ok=True, max_roundtrip_error=0.0, trials=trials)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for trial in range(trials):
        # Spread the sample radii over several orders of magnitude.
        scale = 10.0 ** rng.uniform(-2, 2)
        x = scale * random_complex(rng, phi.dim)
        try:
            there = np.linalg.norm(phi.pull_back(phi.apply(x)) - x) / max(1.0, np.linalg.norm(x))
            back = np.linalg.norm(phi.apply(phi.pull_back(x)) - x) / max(1.0, np.linalg.norm(x))
        except Exception as exc:  # noqa: BLE001
            return OracleSelfTestReport(
                ok=False, max_roundtrip_error=float("inf"), trials=trial + 1, failure=str(exc)
            )
        error = float(max(there, back))
        if not np.isfinite(error):
            return OracleSelfTestReport(
                ok=False, max_roundtrip_error=float("inf"), trials=trial + 1, failure="non-finite value"
            )
        worst = max(worst, error)
    return OracleSelfTestReport(ok=worst <= tol, max_roundtrip_error=worst, trials=trials)


def _candidates(n: int, rng: np.random.Generator, budget: int) -> Iterator[Tuple[np.ndarray, bool]]:
    """Standard basis vectors in index order, then seeded random unit vectors."""

    for index in range(min(n, budget)):
        vector = np.zeros(n, dtype=np.complex128)
        vector[index] = 1.0
        yield vector, False
    for _ in range(max(0, budget - n)):
        vector = random_complex(rng, n)
        yield vector / np.linalg.norm(vector), True


def _orthogonal_direction(accepted_v: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit vector orthogonal to the accepted images, from a seeded random remainder."""

    if accepted_v.shape[1] == 0:
        basis = np.zeros((n, 0), dtype=np.complex128)
    else:
        basis = la.orth(accepted_v)
    for _ in range(100):
        draw = random_complex(rng, n)
        remainder = draw - basis @ (basis.conj().T @ draw)
        norm = np.linalg.norm(remainder)
        if norm >= _MIN_DIRECTION_NORM * max(1.0, np.linalg.norm(draw)):
            return remainder / norm
    complement = orthonormal_complement(basis, n)
    return complement[:, 0]


def _independent(columns: List[np.ndarray], threshold: float) -> Tuple[bool, float]:
    measure = column_independence(np.column_stack(columns))
    return measure > threshold, measure


def extract_basis_pair(phi: HomeomorphismOracle, cfg: LinearizeConfig, seed: int) -> BasisPair:
    """Bases U, V of ℂⁿ with ``V[:, k] = φ(U[:, k])``."""

    n = phi.dim
    trace = ExtractionTrace()
    if n == 0:
        empty = np.zeros((0, 0), dtype=np.complex128)
        return BasisPair(empty, empty, trace)

    self_test = oracle_self_test(phi, cfg.self_test_trials, seed, cfg.oracle_roundtrip_tol)
    if not self_test.ok:
        raise OracleRoundTripError(
            f"Oracle '{phi.name}' failed the round-trip self-test "
            f"(error {self_test.max_roundtrip_error:.3e}, {self_test.failure or 'tolerance exceeded'})."
        )

    rng = np.random.default_rng(seed)
    threshold = cfg.basis_rank_threshold
    us: List[np.ndarray] = []
    vs: List[np.ndarray] = []

    while len(us) < n:
        step = len(us) + 1
        best = 0.0
        accepted = False
        for candidate, is_random in _candidates(n, rng, cfg.candidate_budget(n)):
            ok_u, _ = _independent(us + [candidate], threshold)
            if not ok_u:
                continue
            trace.candidates_tried += 1
            trace.random_candidates += int(is_random)

            image = phi.apply(candidate)
            ok_v, measure = _independent(vs + [image], threshold)
            best = max(best, measure)
            if ok_v:
                us.append(candidate)
                vs.append(image)
                accepted = True
                logging.debug("Step %d: accepted candidate directly (independence %.3e).", step, measure)
                break

            trace.perturbation_steps += 1
            result = _perturb(phi, us, vs, image, cfg, rng, trace)
            if result is not None:
                u_b, v_b, magnitude = result
                us.append(u_b)
                vs.append(v_b)
                trace.accepted_magnitudes.append(magnitude)
                accepted = True
                logging.debug("Step %d: accepted perturbed candidate at |b|=%.3e.", step, magnitude)
                break
        if not accepted:
            raise BasisExtractionError(
                f"Oracle '{phi.name}': no independent extension at step {step} of {n} "
                f"(best independence {best:.3e}, threshold {threshold:.1e}).",
                best_singular_value=best,
                step=step,
            )

    U = np.column_stack(us)
    V = np.column_stack(vs)
    final_u, final_v = column_independence(U), column_independence(V)
    if min(final_u, final_v) <= threshold:
        raise BasisExtractionError(
            f"Oracle '{phi.name}': extracted bases are not independent ({final_u:.3e}, {final_v:.3e}).",
            best_singular_value=min(final_u, final_v),
            step=n,
        )
    return BasisPair(U, V, trace)


def _perturb(
    phi: HomeomorphismOracle,
    us: List[np.ndarray],
    vs: List[np.ndarray],
    image: np.ndarray,
    cfg: LinearizeConfig,
    rng: np.random.Generator,
    trace: ExtractionTrace,
) -> Optional[Tuple[np.ndarray, np.ndarray, float]]:
    """Search ``u(a) = φ⁻¹(v + a·w)`` over halving magnitudes and four phases."""

    n = phi.dim
    threshold = cfg.basis_rank_threshold
    accepted_v = np.column_stack(vs) if vs else np.zeros((n, 0), dtype=np.complex128)
    w = _orthogonal_direction(accepted_v, n, rng)
    magnitude = max(1.0, float(np.linalg.norm(image)))

    for _ in range(cfg.halvings):
        for phase in _PHASES:
            trace.magnitudes_tried += 1
            target = image + magnitude * phase * w
            ok_target, _ = _independent(vs + [target], threshold)
            if not ok_target:
                continue
            try:
                u_a = phi.pull_back(target)
            except Exception as exc:  # noqa: BLE001
                logging.debug("Oracle inverse failed at |a|=%.3e: %s", magnitude, exc)
                continue
            ok_u, _ = _independent(us + [u_a], threshold)
            if not ok_u:
                continue
            # Store φ(u(a)) itself, not the target, so V stays the exact image of U.
            v_a = phi.apply(u_a)
            ok_v, _ = _independent(vs + [v_a], threshold)
            if not ok_v:
                continue
            return u_a, v_a, magnitude
        magnitude /= 2.0
    return None


def _extract_all(
    witness: TopologicalIsomorphismWitness, cfg: LinearizeConfig, seed: int
) -> List[BasisPair]:
    seeds = np.random.SeedSequence(seed).spawn(len(witness.oracles))
    vertex_seeds = [int(s.generate_state(1)[0]) for s in seeds]

    if cfg.parallel_vertices and len(witness.oracles) > 1:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
            futures = [
                pool.submit(extract_basis_pair, oracle, cfg, vertex_seed)
                for oracle, vertex_seed in zip(witness.oracles, vertex_seeds)
            ]
            return [future.result() for future in futures]
    return [
        extract_basis_pair(oracle, cfg, vertex_seed)
        for oracle, vertex_seed in zip(witness.oracles, vertex_seeds)
    ]


def family_from_basis_pairs(pairs: Sequence[BasisPair]) -> TransformFamily:
    """S_i with ``S_i U_i = V_i``, solved as ``U_iᵀ S_iᵀ = V_iᵀ``."""

    matrices = []
    for pair in pairs:
        if pair.U.shape[0] == 0:
            matrices.append(np.zeros((0, 0), dtype=np.complex128))
            continue
        matrices.append(la.solve(pair.U.T, pair.V.T).T)
    return TransformFamily(tuple(matrices))


def linearize_topological_isomorphism(
    repA: FormRepresentation,
    repB: FormRepresentation,
    witness: TopologicalIsomorphismWitness,
    cfg: LinearizeConfig,
    seed: int,
) -> LinearizationResult:
    """Turn homeomorphisms transforming 𝒜 to ℬ into linear bijections doing the same."""

    check_same_structure(repA, repB)
    if witness.dims != repA.dims:
        raise DimensionMismatchError(
            f"Witness dimensions {witness.dims} do not match representation dimensions {repA.dims}."
        )

    pairs = _extract_all(witness, cfg, seed)
    family = family_from_basis_pairs(pairs)
    report = verify_linear_isomorphism(repA, repB, family, cfg.residual_tol)
    if report.ok:
        logging.info("Linearized family verifies (max residual %.3e).", report.max_residual)
    else:
        logging.warning(
            "Linearized family fails verification: residual %.3e on edge %s.",
            report.max_residual,
            report.worst_edge,
        )
    return LinearizationResult(family=family, report=report, basis_pairs=pairs)
