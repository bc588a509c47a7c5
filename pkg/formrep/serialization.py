"""JSON file formats.

Every file carries ``"schema": "formrep/1"``. Complex numbers are ``[re, im]``
pairs, matrices are rows of pairs and floats are written in shortest
round-trip form, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .canonical import BlockVariant, CanonicalBlock, CanonicalBlockMultiset, CanonicalFormError, FormKind
from .forms import Edge, EdgeKind, FormError, FormRepresentation, MixedGraph, TransformFamily
from .generators import (
    ComposeSpec,
    LinearSpec,
    OracleSpec,
    ShearSpec,
    WitnessBundle,
    format_oracle_spec,
    make_oracle,
    parse_oracle_spec,
)
from .linearize import TopologicalIsomorphismWitness

SCHEMA = "formrep/1"

PathLike = Union[str, Path]


class FormatError(ValueError):
    """Raised when a file cannot be read or does not follow the expected format."""


# ---------------------------------------------------------------------------
# JSON plumbing


def dumps(payload: Mapping[str, Any]) -> str:
    document = {"schema": SCHEMA}
    document.update(payload)
    return json.dumps(document, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(payload: Mapping[str, Any], path: Optional[PathLike] = None) -> None:
    """Write to ``path``, or to stdout when no path is given."""

    text = dumps(payload)
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")


def load_json(path: PathLike) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise FormatError(f"Cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise FormatError(f"{path} must contain a JSON object.")
    schema = data.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise FormatError(f"{path} uses schema '{schema}', expected '{SCHEMA}'.")
    return data


def _field(data: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in data:
        raise FormatError(f"{where} is missing '{key}'.")
    return data[key]


# ---------------------------------------------------------------------------
# Numbers, vectors, matrices


def complex_to_json(value: complex) -> List[float]:
    value = complex(value)
    return [float(value.real), float(value.imag)]


def complex_from_json(data: Any) -> complex:
    if not isinstance(data, (list, tuple)) or len(data) != 2:
        raise FormatError(f"Complex numbers are [re, im] pairs, got {data!r}.")
    try:
        value = complex(float(data[0]), float(data[1]))
    except (TypeError, ValueError) as exc:
        raise FormatError(f"Complex entry {data!r} is not numeric.") from exc
    if not np.isfinite(value):
        raise FormatError(f"Complex entry {data!r} is not finite.")
    return value


def matrix_to_json(matrix: np.ndarray) -> List[List[List[float]]]:
    return [[complex_to_json(entry) for entry in row] for row in np.asarray(matrix)]


def matrix_from_json(data: Any, shape: Optional[Tuple[int, int]] = None) -> np.ndarray:
    if not isinstance(data, list):
        raise FormatError("A matrix is a list of rows.")
    if shape is not None and shape[0] * shape[1] == 0:
        if len(data) not in (0, shape[0]) or any(row for row in data):
            raise FormatError(f"Expected an empty {shape[0]}x{shape[1]} matrix.")
        return np.zeros(shape, dtype=np.complex128)
    rows = []
    for row in data:
        if not isinstance(row, list):
            raise FormatError("Matrix rows must be lists of [re, im] pairs.")
        rows.append([complex_from_json(entry) for entry in row])
    if len({len(row) for row in rows}) > 1:
        raise FormatError("Matrix rows have different lengths.")
    matrix = np.array(rows, dtype=np.complex128).reshape(len(rows), len(rows[0]) if rows else 0)
    if shape is not None and matrix.shape != tuple(shape):
        raise FormatError(f"Matrix has shape {matrix.shape}, expected {tuple(shape)}.")
    return matrix


def write_matrix(matrix: np.ndarray, path: Optional[PathLike] = None) -> None:
    matrix = np.asarray(matrix, dtype=np.complex128)
    write_json({"rows": matrix.shape[0], "cols": matrix.shape[1], "matrix": matrix_to_json(matrix)}, path)


def read_matrix(path: PathLike) -> np.ndarray:
    data = load_json(path)
    shape = None
    if "rows" in data and "cols" in data:
        shape = (int(data["rows"]), int(data["cols"]))
    return matrix_from_json(_field(data, "matrix", str(path)), shape)


def write_vector(vector: np.ndarray, path: Optional[PathLike] = None) -> None:
    write_json({"vector": [complex_to_json(entry) for entry in np.asarray(vector).reshape(-1)]}, path)


def read_vector(path: PathLike) -> np.ndarray:
    data = _field(load_json(path), "vector", str(path))
    if not isinstance(data, list):
        raise FormatError(f"{path}: 'vector' must be a list of [re, im] pairs.")
    return np.array([complex_from_json(entry) for entry in data], dtype=np.complex128)


# ---------------------------------------------------------------------------
# Representations and families


def representation_to_dict(rep: FormRepresentation) -> Dict[str, Any]:
    return {
        "vertices": list(rep.dims),
        "edges": [
            {
                "id": edge.id,
                "tail": edge.tail,
                "head": edge.head,
                "kind": edge.kind.value,
                "matrix": matrix_to_json(rep.matrix(edge.id)),
            }
            for edge in rep.graph.edges
        ],
    }


def representation_from_dict(data: Mapping[str, Any], where: str = "representation") -> FormRepresentation:
    try:
        dims = tuple(int(n) for n in _field(data, "vertices", where))
        edges, matrices = [], {}
        for entry in _field(data, "edges", where):
            edge = Edge(
                str(_field(entry, "id", where)),
                int(_field(entry, "tail", where)),
                int(_field(entry, "head", where)),
                EdgeKind(_field(entry, "kind", where)),
            )
            edges.append(edge)
            shape = None
            if 1 <= edge.tail <= len(dims) and 1 <= edge.head <= len(dims):
                shape = (dims[edge.tail - 1], dims[edge.head - 1])
            matrices[edge.id] = matrix_from_json(_field(entry, "matrix", where), shape)
        graph = MixedGraph(len(dims), tuple(edges))
        return FormRepresentation(graph, dims, matrices)
    except FormatError:
        raise
    except (FormError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


def write_representation(rep: FormRepresentation, path: Optional[PathLike] = None) -> None:
    write_json(representation_to_dict(rep), path)


def read_representation(path: PathLike) -> FormRepresentation:
    return representation_from_dict(load_json(path), str(path))


def family_to_dict(family: TransformFamily) -> Dict[str, Any]:
    return {"matrices": [matrix_to_json(matrix) for matrix in family.matrices]}


def family_from_dict(data: Mapping[str, Any], where: str = "family", dims: Optional[Sequence[int]] = None) -> TransformFamily:
    entries = _field(data, "matrices", where)
    if not isinstance(entries, list):
        raise FormatError(f"{where}: 'matrices' must be a list.")
    matrices = []
    for index, entry in enumerate(entries):
        shape = (dims[index], dims[index]) if dims is not None and index < len(dims) else None
        matrices.append(matrix_from_json(entry, shape))
    try:
        return TransformFamily(tuple(matrices))
    except (FormError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


def write_family(family: TransformFamily, path: Optional[PathLike] = None) -> None:
    write_json(family_to_dict(family), path)


def read_family(path: PathLike, dims: Optional[Sequence[int]] = None) -> TransformFamily:
    return family_from_dict(load_json(path), str(path), dims)


# ---------------------------------------------------------------------------
# Canonical blocks


def blocks_to_dict(blocks: CanonicalBlockMultiset) -> Dict[str, Any]:
    return blocks.to_dict()


def blocks_from_dict(data: Mapping[str, Any], where: str = "blocks") -> CanonicalBlockMultiset:
    try:
        kind = FormKind(_field(data, "kind", where))
        blocks = []
        for entry in _field(data, "blocks", where):
            variant = BlockVariant(_field(entry, "variant", where))
            param = None
            if "mu" in entry:
                param = complex_from_json(entry["mu"])
            elif "lambda" in entry:
                param = complex_from_json(entry["lambda"])
            blocks.append(CanonicalBlock(variant, int(_field(entry, "n", where)), param))
        return CanonicalBlockMultiset(kind, tuple(blocks))
    except FormatError:
        raise
    except (CanonicalFormError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


def write_blocks(blocks: CanonicalBlockMultiset, path: Optional[PathLike] = None) -> None:
    write_json(blocks_to_dict(blocks), path)


def read_blocks(path: PathLike) -> CanonicalBlockMultiset:
    return blocks_from_dict(load_json(path), str(path))


# ---------------------------------------------------------------------------
# Oracle specs and witness bundles


def read_oracle_specs(path: PathLike) -> Tuple[List[OracleSpec], Optional[List[bool]]]:
    """Parse ``{"oracles": [...]}``; file references are relative to the spec file."""

    path = Path(path)
    data = load_json(path)
    texts = _field(data, "oracles", str(path))
    if not isinstance(texts, list) or not all(isinstance(text, str) for text in texts):
        raise FormatError(f"{path}: 'oracles' must be a list of spec strings.")
    base = path.parent
    specs = [
        parse_oracle_spec(
            text,
            lambda name: read_matrix(base / name),
            lambda name: read_vector(base / name),
        )
        for text in texts
    ]
    flags = data.get("linear_only")
    return specs, ([bool(flag) for flag in flags] if isinstance(flags, list) else None)


def build_witness(specs: Sequence[OracleSpec], dims: Sequence[int]) -> TopologicalIsomorphismWitness:
    if len(specs) != len(dims):
        raise FormatError(f"{len(specs)} oracle specs for {len(dims)} vertices.")
    return TopologicalIsomorphismWitness(tuple(make_oracle(spec, n) for spec, n in zip(specs, dims)))


def _attach_sources(spec: OracleSpec, directory: Path, vertex: int, counter: List[int]) -> OracleSpec:
    if isinstance(spec, LinearSpec):
        counter[0] += 1
        name = f"vertex{vertex}_linear{counter[0]}.json"
        write_matrix(spec.matrix, directory / name)
        return dataclasses.replace(spec, source=name)
    if isinstance(spec, ShearSpec):
        counter[0] += 1
        name = f"vertex{vertex}_shear{counter[0]}.json"
        write_vector(spec.direction, directory / name)
        return dataclasses.replace(spec, source=name)
    if isinstance(spec, ComposeSpec):
        return ComposeSpec(tuple(_attach_sources(part, directory, vertex, counter) for part in spec.parts))
    return spec


def write_oracle_specs(
    specs: Sequence[OracleSpec],
    path: PathLike,
    linear_only: Optional[Sequence[bool]] = None,
) -> None:
    """Write the spec file and the matrix/vector files its specs refer to."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    texts = []
    for vertex, spec in enumerate(specs, start=1):
        texts.append(format_oracle_spec(_attach_sources(spec, path.parent, vertex, [0])))
    payload: Dict[str, Any] = {"oracles": texts}
    if linear_only is not None:
        payload["linear_only"] = [bool(flag) for flag in linear_only]
    write_json(payload, path)


def write_witness_bundle(bundle: WitnessBundle, directory: PathLike) -> Path:
    """Write repA.json, repB.json, family.json and oracles.json into ``directory``."""

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_representation(bundle.repA, directory / "repA.json")
    write_representation(bundle.repB, directory / "repB.json")
    write_family(bundle.linear_parts, directory / "family.json")
    write_oracle_specs(bundle.specs, directory / "oracles.json", bundle.linear_only)
    return directory


def read_witness_bundle(directory: PathLike) -> WitnessBundle:
    directory = Path(directory)
    repA = read_representation(directory / "repA.json")
    repB = read_representation(directory / "repB.json")
    family = read_family(directory / "family.json", repB.dims)
    specs, flags = read_oracle_specs(directory / "oracles.json")
    witness = build_witness(specs, repB.dims)
    if flags is None:
        flags = [isinstance(spec, LinearSpec) for spec in specs]
    return WitnessBundle(repA, repB, family, tuple(specs), witness, tuple(flags))

