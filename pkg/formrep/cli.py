"""Command line interface for the form toolkit.

Families map ℬ back to 𝒜: ``verify repA repB family`` checks
``M_A = S_iᵀ M_B S_j`` (``conj(S_j)`` on sesquilinear edges), and ``apply``
produces 𝒜 from ℬ and a family.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from .canonical import (
    CanonicalFormError,
    FormKind,
    IllConditionedError,
    assemble_canonical_matrix,
    canonical_blocks,
    congruent_decision,
)
from .config import CanonicalConfig, LinearizeConfig, Settings, load_settings
from .env_check import run_environment_check
from .forms import (
    DimensionMismatchError,
    EdgeKind,
    FormError,
    MixedGraph,
    StructureMismatchError,
    TransformFamily,
    apply_transform,
    verify_linear_isomorphism,
)
from .generators import (
    G_FUNCTIONS,
    GeneratorError,
    form_preserving_witness,
    random_degenerate_representation,
    random_invertible,
    random_representation,
    sample_canonical_multiset,
)
from .linearize import LinearizationError, linearize_topological_isomorphism
from .serialization import (
    FormatError,
    blocks_to_dict,
    build_witness,
    family_to_dict,
    matrix_to_json,
    read_family,
    read_matrix,
    read_oracle_specs,
    read_representation,
    representation_to_dict,
    write_json,
    write_witness_bundle,
)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_STRUCTURE = 2
EXIT_FORMAT = 3
EXIT_BASIS = 4
EXIT_ILL_CONDITIONED = 5
EXIT_DOMAIN = 6

GRAPHS: Dict[str, Callable[[], MixedGraph]] = {
    "example": MixedGraph.example_two_vertex,
    "bilinear-loop": lambda: MixedGraph.single_loop(EdgeKind.BILINEAR),
    "sesquilinear-loop": lambda: MixedGraph.single_loop(EdgeKind.SESQUILINEAR),
}


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )


def print_settings(settings: Settings) -> None:
    print(json.dumps(settings.model_dump(), indent=2, ensure_ascii=False))


def _effective_settings(args: argparse.Namespace) -> Settings:
    settings = load_settings()
    linearize_update: Dict[str, Any] = {}
    canonical_update: Dict[str, Any] = {}
    if args.tol is not None:
        linearize_update["residual_tol"] = args.tol
        canonical_update["param_tol"] = args.tol
    if args.param_tol is not None:
        canonical_update["param_tol"] = args.param_tol
    if args.rank_threshold is not None:
        linearize_update["basis_rank_threshold"] = args.rank_threshold
        canonical_update["rank_threshold"] = args.rank_threshold
    update: Dict[str, Any] = {
        "linearize": LinearizeConfig.model_validate({**settings.linearize.model_dump(), **linearize_update}),
        "canonical": CanonicalConfig.model_validate({**settings.canonical.model_dump(), **canonical_update}),
    }
    if args.seed is not None:
        update["seed"] = args.seed
    return settings.model_copy(update=update)


def _parse_dims(text: str) -> List[int]:
    try:
        dims = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"dimensions must be comma-separated integers, got '{text}'") from exc
    if any(n < 0 for n in dims):
        raise argparse.ArgumentTypeError("dimensions must be non-negative")
    return dims


def _parse_size(text: str) -> int:
    try:
        size = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"size must be an integer, got '{text}'") from exc
    if size < 0:
        raise argparse.ArgumentTypeError("size must be non-negative")
    return size


# ---------------------------------------------------------------------------
# Commands


def cmd_verify(args: argparse.Namespace, settings: Settings) -> int:
    repA = read_representation(args.repA)
    repB = read_representation(args.repB)
    family = read_family(args.family)
    report = verify_linear_isomorphism(repA, repB, family, settings.linearize.residual_tol)
    write_json({"report": report.to_dict()}, args.out)
    return EXIT_OK if report.ok else EXIT_NEGATIVE


def cmd_apply(args: argparse.Namespace, settings: Settings) -> int:
    repB = read_representation(args.rep)
    family = read_family(args.family, repB.dims)
    write_json(representation_to_dict(apply_transform(repB, family)), args.out)
    return EXIT_OK


def cmd_linearize(args: argparse.Namespace, settings: Settings) -> int:
    repA = read_representation(args.repA)
    repB = read_representation(args.repB)
    specs, _ = read_oracle_specs(args.oracles)
    witness = build_witness(specs, repA.dims)
    result = linearize_topological_isomorphism(repA, repB, witness, settings.linearize, settings.seed)
    write_json(
        {
            "family": family_to_dict(result.family),
            "report": result.report.to_dict(),
            "basis_pairs": [pair.to_dict() for pair in result.basis_pairs],
        },
        args.out,
    )
    return EXIT_OK if result.ok else EXIT_NEGATIVE


def cmd_canonicalize(args: argparse.Namespace, settings: Settings) -> int:
    matrix = read_matrix(args.matrix)
    blocks = canonical_blocks(matrix, FormKind(args.kind), settings.canonical)
    write_json(blocks_to_dict(blocks), args.out)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, settings: Settings) -> int:
    first = read_matrix(args.first)
    second = read_matrix(args.second)
    decision = congruent_decision(
        first,
        second,
        FormKind(args.kind),
        settings.canonical,
        certificate=args.certificate,
        seed=settings.seed,
    )
    payload: Dict[str, Any] = {"equivalent": decision.equivalent}
    if decision.first is not None and decision.second is not None:
        payload["first"] = blocks_to_dict(decision.first)["blocks"]
        payload["second"] = blocks_to_dict(decision.second)["blocks"]
    if args.certificate:
        payload["certificate"] = family_to_dict(decision.certificate) if decision.certificate else None
    write_json(payload, args.out)
    return EXIT_OK if decision.equivalent else EXIT_NEGATIVE


def cmd_generate(args: argparse.Namespace, settings: Settings) -> int:
    seed = settings.seed
    target = args.target
    if target == "canonical":
        blocks = sample_canonical_multiset(args.size, FormKind(args.kind), seed)
        matrix = assemble_canonical_matrix(blocks)
        payload = blocks_to_dict(blocks)
        payload.update({"rows": matrix.shape[0], "cols": matrix.shape[1], "matrix": matrix_to_json(matrix)})
        write_json(payload, args.out)
        return EXIT_OK

    if target == "family":
        dims = args.dims if args.dims else [2] * GRAPHS[args.graph]().vertex_count
        cond_max = args.cond_max if args.cond_max is not None else settings.generators.cond_max
        family = TransformFamily(
            tuple(random_invertible(n, cond_max, seed + index) for index, n in enumerate(dims))
        )
        write_json(family_to_dict(family), args.out)
        return EXIT_OK

    if args.source is not None:
        rep = read_representation(args.source)
    else:
        graph = GRAPHS[args.graph]()
        dims = args.dims if args.dims else [2] * graph.vertex_count
        if target == "representation":
            rep = random_representation(graph, dims, seed)
        else:
            rep = random_degenerate_representation(graph, dims, seed)

    if target in ("representation", "degenerate"):
        write_json(representation_to_dict(rep), args.out)
        return EXIT_OK

    if args.out is None:
        raise FormatError("generate witness needs --out DIRECTORY")
    bundle = form_preserving_witness(
        rep, seed, settings.generators, g=args.g, require_nonlinear=args.require_nonlinear
    )
    directory = write_witness_bundle(bundle, args.out)
    logging.info("Witness bundle written to %s.", directory)
    write_json({"directory": str(directory), "nonlinear_vertices": bundle.nonlinear_vertices})
    return EXIT_OK


def cmd_check_environment(args: argparse.Namespace, settings: Settings) -> int:
    return EXIT_OK if run_environment_check() else EXIT_NEGATIVE


def _run(handler: Callable[[argparse.Namespace, Settings], int], args: argparse.Namespace, settings: Settings) -> int:
    try:
        return handler(args, settings)
    except FormatError as exc:
        logging.error("Input could not be parsed: %s", exc)
        return EXIT_FORMAT
    except (StructureMismatchError, DimensionMismatchError) as exc:
        logging.error("Structure mismatch: %s", exc)
        return EXIT_STRUCTURE
    except LinearizationError as exc:
        logging.error("Basis extraction failed: %s", exc)
        return EXIT_BASIS
    except IllConditionedError as exc:
        logging.error("Ill-conditioned input: %s", exc)
        return EXIT_ILL_CONDITIONED
    except (FormError, CanonicalFormError, GeneratorError) as exc:
        logging.error("%s", exc)
        return EXIT_DOMAIN


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, help="Residual tolerance (parameter tolerance for canonical commands).")
    common.add_argument("--rank-threshold", type=float, help="Relative singular value threshold for rank decisions.")
    common.add_argument("--param-tol", type=float, help="Eigenvalue and block parameter tolerance.")
    common.add_argument("--seed", type=int, help="Seed for every randomized step.")
    common.add_argument("--out", help="Write JSON output to this path instead of stdout.")
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors.")
    common.add_argument(
        "--log-level",
        default="INFO",
        help="Python logging level (DEBUG, INFO, WARNING, ERROR).",
    )

    parser = argparse.ArgumentParser(
        prog="formrep",
        description=(
            "Systems of bilinear and sesquilinear forms: verify and apply linear isomorphisms, "
            "linearize topological ones and compute canonical blocks."
        ),
    )
    parser.add_argument("--show-config", action="store_true", help="Print loaded configuration and exit.")
    sub = parser.add_subparsers(dest="command")

    verify = sub.add_parser("verify", parents=[common], help="Check M_A = S_iᵀ M_B S_j(conj) on every edge.")
    verify.add_argument("repA")
    verify.add_argument("repB")
    verify.add_argument("family")
    verify.set_defaults(handler=cmd_verify)

    apply_cmd = sub.add_parser("apply", parents=[common], help="Transform representation B by a family into A.")
    apply_cmd.add_argument("rep")
    apply_cmd.add_argument("family")
    apply_cmd.set_defaults(handler=cmd_apply)

    linearize = sub.add_parser(
        "linearize", parents=[common], help="Turn homeomorphism oracles carrying A onto B into a linear family."
    )
    linearize.add_argument("repA")
    linearize.add_argument("repB")
    linearize.add_argument("oracles", help='Oracle spec file {"oracles": ["radial:1:1", ...]}.')
    linearize.set_defaults(handler=cmd_linearize)

    kinds = [kind.value for kind in FormKind]
    canonicalize = sub.add_parser("canonicalize", parents=[common], help="Canonical blocks of a single form.")
    canonicalize.add_argument("matrix")
    canonicalize.add_argument("--kind", choices=kinds, required=True)
    canonicalize.set_defaults(handler=cmd_canonicalize)

    compare = sub.add_parser("compare", parents=[common], help="Decide congruence of two single forms.")
    compare.add_argument("first")
    compare.add_argument("second")
    compare.add_argument("--kind", choices=kinds, required=True)
    compare.add_argument("--certificate", action="store_true", help="Search for a witnessing S (dimension <= 4).")
    compare.set_defaults(handler=cmd_compare)

    generate = sub.add_parser("generate", parents=[common], help="Seeded test inputs.")
    generate.add_argument("target", choices=["representation", "degenerate", "family", "witness", "canonical"])
    generate.add_argument("--graph", choices=sorted(GRAPHS), default="example")
    generate.add_argument("--dims", type=_parse_dims, default=None, help="Comma-separated vertex dimensions.")
    generate.add_argument("--from", dest="source", help="Representation file to build a witness for.")
    generate.add_argument("--g", choices=sorted(G_FUNCTIONS), default="sin", help="Shear function.")
    generate.add_argument("--require-nonlinear", action="store_true")
    generate.add_argument("--cond-max", type=float, default=None)
    generate.add_argument("--size", type=_parse_size, default=4, help="Total size of a canonical sample.")
    generate.add_argument("--kind", choices=kinds, default=FormKind.BILINEAR.value)
    generate.set_defaults(handler=cmd_generate)

    check = sub.add_parser("check-environment", parents=[common], help="Run dependency readiness checks.")
    check.set_defaults(handler=cmd_check_environment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.show_config:
        try:
            print_settings(load_settings())
        except RuntimeError as exc:
            print(f"Configuration error: {exc}", file=sys.stderr)
            return EXIT_FORMAT
        return EXIT_OK

    if args.command is None:
        parser.print_help()
        return EXIT_FORMAT

    configure_logging("WARNING" if args.quiet else args.log_level)
    try:
        settings = _effective_settings(args)
    except (RuntimeError, ValidationError) as exc:
        logging.error("%s", exc)
        return EXIT_FORMAT
    return _run(args.handler, args, settings)


if __name__ == "__main__":
    sys.exit(main())
