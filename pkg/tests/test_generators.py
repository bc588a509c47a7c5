"""Tests for seeded generators, oracle specs and form-preserving witnesses."""

from __future__ import annotations

import unittest

import numpy as np

from formrep.canonical import BlockVariant, FormKind
from formrep.config import GeneratorConfig
from formrep.forms import DimensionMismatchError, EdgeKind, FormRepresentation, MixedGraph, TransformFamily
from formrep.generators import (
    G_FUNCTIONS,
    ComposeSpec,
    GeneratorError,
    LinearSpec,
    OracleSpecError,
    RadialSpec,
    ShearSpec,
    WitnessError,
    check_witness,
    fold_spec,
    form_preserving_witness,
    format_oracle_spec,
    joint_kernel,
    make_oracle,
    parse_oracle_spec,
    random_degenerate_representation,
    random_invertible,
    random_representation,
    sample_canonical_multiset,
)
from formrep.linalg import condition_number
from formrep.linearize import TopologicalIsomorphismWitness, linear_oracle, oracle_self_test


class RandomInputTests(unittest.TestCase):
    def test_empty_invertible(self) -> None:
        self.assertEqual(random_invertible(0, 10.0, 0).shape, (0, 0))

    def test_invertible_is_deterministic(self) -> None:
        np.testing.assert_array_equal(random_invertible(3, 10.0, 7), random_invertible(3, 10.0, 7))

    def test_condition_bound(self) -> None:
        for seed in range(10):
            self.assertLessEqual(condition_number(random_invertible(5, 100.0, seed)), 100.0 * (1 + 1e-9))

    def test_representation_is_deterministic(self) -> None:
        graph = MixedGraph.example_two_vertex()
        first = random_representation(graph, (2, 3), 11)
        second = random_representation(graph, (2, 3), 11)
        for edge_id in first.form_matrices:
            np.testing.assert_array_equal(first.matrix(edge_id), second.matrix(edge_id))

    def test_degenerate_representation_has_joint_kernels(self) -> None:
        rep = random_degenerate_representation(MixedGraph.example_two_vertex(), (3, 4), seed=2)
        for vertex in (1, 2):
            kernel = joint_kernel(rep, vertex)
            self.assertEqual(kernel.shape[1], 1)
            for edge in rep.graph.edges:
                matrix = rep.matrix(edge.id)
                if edge.tail == vertex:
                    np.testing.assert_allclose(kernel.T @ matrix, 0, atol=1e-10)
                if edge.head == vertex:
                    second = kernel.conj() if edge.kind is EdgeKind.SESQUILINEAR else kernel
                    np.testing.assert_allclose(matrix @ second, 0, atol=1e-10)

    def test_dims_must_fit_graph(self) -> None:
        graph = MixedGraph.example_two_vertex()
        for dims in ((2,), (2, 2, 2), (2, -1)):
            with self.subTest(dims=dims), self.assertRaises(DimensionMismatchError):
                random_representation(graph, dims, 0)

    def test_degenerate_kernel_dims_checked(self) -> None:
        with self.assertRaises(GeneratorError):
            random_degenerate_representation(MixedGraph.example_two_vertex(), (2, 2), 0, kernel_dims=[3, 0])


class CanonicalSampleTests(unittest.TestCase):
    def test_total_size_and_determinism(self) -> None:
        for kind in FormKind:
            for total in range(0, 9):
                first = sample_canonical_multiset(total, kind, seed=total)
                second = sample_canonical_multiset(total, kind, seed=total)
                self.assertEqual(first.total_size, total)
                self.assertEqual(first, second)

    def test_parameter_ranges(self) -> None:
        for seed in range(50):
            for kind in FormKind:
                for block in sample_canonical_multiset(8, kind, seed).blocks:
                    if block.variant is BlockVariant.SINGULAR:
                        self.assertLessEqual(block.n, 3)
                    elif block.variant is BlockVariant.GAMMA:
                        if kind is FormKind.SESQUILINEAR:
                            self.assertAlmostEqual(abs(block.param), 1.0)
                        else:
                            self.assertIsNone(block.param)
                    else:
                        self.assertGreaterEqual(abs(block.param), 1.2 - 1e-12)
                        self.assertLessEqual(abs(block.param), 5.0 + 1e-12)


class OracleSpecTests(unittest.TestCase):
    def setUp(self) -> None:
        self.matrices = {"a.json": np.diag([2.0, 3.0]), "b.json": np.array([[1.0, 1.0], [0.0, 1.0]])}
        self.vectors = {"k.json": np.array([0.0, 1.0])}

    def _parse(self, text: str):
        return parse_oracle_spec(text, self.matrices.__getitem__, self.vectors.__getitem__)

    def test_parse_nested(self) -> None:
        spec = self._parse("compose:[linear:a.json,compose:[radial:1:2,shear:k.json:osc]]")
        self.assertIsInstance(spec, ComposeSpec)
        self.assertEqual(spec.dim, 2)
        inner = spec.parts[1]
        self.assertIsInstance(inner.parts[0], RadialSpec)
        self.assertEqual(inner.parts[1].g, "osc")
        self.assertEqual(format_oracle_spec(spec), "compose:[linear:a.json,compose:[radial:1.0:2.0,shear:k.json:osc]]")

    def test_parse_errors(self) -> None:
        for text in (
            "radial",
            "spiral:1",
            "radial:1",
            "radial:a:b",
            "radial:-1:1",
            "shear:k.json:unknown",
            "compose:[radial:1:1",
            "compose:radial:1:1",
            "compose:[]",
        ):
            with self.subTest(text=text), self.assertRaises(OracleSpecError):
                self._parse(text)

    def test_singular_linear_rejected(self) -> None:
        with self.assertRaises(OracleSpecError):
            LinearSpec(np.zeros((2, 2)))

    def test_compose_dimension_conflict(self) -> None:
        with self.assertRaises(OracleSpecError):
            ComposeSpec((LinearSpec(np.eye(2)), LinearSpec(np.eye(3))))

    def test_radial_needs_dimension(self) -> None:
        with self.assertRaises(OracleSpecError):
            make_oracle(RadialSpec(1.0, 1.0))
        with self.assertRaises(OracleSpecError):
            make_oracle(LinearSpec(np.eye(2)), 3)


class OracleTests(unittest.TestCase):
    def test_linear_identity(self) -> None:
        phi = make_oracle(LinearSpec(np.eye(3)))
        x = np.array([1.0, 2j, -3.0])
        np.testing.assert_allclose(phi(x), x)
        np.testing.assert_allclose(phi.pull_back(x), x)

    def test_radial_unit_vector(self) -> None:
        phi = make_oracle(RadialSpec(1.0, 1.0), 2)
        x = np.array([0.6, 0.8j])
        y = phi(x)
        self.assertAlmostEqual(np.linalg.norm(y), 2.0)
        np.testing.assert_allclose(phi.pull_back(y), x, atol=1e-10)
        np.testing.assert_array_equal(phi.pull_back(np.zeros(2)), np.zeros(2))

    def test_shear_round_trip(self) -> None:
        rng = np.random.default_rng(0)
        for g in ("sin", "osc", "ring", "fold", "zero"):
            phi = make_oracle(ShearSpec(rng.standard_normal(3) + 1j * rng.standard_normal(3), g))
            for _ in range(10):
                x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
                np.testing.assert_allclose(phi.pull_back(phi(x)), x, atol=1e-10)
                np.testing.assert_allclose(phi(phi.pull_back(x)), x, atol=1e-10)

    def test_shear_moves_only_along_direction(self) -> None:
        direction = np.array([0.0, 1.0])
        phi = make_oracle(ShearSpec(direction, "sin"))
        image = phi(np.array([1.5, 0.25]))
        self.assertEqual(image[0], 1.5)
        self.assertAlmostEqual(image[1], 0.25 + np.sin(2.25) * (1 + 1j))

    def test_compose_applies_last_part_first(self) -> None:
        A = np.diag([2.0, 3.0])
        B = np.array([[1.0, 1.0], [0.0, 1.0]])
        phi = make_oracle(ComposeSpec((LinearSpec(A), LinearSpec(B))))
        x = np.array([1.0, 1.0])
        np.testing.assert_allclose(phi(x), A @ B @ x)
        np.testing.assert_allclose(phi.pull_back(A @ B @ x), x)

    def test_fold_needs_two_dimensions(self) -> None:
        with self.assertRaises(OracleSpecError):
            fold_spec(1, 0)


class WitnessTests(unittest.TestCase):
    def test_kernel_shear_for_rank_one_form(self) -> None:
        rep = FormRepresentation.single_form(np.diag([1.0, 0.0]), EdgeKind.BILINEAR)
        bundle = form_preserving_witness(rep, seed=3)
        self.assertEqual(bundle.nonlinear_vertices, [1])
        self.assertIsInstance(bundle.specs[0].parts[0], ShearSpec)
        self.assertLessEqual(check_witness(bundle.repA, bundle.repB, bundle.witness, 50, 1e-9, 1), 1e-9)

    def test_zero_form_gets_radial(self) -> None:
        rep = FormRepresentation.single_form(np.zeros((3, 3)), EdgeKind.SESQUILINEAR)
        bundle = form_preserving_witness(rep, seed=0)
        self.assertEqual(bundle.linear_only, (False,))
        self.assertIsInstance(bundle.specs[0].parts[0], RadialSpec)

    def test_nondegenerate_form_is_linear_only(self) -> None:
        rep = FormRepresentation.single_form(np.eye(2), EdgeKind.BILINEAR)
        bundle = form_preserving_witness(rep, seed=0)
        self.assertEqual(bundle.linear_only, (True,))
        self.assertIsInstance(bundle.specs[0], LinearSpec)
        with self.assertRaises(WitnessError):
            form_preserving_witness(rep, seed=0, require_nonlinear=True)

    def test_witness_matches_linear_parts(self) -> None:
        rep = random_degenerate_representation(MixedGraph.example_two_vertex(), (2, 3), seed=4)
        bundle = form_preserving_witness(rep, seed=4, g="osc", require_nonlinear=True)
        self.assertEqual(bundle.nonlinear_vertices, [1, 2])
        self.assertIsInstance(bundle.linear_parts, TransformFamily)
        self.assertIs(bundle.repB, rep)

    def test_witness_is_deterministic(self) -> None:
        rep = random_degenerate_representation(MixedGraph.example_two_vertex(), (3, 2), seed=6)
        first = form_preserving_witness(rep, seed=6)
        second = form_preserving_witness(rep, seed=6)
        for left, right in zip(first.linear_parts.matrices, second.linear_parts.matrices):
            np.testing.assert_array_equal(left, right)

    def test_emitted_shear_oracles_pass_self_test(self) -> None:
        graph = MixedGraph.example_two_vertex()
        for g in G_FUNCTIONS:
            for seed in range(20):
                dims = (1 + seed % 3, 1 + (seed // 3) % 3)
                bundle = form_preserving_witness(random_degenerate_representation(graph, dims, seed), seed, g=g)
                for phi in bundle.witness.oracles:
                    report = oracle_self_test(phi, trials=100, seed=seed, tol=1e-8)
                    self.assertTrue(report.ok, msg=f"{g} seed {seed}: {report.max_roundtrip_error:.3e}")

    def test_radial_oracles_pass_self_test(self) -> None:
        for p in (1.0, 2.0):
            for seed in range(20):
                n = 1 + seed % 4
                c = float(np.random.default_rng(seed).uniform(0.5, 2.0))
                phi = make_oracle(ComposeSpec((RadialSpec(c, p), LinearSpec(random_invertible(n, 10.0, seed)))))
                report = oracle_self_test(phi, trials=100, seed=seed, tol=1e-8)
                self.assertTrue(report.ok, msg=f"p={p} seed {seed}: {report.max_roundtrip_error:.3e}")

        rep = FormRepresentation.single_form(np.zeros((2, 2)), EdgeKind.SESQUILINEAR)
        for seed in range(10):
            bundle = form_preserving_witness(rep, seed)
            self.assertTrue(oracle_self_test(bundle.witness.oracles[0], trials=100, seed=seed, tol=1e-8).ok)

    def test_unknown_g(self) -> None:
        rep = FormRepresentation.single_form(np.eye(2), EdgeKind.BILINEAR)
        with self.assertRaises(OracleSpecError):
            form_preserving_witness(rep, seed=0, g="spiral")

    def test_broken_witness_detected(self) -> None:
        repA = FormRepresentation.single_form(np.eye(2), EdgeKind.BILINEAR)
        repB = FormRepresentation.single_form(2 * np.eye(2), EdgeKind.BILINEAR)
        witness = TopologicalIsomorphismWitness((linear_oracle(np.eye(2)),))
        with self.assertRaises(WitnessError):
            check_witness(repA, repB, witness, samples=5, tol=1e-9, seed=0)

    def test_custom_config(self) -> None:
        rep = FormRepresentation.single_form(np.diag([1.0, 0.0, 0.0]), EdgeKind.SESQUILINEAR)
        cfg = GeneratorConfig(witness_cond_max=2.0, witness_samples=5)
        bundle = form_preserving_witness(rep, seed=9, cfg=cfg)
        self.assertLessEqual(condition_number(bundle.linear_parts.matrices[0]), 2.0 * (1 + 1e-9))


if __name__ == "__main__":
    unittest.main()
