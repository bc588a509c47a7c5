import os
import unittest
from unittest import mock

from pydantic import ValidationError

from formrep.config import CanonicalConfig, LinearizeConfig, load_settings


class LoadSettingsTests(unittest.TestCase):
    def setUp(self) -> None:
        load_settings.cache_clear()
        patcher = mock.patch("formrep.config.load_dotenv")
        patcher.start()
        self.addCleanup(patcher.stop)
        self.addCleanup(load_settings.cache_clear)

    def _load(self, env):
        with mock.patch.dict(os.environ, env, clear=True):
            load_settings.cache_clear()
            return load_settings()

    def test_defaults(self) -> None:
        settings = self._load({})
        self.assertEqual(settings.seed, 0)
        self.assertEqual(settings.linearize.basis_rank_threshold, 1e-8)
        self.assertEqual(settings.linearize.halvings, 60)
        self.assertIsNone(settings.linearize.max_candidates)
        self.assertEqual(settings.canonical.param_tol, 1e-6)
        self.assertEqual(settings.canonical.certificate_max_dim, 4)
        self.assertEqual(settings.generators.witness_cond_max, 10.0)

    def test_environment_overrides(self) -> None:
        settings = self._load(
            {
                "FORMREP_SEED": "17",
                "FORMREP_MAX_CANDIDATES": "12",
                "FORMREP_PARALLEL_VERTICES": "yes",
                "FORMREP_RANK_THRESHOLD": "1e-10",
                "FORMREP_WITNESS_SAMPLES": "7",
            }
        )
        self.assertEqual(settings.seed, 17)
        self.assertEqual(settings.linearize.max_candidates, 12)
        self.assertTrue(settings.linearize.parallel_vertices)
        self.assertEqual(settings.canonical.rank_threshold, 1e-10)
        self.assertEqual(settings.generators.witness_samples, 7)

    def test_settings_are_cached(self) -> None:
        with mock.patch.dict(os.environ, {"FORMREP_SEED": "3"}, clear=True):
            load_settings.cache_clear()
            first = load_settings()
            os.environ["FORMREP_SEED"] = "4"
            self.assertIs(load_settings(), first)

    def test_unparsable_value(self) -> None:
        with self.assertRaises(RuntimeError) as ctx:
            self._load({"FORMREP_HALVINGS": "many"})
        self.assertIn("could not be parsed", str(ctx.exception))

    def test_out_of_range_value(self) -> None:
        with self.assertRaises(RuntimeError) as ctx:
            self._load({"FORMREP_PARAM_TOL": "2.0"})
        self.assertIn("Configuration invalid", str(ctx.exception))


class ConfigModelTests(unittest.TestCase):
    def test_candidate_budget(self) -> None:
        self.assertEqual(LinearizeConfig().candidate_budget(4), 54)
        self.assertEqual(LinearizeConfig(max_candidates=3).candidate_budget(4), 3)

    def test_rejects_bad_thresholds(self) -> None:
        with self.assertRaises(ValidationError):
            LinearizeConfig(basis_rank_threshold=0)
        with self.assertRaises(ValidationError):
            CanonicalConfig(ambiguity_band=0.5)


if __name__ == "__main__":
    unittest.main()
