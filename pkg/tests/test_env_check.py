"""Unit tests for environment readiness checks."""

from __future__ import annotations

import io
import os
import tempfile
import unittest
from contextlib import redirect_stdout
from pathlib import Path
from unittest import mock

from formrep.env_check import CRITICAL_FILES, check_versions, metadata, run_environment_check


def _versions(overrides=None):
    overrides = overrides or {}

    def fake_version(name: str) -> str:
        value = overrides.get(name, "99.0.0")
        if value is None:
            raise metadata.PackageNotFoundError(name)
        return value

    return fake_version


class EnvCheckTests(unittest.TestCase):
    """Validate readiness checks with mocked package metadata."""

    def setUp(self) -> None:
        self._cwd = os.getcwd()
        self._tmpdir = tempfile.TemporaryDirectory()
        self.root = Path(self._tmpdir.name)
        os.chdir(self.root)

    def tearDown(self) -> None:
        os.chdir(self._cwd)
        self._tmpdir.cleanup()

    def _populate(self, files=CRITICAL_FILES) -> None:
        for rel in files:
            path = self.root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text("# stub\n", encoding="utf-8")

    def _run(self, overrides=None):
        buffer = io.StringIO()
        with mock.patch("formrep.env_check.metadata.version", side_effect=_versions(overrides)):
            with redirect_stdout(buffer):
                ready = run_environment_check()
        return ready, buffer.getvalue()

    @mock.patch("formrep.env_check.platform.platform", return_value="Linux-test")
    def test_ready_environment(self, mock_platform) -> None:
        self._populate()
        (self.root / ".env").write_text(
            'FORMREP_PARAM_TOL=1e-7  # tighter\nFORMREP_LOG_LEVEL="DEBUG"\nOTHER=1\n', encoding="utf-8"
        )
        ready, output = self._run()

        self.assertTrue(ready)
        self.assertIn("FORMREP_PARAM_TOL = 1e-7", output)
        self.assertIn("FORMREP_LOG_LEVEL = DEBUG", output)
        self.assertNotIn("OTHER", output)
        self.assertIn("numpy 99.0.0 (>= 1.26)", output)
        mock_platform.assert_called()

    def test_missing_package_skips_linalg(self) -> None:
        self._populate()
        ready, output = self._run({"scipy": None})

        self.assertFalse(ready)
        self.assertIn("Package scipy needs >= 1.11 (missing)", output)
        self.assertIn("Linear algebra check skipped", output)

    def test_old_package_fails_version_floor(self) -> None:
        self._populate()
        ready, output = self._run({"scipy": "1.9.3"})

        self.assertFalse(ready)
        self.assertIn("Package scipy needs >= 1.11 (1.9.3 < 1.11)", output)

    def test_version_floors(self) -> None:
        with mock.patch(
            "formrep.env_check.metadata.version",
            side_effect=_versions({"numpy": "1.26.0", "scipy": "1.10.1", "pydantic": "2.10.0rc1"}),
        ):
            rows = check_versions({"numpy": (1, 26), "scipy": (1, 11), "pydantic": (2, 5)})
        self.assertEqual(
            rows,
            [("numpy", "1.26.0", True), ("scipy", "1.10.1", False), ("pydantic", "2.10.0rc1", True)],
        )

    def test_missing_files_reported(self) -> None:
        self._populate(files=["formrep/__init__.py"])
        ready, output = self._run()

        self.assertFalse(ready)
        self.assertIn("Missing file: formrep/canonical.py", output)

    def test_optional_package_only_warns(self) -> None:
        self._populate()
        ready, output = self._run({"hypothesis": None})

        self.assertTrue(ready)
        self.assertIn("Optional package hypothesis unavailable (missing)", output)

    def test_empty_env_value_warns(self) -> None:
        self._populate()
        (self.root / ".env").write_text("FORMREP_SEED=\n", encoding="utf-8")
        ready, output = self._run()

        self.assertTrue(ready)
        self.assertIn("FORMREP_SEED is empty in .env", output)

    def test_unknown_blas_backend_only_warns(self) -> None:
        self._populate()
        with mock.patch("numpy.show_config", side_effect=TypeError("no dicts mode")):
            ready, output = self._run()

        self.assertTrue(ready)
        self.assertIn("BLAS/LAPACK backend unknown", output)


if __name__ == "__main__":
    unittest.main()
