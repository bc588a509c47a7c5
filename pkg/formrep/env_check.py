"""Environment readiness checks."""

from __future__ import annotations

import platform
import re
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from dotenv import dotenv_values

# distribution name -> minimum version, matching requirements.txt
REQUIRED_VERSIONS: Dict[str, Tuple[int, ...]] = {
    "numpy": (1, 26),
    "scipy": (1, 11),
    "pydantic": (2, 5),
    "python-dotenv": (1, 0),
}

OPTIONAL_VERSIONS: Dict[str, Tuple[int, ...]] = {
    "hypothesis": (6, 90),
}

CRITICAL_FILES = [
    "formrep/__init__.py",
    "formrep/cli.py",
    "formrep/config.py",
    "formrep/forms.py",
    "formrep/linearize.py",
    "formrep/canonical.py",
]


@dataclass
class CheckOutcome:
    issues: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


def _version_tuple(text: str) -> Tuple[int, ...]:
    return tuple(int(part) for part in re.findall(r"\d+", text.split("+")[0])[:3])


def _installed_version(distribution: str) -> Optional[str]:
    try:
        return metadata.version(distribution)
    except metadata.PackageNotFoundError:
        return None


def _floor_text(floor: Tuple[int, ...]) -> str:
    return ".".join(str(part) for part in floor)


def check_versions(floors: Dict[str, Tuple[int, ...]]) -> List[Tuple[str, Optional[str], bool]]:
    """(distribution, installed version or None, meets the floor) for each entry."""

    rows = []
    for name, floor in floors.items():
        version = _installed_version(name)
        rows.append((name, version, version is not None and _version_tuple(version) >= floor))
    return rows


def _section_packages() -> CheckOutcome:
    outcome = CheckOutcome()
    for floors, required in ((REQUIRED_VERSIONS, True), (OPTIONAL_VERSIONS, False)):
        for name, version, ok in check_versions(floors):
            floor = _floor_text(floors[name])
            if ok:
                print(f"  ✓ {name} {version} (>= {floor})")
                continue
            found = "missing" if version is None else f"{version} < {floor}"
            if required:
                print(f"  ✗ {name} ({found})")
                outcome.issues.append(f"Package {name} needs >= {floor} ({found})")
            else:
                print(f"  - {name} ({found}; optional, needed for the property tests)")
                outcome.warnings.append(f"Optional package {name} unavailable ({found})")
    return outcome


def _section_files() -> CheckOutcome:
    outcome = CheckOutcome()
    for rel in CRITICAL_FILES:
        present = Path(rel).exists()
        print(f"  {'✓' if present else '✗'} {rel}")
        if not present:
            outcome.issues.append(f"Missing file: {rel}")
    return outcome


def _section_env() -> CheckOutcome:
    outcome = CheckOutcome()
    env_path = Path(".env")
    if not env_path.exists():
        print("  - .env not found (defaults apply)")
        return outcome

    overrides = {key: value for key, value in dotenv_values(env_path).items() if key.startswith("FORMREP_")}
    if not overrides:
        print("  - .env present, no FORMREP_* overrides")
    for key, value in sorted(overrides.items()):
        print(f"    {key} = {value or '(empty)'}")
        if not value:
            outcome.warnings.append(f"{key} is empty in .env; the default applies.")
    return outcome


def _blas_backend(np) -> Optional[str]:
    try:
        deps = np.show_config(mode="dicts")["Build Dependencies"]
        return f"blas={deps['blas']['name']}, lapack={deps['lapack']['name']}"
    except Exception:  # noqa: BLE001
        return None


def _section_linalg() -> CheckOutcome:
    """Report the BLAS/LAPACK backend and smoke-test the routines the toolkit depends on."""

    outcome = CheckOutcome()
    try:
        import numpy as np
        import scipy.linalg as la

        backend = _blas_backend(np)
        if backend is None:
            print("  - BLAS/LAPACK backend unknown")
            outcome.warnings.append("Could not read the BLAS/LAPACK backend from numpy.")
        else:
            print(f"  ✓ {backend}")

        matrix = np.array([[2.0, 1.0j], [0.0, 3.0]])
        _, _, selected = la.schur(matrix, output="complex", sort=lambda value: abs(value - 3.0) < 0.5)
        singular = la.svd(matrix, compute_uv=False)
        if selected != 1 or singular.shape != (2,):
            outcome.issues.append("scipy.linalg returned unexpected results for schur/svd")
        else:
            print("  ✓ complex schur reordering and svd work")
    except Exception as exc:  # noqa: BLE001
        print(f"  ✗ linear algebra check failed: {exc}")
        outcome.issues.append(f"Linear algebra check failed: {exc}")
    return outcome


SECTIONS: List[Tuple[str, Callable[[], CheckOutcome]]] = [
    ("パッケージバージョン / Package versions", _section_packages),
    ("主要ファイル確認 / Required files", _section_files),
    ("設定ファイル確認 / .env overrides", _section_env),
    ("数値ライブラリ確認 / BLAS, LAPACK and smoke test", _section_linalg),
]


def run_environment_check() -> bool:
    """Run environment diagnostics; returns True when ready to run."""

    print("Environment readiness check")
    print(f"  Platform  : {platform.platform()}")
    print(f"  Python    : {sys.version.split()[0]} ({sys.executable})")

    total = CheckOutcome()
    packages_ok = True
    for index, (title, section) in enumerate(SECTIONS, start=1):
        print(f"\n[{index}] {title}")
        if section is _section_linalg and not packages_ok:
            print("  - skipped until the issues above are fixed")
            total.issues.append("Linear algebra check skipped")
            continue
        outcome = section()
        if section is _section_packages:
            packages_ok = not outcome.issues
        total.issues.extend(outcome.issues)
        total.warnings.extend(outcome.warnings)

    print("\n[総合結果 / Summary]")
    if total.issues:
        print("  ✗ Not ready yet. Address the following:")
        for idx, issue in enumerate(total.issues, 1):
            print(f"    {idx}. {issue}")
        print("  → Re-run `python -m formrep check-environment` after completing the steps.")
        return False
    if total.warnings:
        print("  ✓ Base system ready. Notes:")
        for warn in total.warnings:
            print(f"    - {warn}")
    else:
        print("  ✓ All checks passed.")
    return True
