from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import settings

from cylhom.config import load_config

settings.register_profile("cylhom", deadline=None, max_examples=30)
settings.load_profile("cylhom")

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def config(name: str):
    return load_config(CONFIGS / f"{name}.cfg")


@pytest.fixture(scope="session")
def ref1():
    return config("ref1").coefficients


@pytest.fixture(scope="session")
def coupled():
    return config("coupled").coefficients


@pytest.fixture(scope="session")
def stress():
    return config("stress").coefficients


@pytest.fixture(scope="session")
def constant():
    return config("constant").coefficients


@pytest.fixture(scope="session")
def identity():
    return config("identity").coefficients


@pytest.fixture(scope="session")
def geometry(ref1):
    return ref1.geometry


# one line per acceptance criterion, printed after the run regardless of output capture
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
