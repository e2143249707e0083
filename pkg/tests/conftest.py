import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import pytest

from mercuryflow import constellations as cons
from mercuryflow.tables import table_for

FINITE_BUILTINS = ("bpsk", "4pam", "16pam", "32pam")


@pytest.fixture(scope="session")
def builtin_tables():
    """Default tables for every built-in constellation, built once per session."""
    return {name: table_for(cons.by_name(name)) for name in (*FINITE_BUILTINS, "gaussian")}
