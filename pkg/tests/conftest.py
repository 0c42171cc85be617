import sys
from pathlib import Path

import pytest

SRC = Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from models.results import QuadratureSpec
from models.system import SystemParams


@pytest.fixture
def reference_params() -> SystemParams:
    return SystemParams()


@pytest.fixture
def fast_spec() -> QuadratureSpec:
    """Looser quadrature for tests that only check structure."""
    return QuadratureSpec(abs_tol=1e-7, rel_tol=1e-5, selection_samples=2000)


@pytest.fixture
def settings_home(tmp_path, monkeypatch):
    """Point Path.home() at a temporary directory."""
    monkeypatch.setattr(Path, "home", lambda: tmp_path)
    return tmp_path
