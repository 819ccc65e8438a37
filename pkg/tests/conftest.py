import pytest

from src.core.resum_engine import ResumEngine
from src.core.series_core import builtin_series
from src.models.resum_models import ScanConfig
from src.models.series_models import BuiltinModelId


@pytest.fixture(scope="session")
def engine() -> ResumEngine:
    """One engine (and moment cache) for the whole run."""
    return ResumEngine()


@pytest.fixture
def scan_config() -> ScanConfig:
    return ScanConfig(lambda0=1.0)


@pytest.fixture(scope="session")
def prototype():
    return builtin_series(BuiltinModelId.PROTOTYPE, 7)


@pytest.fixture(scope="session")
def geometric():
    return builtin_series(BuiltinModelId.GEOMETRIC, 7)


@pytest.fixture(scope="session")
def beta():
    return builtin_series(BuiltinModelId.BETA_POLYMER, 7)


@pytest.fixture
def config_file(tmp_path):
    """A config.yaml that keeps every output under tmp_path."""
    path = tmp_path / "config.yaml"
    path.write_text(
        "storage:\n"
        f"  output_dir: {tmp_path / 'reports'}\n"
        "  log_path: null\n",
        encoding="utf-8",
    )
    return path
