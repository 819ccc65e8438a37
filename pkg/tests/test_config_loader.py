import pytest
from pydantic import ValidationError

from src.models.resum_models import QuadratureRule
from src.utils.config_loader import FullConfig, get_config, substitute_env_vars


def test_placeholder_default_is_used_when_unset(monkeypatch):
    monkeypatch.delenv("BOREL_RESUM_TEST_DIR", raising=False)
    assert substitute_env_vars({"dir": "${BOREL_RESUM_TEST_DIR:-reports}/x"}) == {"dir": "reports/x"}


def test_placeholder_takes_environment_value(monkeypatch):
    monkeypatch.setenv("BOREL_RESUM_TEST_DIR", "/tmp/out")
    assert substitute_env_vars(["${BOREL_RESUM_TEST_DIR:-reports}"]) == ["/tmp/out"]


def test_required_placeholder_must_be_set(monkeypatch):
    monkeypatch.delenv("BOREL_RESUM_TEST_DIR", raising=False)
    with pytest.raises(ValueError, match="BOREL_RESUM_TEST_DIR"):
        substitute_env_vars("${BOREL_RESUM_TEST_DIR}")


def test_non_strings_pass_through():
    assert substitute_env_vars({"n": 3, "x": [1.5, None]}) == {"n": 3, "x": [1.5, None]}


def test_repository_config_is_valid():
    config = get_config("config/config.yaml")
    assert config.quadrature.rule is QuadratureRule.ADAPTIVE_EXP_TAIL
    assert config.scan.grid_points_per_decade >= 20
    assert config.fixed_point.p_window == (0.3, 3.0)


def test_config_file_with_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("BOREL_RESUM_OUTPUT_DIR", str(tmp_path / "elsewhere"))
    path = tmp_path / "config.yaml"
    path.write_text("storage:\n  output_dir: ${BOREL_RESUM_OUTPUT_DIR:-reports}\n", encoding="utf-8")
    assert get_config(str(path)).storage.output_dir == str(tmp_path / "elsewhere")


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        get_config(str(tmp_path / "absent.yaml"))


def test_scan_window_must_be_ordered():
    with pytest.raises(ValidationError, match="p_min"):
        FullConfig(scan={"p_min": 10.0, "p_max": 1.0})


def test_scan_config_overrides_window():
    config = FullConfig()
    scan = config.scan_config(10.0, p_min=0.1)
    assert scan.lambda0 == 10.0
    assert scan.p_min == 0.1
    assert scan.p_max == config.scan.p_max
    assert scan.quad == config.quadrature.to_spec()
