"""
Settings loading and runtime detection
"""

import pytest

from utils.settings import DEFAULTS_PATH, Settings, get_settings, load_settings
from utils.system_manager import THREADS_ENV, RuntimeManager


class TestSettings:

    def test_bundled_defaults_match_dataclass(self):
        assert DEFAULTS_PATH.exists()
        assert load_settings() == Settings()

    def test_singleton(self):
        assert get_settings() is get_settings()

    def test_overrides(self):
        base = Settings()
        tuned = base.with_overrides({'tol_analytic': 1e-10})
        assert tuned.tol_analytic == 1e-10
        assert tuned.tol_quadrature == base.tol_quadrature
        assert base.tol_analytic == 1e-12
        assert base.with_overrides({}) is base

    @pytest.mark.parametrize("overrides", [{'system_residual': 1e-3}, {'tol_quadrature': 0.0}, {'tol_analytic': -1}])
    def test_rejected_overrides(self, overrides):
        with pytest.raises(ValueError):
            Settings().with_overrides(overrides)

    def test_partial_yaml(self, tmp_path):
        path = tmp_path / 'settings.yaml'
        path.write_text(
            "tolerances:\n"
            "  tol_quadrature: 1.0e-7\n"
            "discretization:\n"
            "  ode_grids: [50, 100]\n"
            "sweep:\n"
            "  grid_re: [-1, 1, 3]\n"
        )
        settings = load_settings(path)
        assert settings.tol_quadrature == 1e-7
        assert settings.ode_grids == (50, 100)
        assert settings.sweep_grid_re == (-1.0, 1.0, 3)
        assert settings.tol_analytic == Settings().tol_analytic

    def test_empty_yaml(self, tmp_path):
        path = tmp_path / 'empty.yaml'
        path.write_text("")
        assert load_settings(path) == Settings()


class TestRuntimeManager:

    def test_explicit_threads_win(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, '7')
        assert RuntimeManager().resolve_threads(3) == 3

    def test_environment_threads(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, '7')
        assert RuntimeManager().resolve_threads() == 7

    def test_cpu_count_fallback(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        manager = RuntimeManager()
        assert manager.resolve_threads() == manager.device_info['cpu_count'] >= 1

    @pytest.mark.parametrize("value", ['zero', '0', '-2'])
    def test_invalid_environment(self, monkeypatch, value):
        monkeypatch.setenv(THREADS_ENV, value)
        with pytest.raises(ValueError):
            RuntimeManager().resolve_threads()

    def test_invalid_request(self):
        with pytest.raises(ValueError):
            RuntimeManager().resolve_threads(0)

    def test_memory_check(self):
        manager = RuntimeManager()
        manager.device_info['ram_available_gb'] = 1.0
        ok, _ = manager.check_memory_requirement(1000)
        assert ok
        ok, message = manager.check_memory_requirement(100000)
        assert not ok
        assert 'Reduce' in message
        assert manager.estimate_dense_gb(1024) == pytest.approx(6 * 16 / 1024)

    def test_info_string(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, '2')
        text = RuntimeManager().get_info_string()
        assert 'CPU Cores' in text
        assert 'Threads: 2' in text
