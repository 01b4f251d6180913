"""
Settings - Threshold and discretization configuration
Defaults come from defaults.yaml, spec files override selected keys
"""

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Optional, Tuple
import logging

import yaml

logger = logging.getLogger(__name__)

DEFAULTS_PATH = Path(__file__).with_name('defaults.yaml')

# Keys a spec document may override
OVERRIDABLE = ('tol_analytic', 'tol_quadrature')


@dataclass(frozen=True)
class Settings:
    """Immutable view of all thresholds used by the verifier"""

    tol_analytic: float = 1e-12
    tol_quadrature: float = 1e-9
    system_residual: float = 1e-8
    eigen_residual: float = 1e-8
    family_match: float = 1e-9
    condition33_zero: float = 1e-13
    order_window: Tuple[float, float] = (3.0, 5.0)
    truncation_window: Tuple[float, float] = (1.1, 1.0e6)
    separation_floor: float = 1e-2
    separation_ratio: float = 10.0
    newton_max_iterations: int = 200
    newton_tolerance: float = 1e-11
    newton_jacobian_step: float = 1e-3
    newton_step_tolerance: float = 1e-9
    newton_rcond: float = 1e-11
    newton_dedup_distance: float = 1e-8
    newton_origin_radius: float = 1e-6
    newton_min_damping: float = 1e-6
    ode_grids: Tuple[int, ...] = (100, 200, 400)
    cr_truncations: Tuple[int, ...] = (8, 16, 32)
    sweep_truncation: int = 16
    test_basis_size: int = 8
    boundary_samples: int = 64
    edge_quadrature_points: int = 256
    sweep_grid_re: Tuple[float, float, int] = (-0.15, 0.15, 21)
    sweep_grid_im: Tuple[float, float, int] = (-0.15, 0.15, 21)

    def with_overrides(self, overrides: Optional[Dict[str, float]]) -> 'Settings':
        """
        Apply spec-file tolerance overrides

        Args:
            overrides: mapping of overridable keys to values

        Returns:
            Settings: new settings object

        Raises:
            ValueError: If a key is not overridable or a value is not positive
        """
        if not overrides:
            return self
        for key, value in overrides.items():
            if key not in OVERRIDABLE:
                raise ValueError(f"Setting '{key}' cannot be overridden")
            if not value > 0:
                raise ValueError(f"Tolerance '{key}' must be positive, got {value}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


def load_settings(path: Optional[Path] = None) -> Settings:
    """
    Load settings from a YAML file

    Args:
        path: YAML file (defaults to the bundled defaults.yaml)

    Returns:
        Settings: parsed settings
    """
    path = Path(path) if path else DEFAULTS_PATH
    with open(path, 'r', encoding='utf-8') as fh:
        raw = yaml.safe_load(fh) or {}

    tol = raw.get('tolerances', {})
    conv = raw.get('convergence', {})
    newton = raw.get('newton', {})
    disc = raw.get('discretization', {})
    sweep = raw.get('sweep', {})
    base = Settings()

    settings = Settings(
        tol_analytic=float(tol.get('tol_analytic', base.tol_analytic)),
        tol_quadrature=float(tol.get('tol_quadrature', base.tol_quadrature)),
        system_residual=float(tol.get('system_residual', base.system_residual)),
        eigen_residual=float(tol.get('eigen_residual', base.eigen_residual)),
        family_match=float(tol.get('family_match', base.family_match)),
        condition33_zero=float(tol.get('condition33_zero', base.condition33_zero)),
        order_window=tuple(float(v) for v in conv.get('order_window', base.order_window)),
        truncation_window=tuple(float(v) for v in conv.get('truncation_window', base.truncation_window)),
        separation_floor=float(conv.get('separation_floor', base.separation_floor)),
        separation_ratio=float(conv.get('separation_ratio', base.separation_ratio)),
        newton_max_iterations=int(newton.get('max_iterations', base.newton_max_iterations)),
        newton_tolerance=float(newton.get('tolerance', base.newton_tolerance)),
        newton_jacobian_step=float(newton.get('jacobian_step', base.newton_jacobian_step)),
        newton_step_tolerance=float(newton.get('step_tolerance', base.newton_step_tolerance)),
        newton_rcond=float(newton.get('rcond', base.newton_rcond)),
        newton_dedup_distance=float(newton.get('dedup_distance', base.newton_dedup_distance)),
        newton_origin_radius=float(newton.get('origin_radius', base.newton_origin_radius)),
        newton_min_damping=float(newton.get('min_damping', base.newton_min_damping)),
        ode_grids=tuple(int(v) for v in disc.get('ode_grids', base.ode_grids)),
        cr_truncations=tuple(int(v) for v in disc.get('cr_truncations', base.cr_truncations)),
        sweep_truncation=int(disc.get('sweep_truncation', base.sweep_truncation)),
        test_basis_size=int(disc.get('test_basis_size', base.test_basis_size)),
        boundary_samples=int(disc.get('boundary_samples', base.boundary_samples)),
        edge_quadrature_points=int(disc.get('edge_quadrature_points', base.edge_quadrature_points)),
        sweep_grid_re=(float(sweep.get('grid_re', base.sweep_grid_re)[0]),
                       float(sweep.get('grid_re', base.sweep_grid_re)[1]),
                       int(sweep.get('grid_re', base.sweep_grid_re)[2])),
        sweep_grid_im=(float(sweep.get('grid_im', base.sweep_grid_im)[0]),
                       float(sweep.get('grid_im', base.sweep_grid_im)[1]),
                       int(sweep.get('grid_im', base.sweep_grid_im)[2])),
    )
    logger.debug(f"Loaded settings from {path}")
    return settings


_settings = None


def get_settings() -> Settings:
    """
    Get the global default Settings instance (singleton)

    Returns:
        Settings: bundled defaults
    """
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings
