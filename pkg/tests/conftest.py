"""
Shared fixtures: src on sys.path, small providers and the bundled specs
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, os.path.join(ROOT, 'src'))

from models import cauchy_riemann as cr  # noqa: E402
from models import ode_oscillator as ode  # noqa: E402

SPECS_DIR = ROOT / 'specs'


@pytest.fixture(scope='session')
def specs_dir() -> Path:
    return SPECS_DIR


@pytest.fixture(scope='session')
def ode_provider():
    return ode.create_provider(64)


@pytest.fixture(scope='session')
def cr_provider():
    return cr.create_provider(8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
