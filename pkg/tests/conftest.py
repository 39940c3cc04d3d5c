import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from data import GeneratorConfig, generate_var_dataset  # noqa: E402
from model import ModelConfig  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_cfg():
    """T=8, N=3, D=4, H=2: small enough for finite-difference checks"""
    return ModelConfig(n_nodes=3, n_points=8, embed_dim=4, n_heads=2, dropout_rate=0.0)


@pytest.fixture
def small_cfg():
    return ModelConfig(n_nodes=4, n_points=16, embed_dim=8, n_heads=2, dropout_rate=0.2)


@pytest.fixture
def tiny_dataset():
    """sim1 with 4 subjects of 16 points"""
    return generate_var_dataset(GeneratorConfig(topology='sim1', n_subjects=4, n_points=16, seed=7))


@pytest.fixture
def quiet_env(monkeypatch):
    monkeypatch.delenv('FSTA_THREADS', raising=False)
