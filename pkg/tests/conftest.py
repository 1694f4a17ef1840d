"""
Test Configuration and Fixtures

Shared instances and configs for the test suite. Random instances come from
the same seeded streams the harness uses, so every test is deterministic.
"""

from typing import Callable

import numpy as np
import pytest

from app.baselines.constraints import ConstraintMode
from app.channel.models import MacInstance, make_instance
from app.channel.sampling import channel_stream, random_instance
from app.experiments.schemas import ExperimentConfig, ExperimentKind


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for ad-hoc random matrices."""
    return channel_stream(1234)


@pytest.fixture
def scalar_mac() -> MacInstance:
    """Two scalar users, h = 1 and P = 1 each: sum capacity ln 3."""
    return make_instance([np.array([[1.0]]), np.array([[1.0]])], [[1.0], [1.0]])


@pytest.fixture
def rayleigh_instance() -> Callable[..., MacInstance]:
    """
    Factory for seeded Rayleigh instances.

    Example:
        def test_something(rayleigh_instance):
            instance = rayleigh_instance(users=3, rx=4, tx=4, power=0.5, realization=2)
    """

    def factory(users: int = 2, rx: int = 4, tx: int = 4, power: float = 0.5, seed: int = 0, realization: int = 0) -> MacInstance:
        budgets = [np.full(tx, power) for _ in range(users)]
        return random_instance(seed, realization, rx, budgets)

    return factory


@pytest.fixture
def small_config() -> Callable[..., ExperimentConfig]:
    """Factory for quick experiment configs (2x2 channels, two realizations)."""

    def factory(kind: ExperimentKind, **overrides) -> ExperimentConfig:
        values = dict(
            kind=kind,
            users=[2],
            rx=2,
            tx=2,
            power=[0.5],
            constraint=ConstraintMode.PER_ANTENNA_EQUAL,
            realizations=2,
            seed=11,
            tol_bits=1e-6,
            max_iters=30,
            snr_db=[0.0, 10.0],
            workers=1,
            region_points=5,
        )
        values.update(overrides)
        return ExperimentConfig(**values)

    return factory
