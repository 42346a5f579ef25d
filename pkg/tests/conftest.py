"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from decoybb84.decoy import Intensities
from decoybb84.optimizer import OptimizerSettings, derive_operating_point
from decoybb84.simulator import ChannelModel


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@pytest.fixture
def rng() -> np.random.Generator:
    return philox(12345)


@pytest.fixture
def intens2() -> Intensities:
    return Intensities(values=(0.5, 0.1), probabilities=(0.7, 0.3))


@pytest.fixture
def intens3() -> Intensities:
    return Intensities(values=(0.6, 0.2, 0.05), probabilities=(0.6, 0.25, 0.15))


def operating_point(
    channel: ChannelModel,
    num_signals: int = 200_000,
    mode: str = "1decoy",
    margin: float = 0.2,
    leak_margin: float = 0.35,
    eps_cor: float = 1e-12,
    eps_sec_prime: float = 1e-9,
):
    """A tuned protocol parameter set for the given channel: acceptance
    thresholds at (1 - margin) of the expected decoy bounds."""
    settings = OptimizerSettings(
        num_signals=num_signals,
        eps_cor=eps_cor,
        eps_sec_prime=eps_sec_prime,
        mode=mode,
        margin=margin,
        block_margin=0.12,
        leak_margin=leak_margin,
    )
    if mode == "1decoy":
        intens = Intensities(values=(0.8, 0.25), probabilities=(0.5, 0.5))
    else:
        intens = Intensities(values=(0.8, 0.25, 0.05), probabilities=(0.5, 0.3, 0.2))
    point = derive_operating_point(intens, 0.6, channel, settings)
    assert point is not None, "test operating point must be feasible"
    return point
