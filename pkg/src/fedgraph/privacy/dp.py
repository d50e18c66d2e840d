"""Update clipping and the Gaussian mechanism."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ContractViolation

CLIP_SLACK = 1e-9


def clip_update(delta, S):
    """Scale ``delta`` by ``min(1, S / ||delta||)``."""
    if S <= 0:
        raise ConfigError("clip norm must be positive")
    delta = np.asarray(delta, dtype=np.float64)
    norm = float(np.linalg.norm(delta))
    if norm <= S:
        return delta.copy()
    return delta * (S / norm)


def noise_sigma(S, epsilon, delta):
    """Noise multiplier ``(S / eps) * sqrt(2 ln(1.25 / delta))``."""
    if S <= 0 or epsilon <= 0 or not 0 < delta < 1:
        raise ConfigError("need S > 0, epsilon > 0 and delta in (0, 1)")
    return S / epsilon * math.sqrt(2.0 * math.log(1.25 / delta))


def implied_epsilon(sigma, S, delta):
    """Inverse of :func:`noise_sigma`: the per-round epsilon a given sigma buys."""
    if sigma <= 0:
        return math.inf
    return S / sigma * math.sqrt(2.0 * math.log(1.25 / delta))


@dataclass(frozen=True)
class DPNoiseConfig:
    """Clip norm, per-round budget and an optional fixed noise multiplier.

    The mechanism adds noise with per-coordinate standard deviation
    ``sigma * S``. ``sigma`` is ``sigma_override`` when set, else
    :func:`noise_sigma` of ``(S, epsilon, delta)``.
    """

    clip_norm: float = 1.0
    epsilon: float = 1.0
    delta: float = 1e-5
    sigma_override: float | None = None

    def __post_init__(self):
        if self.clip_norm <= 0 or self.epsilon <= 0 or not 0 < self.delta < 1:
            raise ConfigError("need clip_norm > 0, epsilon > 0 and delta in (0, 1)")
        if self.sigma_override is not None and self.sigma_override < 0:
            raise ConfigError("sigma override must be >= 0")

    @property
    def sigma(self):
        if self.sigma_override is not None:
            return float(self.sigma_override)
        return noise_sigma(self.clip_norm, self.epsilon, self.delta)

    @property
    def noise_std(self):
        return self.sigma * self.clip_norm

    @property
    def effective_epsilon(self):
        """Per-round epsilon actually delivered by the configured noise."""
        return implied_epsilon(self.sigma, self.clip_norm, self.delta)


def gaussian_mechanism(delta, config: DPNoiseConfig, rng):
    """Add ``N(0, (sigma S)^2 I)`` to an update already clipped to norm ``S``."""
    delta = np.asarray(delta, dtype=np.float64)
    norm = float(np.linalg.norm(delta))
    if norm > config.clip_norm + CLIP_SLACK:
        raise ContractViolation(f"update norm {norm:.6g} exceeds clip norm {config.clip_norm}")
    std = config.noise_std
    if std == 0:
        return delta.copy()
    return delta + rng.normal(0.0, std, size=delta.shape)
