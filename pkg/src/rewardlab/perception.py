"""Parametric block-position estimator standing in for a learned vision model.

Two error sources, both configurable:
  * a camera-alignment error, modeled as a rigid rotation of the perceived
    position about a vertical axis through a virtual camera pivot, and
  * isotropic Gaussian noise, resampled independently every query.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# Pivot of the alignment-error rotation. Sits slightly behind the workspace so
# that a 10 degree shift displaces perceived block positions by roughly the
# 3 cm touch radius on average (a ~0.19 m mean lever arm over the block spawn
# area). A far-away pivot would displace estimates by several times the touch
# radius and turn the shift study into a pure no-signal regime.
DEFAULT_CAMERA_PIVOT = (0.0, -0.15, 0.25)

# E[chi_3] = 2 * sqrt(2 / pi): mean norm of a standard 3-D isotropic Gaussian.
CHI3_MEAN = 2.0 * math.sqrt(2.0 / math.pi)


@dataclass
class PerceptionModel:
    shift_deg: float = 0.0
    noise_std: float = 0.0
    camera_pivot: np.ndarray = field(
        default_factory=lambda: np.array(DEFAULT_CAMERA_PIVOT)
    )

    def __post_init__(self):
        if self.noise_std < 0.0:
            raise ConfigurationError(f"noise_std must be >= 0, got {self.noise_std}")
        if not math.isfinite(self.shift_deg):
            raise ConfigurationError(f"shift_deg must be finite, got {self.shift_deg}")
        self.camera_pivot = np.asarray(self.camera_pivot, dtype=np.float64)


def estimate_block_position(model: PerceptionModel, true_pos, rng) -> np.ndarray:
    """Perceived block position: rotate about the pivot, then add Gaussian noise.

    The noise draw happens unconditionally so the rng stream advances
    identically for every (shift, noise) setting.
    """
    p = np.asarray(true_pos, dtype=np.float64)
    theta = math.radians(model.shift_deg)
    if theta == 0.0:
        # Skip the pivot round-trip: (p - pivot) + pivot is not exact in
        # floating point, and zero shift must be perfectly transparent.
        biased = p
    else:
        c, s = math.cos(theta), math.sin(theta)
        rel = p - model.camera_pivot
        biased = model.camera_pivot + np.array([
            c * rel[0] - s * rel[1],
            s * rel[0] + c * rel[1],
            rel[2],
        ])
    noise = rng.normal(0.0, model.noise_std, size=3)
    return biased + noise


def calibrate_noise(target_mean_error: float) -> float:
    """Per-axis sigma whose isotropic 3-D noise has the given mean Euclidean error."""
    if target_mean_error <= 0.0:
        raise ConfigurationError(
            f"target_mean_error must be positive, got {target_mean_error}"
        )
    return target_mean_error / CHI3_MEAN
