"""
Class Weights
Uniform and median-frequency loss weights for training observations
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from priors.prior_estimator import global_frequencies

logger = logging.getLogger(__name__)

UNIFORM = 'uw'
MEDIAN_FREQUENCY = 'mfw'


class WeightError(ValueError):
    """Raised when weights are undefined or invalid"""


@dataclass(frozen=True)
class ClassWeights:
    """
    Per-class loss multipliers
    """
    w_background: float
    w_crack: float

    def __post_init__(self):
        for name in ('w_background', 'w_crack'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise WeightError(f"{name} must be positive and finite, got {value}")

    def as_array(self):
        return np.array([self.w_background, self.w_crack])

    def scaled(self, factor):
        return ClassWeights(self.w_background * factor, self.w_crack * factor)

    def to_dict(self):
        return {'background': self.w_background, 'crack': self.w_crack}


def uniform_weights():
    return ClassWeights(1.0, 1.0)


def median_frequency_weights(freqs):
    """
    Median frequency balancing: w_c = median(f) / f_c

    Args:
        freqs: GlobalFrequencies with both entries > 0

    Returns:
        ClassWeights
    """
    if freqs.f_background <= 0 or freqs.f_crack <= 0:
        raise WeightError(
            f"Median frequency weights need both classes present "
            f"(background {freqs.f_background}, crack {freqs.f_crack})"
        )

    median = float(np.median([freqs.f_background, freqs.f_crack]))
    weights = ClassWeights(median / freqs.f_background, median / freqs.f_crack)

    logger.info(f"Median frequency weights: background {weights.w_background:.4f}, crack {weights.w_crack:.4f}")
    return weights


def weights_for(scheme, masks):
    """
    Training weights for a weighting scheme

    Args:
        scheme: 'uw' or 'mfw'
        masks: Training masks (used by 'mfw')

    Returns:
        ClassWeights
    """
    if scheme == UNIFORM:
        return uniform_weights()
    if scheme == MEDIAN_FREQUENCY:
        return median_frequency_weights(global_frequencies(masks))
    raise WeightError(f"Unknown weighting scheme: {scheme}")
