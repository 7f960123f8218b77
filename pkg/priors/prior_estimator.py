"""
Prior Estimator
Per-position class frequencies from training masks, smoothed into priors
"""

import logging
from dataclasses import dataclass

import numpy as np

from dataset.netpbm import read_pmap, write_pmap

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 1.0
SUM_TOLERANCE = 1e-12


class PriorError(ValueError):
    """Raised for empty or inconsistent mask collections and bad prior maps"""


@dataclass(frozen=True)
class PriorMap:
    """
    H x W x 2 class priors (channel 0 background, 1 crack)
    """
    priors: np.ndarray

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=np.float64)
        if priors.ndim != 3 or priors.shape[2] != 2:
            raise PriorError(f"PriorMap needs shape H x W x 2, got {priors.shape}")
        if np.any(priors <= 0.0) or np.any(priors >= 1.0):
            raise PriorError("PriorMap entries must lie strictly inside (0, 1)")
        if np.any(np.abs(priors.sum(axis=2) - 1.0) > SUM_TOLERANCE):
            raise PriorError("PriorMap positions must sum to 1")
        object.__setattr__(self, 'priors', priors)

    @property
    def crack(self):
        return self.priors[:, :, 1]

    @property
    def shape(self):
        return self.priors.shape[:2]


@dataclass(frozen=True)
class GlobalFrequencies:
    """
    Pooled, unsmoothed class pixel fractions
    """
    f_background: float
    f_crack: float


def _stack_masks(masks):
    if len(masks) == 0:
        raise PriorError("Cannot estimate frequencies from an empty mask list")

    shape = np.asarray(masks[0]).shape
    for i, mask in enumerate(masks):
        if np.asarray(mask).shape != shape:
            raise PriorError(f"Mask {i} has shape {np.asarray(mask).shape}, expected {shape}")

    return np.stack([np.asarray(m).astype(bool) for m in masks])


def frequency_map(masks, alpha=DEFAULT_ALPHA):
    """
    Laplace-smoothed per-position class priors

    prior_c(i, j) = (count_c(i, j) + alpha) / (N + 2 alpha)

    Args:
        masks: Training masks of one shared shape
        alpha: Smoothing pseudo-count (> 0)

    Returns:
        PriorMap
    """
    if alpha <= 0:
        raise PriorError(f"Smoothing alpha must be positive, got {alpha}")

    stack = _stack_masks(masks)
    n = stack.shape[0]
    crack_count = stack.sum(axis=0, dtype=np.int64)

    denominator = n + 2.0 * alpha
    crack = (crack_count + alpha) / denominator
    background = (n - crack_count + alpha) / denominator

    logger.info(f"Frequency map estimated from {n} masks (alpha {alpha})")
    return PriorMap(np.stack([background, crack], axis=2))


def global_frequencies(masks):
    """
    Pooled pixel fraction per class

    Args:
        masks: Non-empty list of masks (shapes may differ)

    Returns:
        GlobalFrequencies
    """
    if len(masks) == 0:
        raise PriorError("Cannot compute frequencies of an empty mask list")

    crack = sum(int(np.count_nonzero(m)) for m in masks)
    total = sum(np.asarray(m).size for m in masks)

    return GlobalFrequencies(f_background=(total - crack) / total, f_crack=crack / total)


def estimate_priors(masks, shape, alpha=DEFAULT_ALPHA):
    """
    Per-position priors, or the smoothed global prior when resolutions differ

    Args:
        masks: Training masks
        shape: (H, W) of the map to produce
        alpha: Smoothing pseudo-count

    Returns:
        PriorMap of the requested shape
    """
    shape = tuple(shape)
    if masks and all(np.asarray(m).shape == shape for m in masks):
        return frequency_map(masks, alpha)

    if len(masks) == 0:
        raise PriorError("Cannot estimate priors from an empty mask list")

    crack = sum(int(np.count_nonzero(m)) for m in masks)
    total = sum(np.asarray(m).size for m in masks)
    p_crack = (crack + alpha) / (total + 2.0 * alpha)
    p_background = (total - crack + alpha) / (total + 2.0 * alpha)

    logger.warning(f"Mask resolutions differ from {shape}: broadcasting global prior {p_crack:.4f}")

    priors = np.empty(shape + (2,))
    priors[:, :, 0] = p_background
    priors[:, :, 1] = p_crack
    return PriorMap(priors)


def save_priors(prior_map, path):
    """Persist a PriorMap as PMAP (C = 2)"""
    write_pmap(prior_map.priors, path)
    logger.info(f"Priors saved: {path}")


def load_priors(path):
    """Load a PriorMap from PMAP"""
    array = read_pmap(path)
    if array.shape[2] != 2:
        raise PriorError(f"{path}: expected 2 channels, found {array.shape[2]}")
    return PriorMap(array)
