"""
Loss
Class-weighted per-pixel cross-entropy
"""

import numpy as np

# probabilities are clipped here before the log
LOG_CLIP = 1e-12


def weighted_cross_entropy(p, truth, weights):
    """
    L = (1/HW) sum over pixels of -w_y log max(p_y, 1e-12)

    Args:
        p: ProbMap
        truth: H x W mask
        weights: ClassWeights

    Returns:
        Loss scalar
    """
    truth = np.asarray(truth).astype(np.intp)
    if truth.shape != p.shape:
        raise ValueError(f"Truth shape {truth.shape} does not match probabilities {p.shape}")

    p_true = np.take_along_axis(p.probs, truth[..., None], axis=2)[..., 0]
    pixel_weight = weights.as_array()[truth]
    return float(np.mean(-pixel_weight * np.log(np.maximum(p_true, LOG_CLIP))))


def batch_loss(prob_maps, truths, weights):
    """Mean of the per-sample losses"""
    return float(np.mean([weighted_cross_entropy(p, t, weights) for p, t in zip(prob_maps, truths)]))
