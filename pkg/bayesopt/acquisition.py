"""
Acquisition
Expected improvement for maximization and candidate-set proposals
"""

import logging

import numpy as np
from scipy.stats import norm

from bayesopt.gaussian_process import gp_posterior_batch

logger = logging.getLogger(__name__)

N_CANDIDATES = 2048


def expected_improvement(mean, variance, best):
    """
    EI = (mu - f*) Phi(z) + sigma phi(z), z = (mu - f*) / sigma

    Args:
        mean: Posterior mean (scalar or array)
        variance: Posterior variance, >= 0
        best: Best observation so far

    Returns:
        EI, same shape as mean; max(mu - f*, 0) where the variance is 0
    """
    mean = np.asarray(mean, dtype=np.float64)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=np.float64), 0.0))
    gain = mean - best

    safe_sigma = np.where(sigma > 0.0, sigma, 1.0)
    z = gain / safe_sigma
    ei = np.where(sigma > 0.0, gain * norm.cdf(z) + sigma * norm.pdf(z), np.maximum(gain, 0.0))
    ei = np.maximum(ei, 0.0)

    return float(ei) if ei.ndim == 0 else ei


def propose_next(gp, seed, n_candidates=N_CANDIDATES):
    """
    Argmax of EI over seeded uniform candidates, lowest index on ties

    Args:
        gp: GpState with at least one observation
        seed: Candidate seed
        n_candidates: Candidate count

    Returns:
        Point in the unit hypercube
    """
    rng = np.random.default_rng(seed)
    candidates = rng.uniform(size=(n_candidates, gp.dims))

    means, variances = gp_posterior_batch(gp, candidates)
    ei = expected_improvement(means, variances, float(np.max(gp.y)))

    index = int(np.argmax(ei))
    logger.debug(f"Proposal {index}: EI {ei[index]:.3g}")
    return candidates[index]
