"""
Decision Rules
Hard crack/background labels from softmax probabilities
"""

import logging

import numpy as np

from decision.prob_map import DecisionError, ProbMap

logger = logging.getLogger(__name__)

MAP = 'map'
ML = 'ml'
THRESHOLD = 'threshold'

RULES = (MAP, ML, THRESHOLD)


def threshold_rule(p, t):
    """
    Label crack where the crack probability reaches t

    Args:
        p: ProbMap
        t: Threshold in [0, 1]

    Returns:
        uint8 mask
    """
    if not 0.0 <= t <= 1.0:
        raise DecisionError(f"Threshold {t} outside [0, 1]")
    return (p.crack >= t).astype(np.uint8)


def map_rule(p):
    """
    Maximum a-posteriori labels, ties to crack

    For a normalized two-class map, p_crack >= p_background is the same
    cut as p_crack >= 0.5.

    Args:
        p: ProbMap

    Returns:
        uint8 mask
    """
    return threshold_rule(p, 0.5)


def _check_priors(p, priors):
    if priors.shape != p.shape:
        raise DecisionError(f"Priors {priors.shape} do not match probability map {p.shape}")
    crack_prior = priors.crack
    if np.any(crack_prior <= 0.0) or np.any(crack_prior >= 1.0):
        raise DecisionError("Priors must lie strictly inside (0, 1)")
    return crack_prior


def ml_rule(p, priors):
    """
    Maximum likelihood labels: argmax_c p_c / prior_c, ties to crack

    With two classes this is p_crack >= prior_crack at each position.

    Args:
        p: ProbMap
        priors: PriorMap of the same H x W

    Returns:
        uint8 mask
    """
    crack_prior = _check_priors(p, priors)
    return (p.crack >= crack_prior).astype(np.uint8)


def ml_adjust(p, priors):
    """
    Divide probabilities by the priors and renormalize

    The crack channel of the result crosses 0.5 where ml_rule switches,
    so it serves as the score for PR sweeps under the ML rule.

    Args:
        p: ProbMap
        priors: PriorMap of the same H x W

    Returns:
        ProbMap
    """
    _check_priors(p, priors)
    likelihood = p.probs / priors.priors
    total = likelihood.sum(axis=2, keepdims=True)
    # both probabilities zero cannot happen for a normalized map
    return ProbMap(likelihood / total)


def rule_scores(rule, p, priors=None):
    """
    Score map whose 0.5 cut reproduces the rule

    Args:
        rule: 'map' or 'ml'
        p: ProbMap
        priors: PriorMap (required for 'ml')

    Returns:
        ProbMap
    """
    if rule == MAP:
        return p
    if rule == ML:
        if priors is None:
            raise DecisionError("The ML rule needs a prior map")
        return ml_adjust(p, priors)
    raise DecisionError(f"No score map for rule {rule}")


def apply_rule(rule, p, priors=None, threshold=0.5):
    """
    Dispatch to a decision rule by name

    Args:
        rule: 'map', 'ml' or 'threshold'
        p: ProbMap
        priors: PriorMap (required for 'ml')
        threshold: Cut for the threshold rule

    Returns:
        uint8 mask
    """
    if rule == MAP:
        return map_rule(p)
    if rule == ML:
        if priors is None:
            raise DecisionError("The ML rule needs a prior map")
        return ml_rule(p, priors)
    if rule == THRESHOLD:
        return threshold_rule(p, threshold)
    raise DecisionError(f"Unknown decision rule: {rule}")
