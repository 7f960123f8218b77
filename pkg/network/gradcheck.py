"""
Gradient Check
Analytic gradients against central finite differences
"""

import logging

import numpy as np

from network.loss import weighted_cross_entropy
from network.segnet import backward, forward

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5


def relative_error(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)


def check_gradients(params, image, truth, weights, h=DEFAULT_STEP):
    """
    Compare every parameter's analytic gradient with a central difference

    Args:
        params: NetParams (left unchanged)
        image: Input image
        truth: H x W mask
        weights: ClassWeights
        h: Finite-difference step

    Returns:
        Dict mapping tensor name to its maximum relative error
    """
    probs, cache = forward(params, image)
    grads = backward(params, cache, truth, weights)

    work = params.copy()
    errors = {}

    for name, tensor in work.tensors.items():
        numeric = np.zeros_like(tensor)
        for index in np.ndindex(tensor.shape):
            original = tensor[index]

            tensor[index] = original + h
            plus = weighted_cross_entropy(forward(work, image)[0], truth, weights)
            tensor[index] = original - h
            minus = weighted_cross_entropy(forward(work, image)[0], truth, weights)
            tensor[index] = original

            numeric[index] = (plus - minus) / (2.0 * h)

        errors[name] = float(relative_error(grads.tensors[name], numeric).max())
        logger.debug(f"Gradient check {name}: max relative error {errors[name]:.2e}")

    return errors
