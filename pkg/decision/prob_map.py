"""
Probability Map
Per-pixel two-class softmax probabilities (channel 0 background, 1 crack)
"""

from dataclasses import dataclass

import numpy as np

BACKGROUND = 0
CRACK = 1

SUM_TOLERANCE = 1e-9


class DecisionError(ValueError):
    """Raised for invalid probability maps, priors or thresholds"""


@dataclass(frozen=True)
class ProbMap:
    """
    H x W x 2 grid of class probabilities
    """
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 3 or probs.shape[2] != 2:
            raise DecisionError(f"ProbMap needs shape H x W x 2, got {probs.shape}")
        if np.any(probs < 0.0) or np.any(probs > 1.0) or not np.all(np.isfinite(probs)):
            raise DecisionError("ProbMap entries must lie in [0, 1]")
        if np.any(np.abs(probs.sum(axis=2) - 1.0) > SUM_TOLERANCE):
            raise DecisionError("ProbMap positions must sum to 1")
        object.__setattr__(self, 'probs', probs)

    @classmethod
    def from_crack(cls, crack):
        """
        Build a map from crack probabilities alone

        Args:
            crack: H x W grid of crack probabilities

        Returns:
            ProbMap with background = 1 - crack
        """
        crack = np.asarray(crack, dtype=np.float64)
        return cls(np.stack([1.0 - crack, crack], axis=2))

    @property
    def crack(self):
        return self.probs[:, :, CRACK]

    @property
    def background(self):
        return self.probs[:, :, BACKGROUND]

    @property
    def shape(self):
        return self.probs.shape[:2]
