"""
Synthetic Crack Generator
Noisy textured backgrounds with thin dark random-walk cracks
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from dataset.corpus import ImageSample

logger = logging.getLogger(__name__)


class SynthesisError(ValueError):
    """Raised for invalid generator settings or unreachable crack fractions"""


@dataclass(frozen=True)
class SynthConfig:
    """
    Settings for a synthetic crack corpus
    """
    count: int
    height: int
    width: int
    strokes: tuple = (1, 3)
    stroke_width: tuple = (1, 2)
    crack_fraction: tuple = (0.01, 0.05)
    noise_amplitude: float = 0.08
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.crack_fraction
        if self.count < 0:
            raise SynthesisError(f"count must be >= 0, got {self.count}")
        if self.height < 1 or self.width < 1:
            raise SynthesisError(f"image size must be positive, got {self.height}x{self.width}")
        if not 0.0 < lo <= hi < 0.5:
            raise SynthesisError(f"target crack fraction {self.crack_fraction} must lie within (0, 0.5)")
        if not 1 <= self.strokes[0] <= self.strokes[1]:
            raise SynthesisError(f"strokes-per-image range {self.strokes} is invalid")
        if not 1 <= self.stroke_width[0] <= self.stroke_width[1]:
            raise SynthesisError(f"stroke-width range {self.stroke_width} is invalid")
        if self.noise_amplitude < 0:
            raise SynthesisError(f"noise amplitude must be >= 0, got {self.noise_amplitude}")


class CrackSynthesizer:
    """
    Generates images whose masks mark exactly the painted crack pixels
    """

    MAX_ATTEMPTS = 25
    TURN_SIGMA = 0.35
    NOISE_CELL = 8
    BASE_LEVEL = 0.62
    CRACK_LEVEL = 0.12

    def __init__(self, config):
        """
        Initialize synthesizer

        Args:
            config: SynthConfig
        """
        self.config = config
        self.rng = np.random.default_rng(config.seed)

        logger.info(f"Crack Synthesizer initialized ({config.count} x {config.height}x{config.width}, seed {config.seed})")

    def _stamp(self, mask, y, x, width):
        top = y - (width - 1) // 2
        left = x - (width - 1) // 2
        y0, y1 = max(top, 0), min(top + width, mask.shape[0])
        x0, x1 = max(left, 0), min(left + width, mask.shape[1])
        region = mask[y0:y1, x0:x1]
        added = int(region.size - np.count_nonzero(region))
        region[...] = 1
        return added

    def _paint_mask(self, target):
        height, width = self.config.height, self.config.width
        mask = np.zeros((height, width), dtype=np.uint8)

        n_strokes = int(self.rng.integers(self.config.strokes[0], self.config.strokes[1] + 1))
        goal = target * height * width
        count = 0
        max_steps = 4 * height * width

        for stroke in range(n_strokes):
            brush = int(self.rng.integers(self.config.stroke_width[0], self.config.stroke_width[1] + 1))
            quota = goal * (stroke + 1) / n_strokes
            y, x = int(self.rng.integers(height)), int(self.rng.integers(width))
            heading = self.rng.uniform(0.0, 2.0 * math.pi)
            steps = 0

            count += self._stamp(mask, y, x, brush)
            while count < quota and steps < max_steps:
                heading += self.rng.normal(0.0, self.TURN_SIGMA)
                # 8-connected move: one of |sin|, |cos| always rounds to 1
                ny = y + int(np.rint(math.sin(heading)))
                nx = x + int(np.rint(math.cos(heading)))
                steps += 1

                if not (0 <= ny < height and 0 <= nx < width):
                    # walked off the image: continue the stroke from a fresh point
                    ny, nx = int(self.rng.integers(height)), int(self.rng.integers(width))
                    heading = self.rng.uniform(0.0, 2.0 * math.pi)

                y, x = ny, nx
                count += self._stamp(mask, y, x, brush)

        return mask, count

    def _background(self):
        height, width = self.config.height, self.config.width
        amplitude = self.config.noise_amplitude
        cell = self.NOISE_CELL

        coarse = self.rng.uniform(size=(height // cell + 2, width // cell + 2))
        texture = ndimage.zoom(coarse, cell, order=1)[:height, :width]
        tint = self.rng.uniform(-0.03, 0.03, size=3)
        grain = self.rng.normal(0.0, amplitude / 2.0, size=(height, width, 3))

        base = self.BASE_LEVEL + amplitude * 2.0 * (texture - 0.5)
        return base[:, :, None] + tint[None, None, :] + grain

    def generate_sample(self, index):
        """
        Generate one sample

        Args:
            index: Sample number, used for the id

        Returns:
            ImageSample
        """
        lo, hi = self.config.crack_fraction
        total = self.config.height * self.config.width

        for attempt in range(self.MAX_ATTEMPTS):
            target = self.rng.uniform(lo, hi)
            mask, count = self._paint_mask(target)
            if lo <= count / total <= hi:
                break
            logger.debug(f"Sample {index}: attempt {attempt + 1} realized {count / total:.4f}, retrying")
        else:
            raise SynthesisError(
                f"Sample {index}: crack fraction stayed outside {self.config.crack_fraction} "
                f"after {self.MAX_ATTEMPTS} attempts"
            )

        pixels = self._background()
        crack = mask.astype(bool)
        pixels[crack] = self.CRACK_LEVEL + self.rng.normal(
            0.0, self.config.noise_amplitude / 2.0, size=(int(count), 3)
        )

        return ImageSample(f"synth_{index:04d}", np.clip(pixels, 0.0, 1.0), mask)

    def generate(self):
        """
        Generate the whole corpus

        Returns:
            List of ImageSample
        """
        samples = [self.generate_sample(i) for i in range(self.config.count)]

        if samples:
            fraction = sum(s.mask.sum() for s in samples) / sum(s.mask.size for s in samples)
            logger.info(f"Generated {len(samples)} synthetic samples, crack fraction {fraction:.4f}")

        return samples


def gen_synthetic(config):
    """
    Generate a deterministic synthetic corpus

    Args:
        config: SynthConfig

    Returns:
        List of ImageSample
    """
    return CrackSynthesizer(config).generate()
