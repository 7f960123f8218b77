"""
Corpus
Image samples, corpus directories and deterministic train/val/test splits
"""

import logging
import os
from dataclasses import dataclass

import numpy as np

from dataset.netpbm import load_image, load_mask, save_image, save_mask

logger = logging.getLogger(__name__)

IMAGE_SUFFIX = '.ppm'
MASK_SUFFIX = '_mask.pgm'

MIN_SPLIT_SIZE = 5


class CorpusError(ValueError):
    """Raised when a corpus directory or sample is inconsistent"""


class SplitError(ValueError):
    """Raised when a corpus cannot populate all three partitions"""


@dataclass(frozen=True)
class ImageSample:
    """
    One RGB image with its binary crack mask
    """
    id: str
    pixels: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        mask = np.asarray(self.mask)

        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise CorpusError(f"Sample {self.id}: pixels must be H x W x 3, got {pixels.shape}")
        if mask.shape != pixels.shape[:2]:
            raise CorpusError(
                f"Sample {self.id}: mask {mask.shape} does not match image {pixels.shape[:2]}"
            )
        if not np.all((mask == 0) | (mask == 1)):
            raise CorpusError(f"Sample {self.id}: mask cells must be 0 or 1")

        object.__setattr__(self, 'pixels', pixels)
        object.__setattr__(self, 'mask', mask.astype(np.uint8))

    @property
    def shape(self):
        return self.mask.shape

    @property
    def crack_fraction(self):
        return float(self.mask.mean())


@dataclass(frozen=True)
class DatasetSplit:
    """
    Disjoint train/validation/test id lists
    """
    train: list
    val: list
    test: list
    seed: int

    def to_dict(self):
        return {'seed': self.seed, 'train': list(self.train), 'val': list(self.val), 'test': list(self.test)}


def load_sample(image_path, mask_path, sample_id):
    """
    Load and pair one image with its mask

    Args:
        image_path: P6 image path
        mask_path: P5 mask path
        sample_id: Identifier

    Returns:
        ImageSample
    """
    pixels = load_image(image_path)
    mask = load_mask(mask_path)

    if mask.shape != pixels.shape[:2]:
        raise CorpusError(
            f"Sample {sample_id}: mask {mask.shape} does not match image {pixels.shape[:2]}"
        )

    return ImageSample(sample_id, pixels, mask)


def load_corpus(directory):
    """
    Load every `<id>.ppm` / `<id>_mask.pgm` pair in a directory

    Args:
        directory: Corpus directory

    Returns:
        List of ImageSample sorted by id
    """
    if not os.path.isdir(directory):
        raise CorpusError(f"Corpus directory not found: {directory}")

    ids = sorted(
        name[:-len(IMAGE_SUFFIX)]
        for name in os.listdir(directory)
        if name.endswith(IMAGE_SUFFIX)
    )

    samples = []
    for sample_id in ids:
        mask_path = os.path.join(directory, sample_id + MASK_SUFFIX)
        if not os.path.exists(mask_path):
            raise CorpusError(f"Sample {sample_id}: mask file {mask_path} is missing")
        samples.append(load_sample(os.path.join(directory, sample_id + IMAGE_SUFFIX), mask_path, sample_id))

    logger.info(f"Corpus loaded from {directory}: {len(samples)} samples")
    return samples


def save_corpus(samples, directory):
    """
    Write samples as P6/P5 pairs

    Args:
        samples: List of ImageSample
        directory: Output directory (created if needed)

    Returns:
        Manifest dictionary with ids and realized crack fractions
    """
    os.makedirs(directory, exist_ok=True)

    crack_pixels = 0
    total_pixels = 0
    entries = []

    for sample in samples:
        save_image(sample.pixels, os.path.join(directory, sample.id + IMAGE_SUFFIX))
        save_mask(sample.mask, os.path.join(directory, sample.id + MASK_SUFFIX))

        crack_pixels += int(sample.mask.sum())
        total_pixels += sample.mask.size
        entries.append({'id': sample.id, 'crack-fraction': sample.crack_fraction})

    manifest = {
        'count': len(samples),
        'ids': [sample.id for sample in samples],
        'crack-fraction': crack_pixels / total_pixels if total_pixels else 0.0,
        'samples': entries,
    }

    logger.info(f"Corpus written to {directory}: {len(samples)} samples")
    return manifest


def _round_fifth(n):
    # round-half-up of n / 5 in integer arithmetic
    return (2 * n + 5) // 10


def split_dataset(ids, seed):
    """
    Shuffle ids and cut test, validation and training partitions

    test = round(0.2 N), val = round(0.2 (N - test)), train = remainder,
    with round-half-up at each stage.

    Args:
        ids: Sample identifiers
        seed: Shuffle seed

    Returns:
        DatasetSplit
    """
    ids = list(ids)
    n = len(ids)
    if n < MIN_SPLIT_SIZE:
        raise SplitError(f"Need at least {MIN_SPLIT_SIZE} samples to split, got {n}")

    n_test = _round_fifth(n)
    n_val = _round_fifth(n - n_test)

    order = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in order]

    split = DatasetSplit(
        train=shuffled[n_test + n_val:],
        val=shuffled[n_test:n_test + n_val],
        test=shuffled[:n_test],
        seed=seed,
    )

    logger.info(f"Split {n} samples: train {len(split.train)}, val {len(split.val)}, test {len(split.test)}")
    return split
