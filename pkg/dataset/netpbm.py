"""
Netpbm and PMAP Codecs
Reads and writes binary P6/P5 images and the PMAP float grid format
"""

import io
import logging

import numpy as np
from PIL import Image

from decision.prob_map import ProbMap

logger = logging.getLogger(__name__)

PMAP_MAGIC = b'PMAP'
PMAP_HEADER_SIZE = 16

# Largest payload a PMAP header may declare (16 GiB)
MAX_PMAP_PAYLOAD = 1 << 34

MASK_CUT = 128


class NetpbmFormatError(ValueError):
    """Raised when a P5/P6 file violates the accepted format"""


class ProbMapFormatError(ValueError):
    """Raised when a PMAP file is malformed"""


def _read_header(data, magic, path):
    """
    Parse a binary netpbm header

    Args:
        data: Raw file bytes
        magic: Expected magic number (b'P6' or b'P5')
        path: File path, for error messages

    Returns:
        Tuple (width, height, maxval, payload_offset)
    """
    if data[:2] != magic:
        raise NetpbmFormatError(
            f"{path}: magic number {data[:2]!r} is not {magic.decode()}"
        )

    fields = []
    pos = 2
    names = ('width', 'height', 'maxval')

    while len(fields) < 3:
        # Whitespace and comments between header fields
        while pos < len(data) and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b'#'):
            if data[pos:pos + 1] == b'#':
                end = data.find(b'\n', pos)
                pos = len(data) if end < 0 else end + 1
            else:
                pos += 1

        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1

        name = names[len(fields)]
        if start == pos:
            raise NetpbmFormatError(f"{path}: header field {name} is missing or not a number")
        fields.append(int(data[start:pos]))

    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise NetpbmFormatError(f"{path}: header field maxval is not followed by whitespace")

    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise NetpbmFormatError(f"{path}: width/height must be positive, got {width}x{height}")
    if maxval != 255:
        raise NetpbmFormatError(f"{path}: maxval {maxval} is not 255 (only 8-bit files are accepted)")

    return width, height, maxval, pos + 1


def _decode(path, magic, channels):
    with open(path, 'rb') as fh:
        data = fh.read()

    width, height, maxval, offset = _read_header(data, magic, path)

    expected = width * height * channels
    available = len(data) - offset
    if available < expected:
        raise NetpbmFormatError(
            f"{path}: payload truncated ({available} of {expected} bytes)"
        )

    image = Image.open(io.BytesIO(data))
    image.load()
    return np.asarray(image, dtype=np.uint8), maxval


def load_image(path):
    """
    Load a binary P6 pixmap

    Args:
        path: Path to a .ppm file

    Returns:
        float64 array H x W x 3 with intensities in [0, 1]
    """
    raw, maxval = _decode(path, b'P6', 3)
    return raw.astype(np.float64) / maxval


def load_mask(path):
    """
    Load a binary P5 graymap as a crack mask

    Cells >= 128 are crack (1), all others background (0).

    Args:
        path: Path to a .pgm file

    Returns:
        uint8 array H x W with values in {0, 1}
    """
    raw, _ = _decode(path, b'P5', 1)
    return (raw >= MASK_CUT).astype(np.uint8)


def save_image(pixels, path):
    """
    Save an H x W x 3 intensity grid as P6

    Args:
        pixels: Intensities in [0, 1]
        path: Output path
    """
    data = np.clip(np.rint(np.asarray(pixels) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path, format='PPM')


def save_mask(mask, path):
    """
    Save a {0, 1} mask as a P5 graymap with values {0, 255}

    Args:
        mask: H x W label grid
        path: Output path
    """
    data = np.where(np.asarray(mask) > 0, 255, 0).astype(np.uint8)
    Image.fromarray(data).save(path, format='PPM')


def write_pmap(array, path):
    """
    Write an H x W x C float grid in PMAP format

    Layout: b'PMAP', three little-endian uint32 (H, W, C), then H*W*C
    little-endian float64 values, row-major, channel fastest.

    Args:
        array: 3-D array
        path: Output path
    """
    array = np.asarray(array, dtype=np.float64)
    if array.ndim != 3:
        raise ProbMapFormatError(f"PMAP needs a 3-D array, got shape {array.shape}")

    header = np.array(array.shape, dtype='<u4').tobytes()
    payload = np.ascontiguousarray(array, dtype='<f8').tobytes()

    with open(path, 'wb') as fh:
        fh.write(PMAP_MAGIC + header + payload)

    logger.debug(f"PMAP written: {path} {array.shape}")


def read_pmap(path):
    """
    Read a PMAP file

    Args:
        path: Input path

    Returns:
        float64 array H x W x C
    """
    with open(path, 'rb') as fh:
        data = fh.read()

    if len(data) < PMAP_HEADER_SIZE:
        raise ProbMapFormatError(f"{path}: header truncated ({len(data)} bytes)")
    if data[:4] != PMAP_MAGIC:
        raise ProbMapFormatError(f"{path}: bad magic {data[:4]!r}")

    height, width, channels = (int(v) for v in np.frombuffer(data[4:16], dtype='<u4'))
    payload_size = height * width * channels * 8
    if payload_size > MAX_PMAP_PAYLOAD:
        raise ProbMapFormatError(
            f"{path}: dimension overflow ({height}x{width}x{channels})"
        )

    payload = data[PMAP_HEADER_SIZE:]
    if len(payload) != payload_size:
        raise ProbMapFormatError(
            f"{path}: payload length {len(payload)} does not match {payload_size}"
        )

    values = np.frombuffer(payload, dtype='<f8').astype(np.float64)
    return values.reshape(height, width, channels)


def save_probmap(prob_map, path):
    """
    Persist a ProbMap (C = 2) in PMAP format

    Args:
        prob_map: ProbMap instance
        path: Output path
    """
    write_pmap(prob_map.probs, path)


def load_probmap(path):
    """
    Load a ProbMap from a PMAP file

    Args:
        path: Input path

    Returns:
        ProbMap
    """
    array = read_pmap(path)
    if array.shape[2] != 2:
        raise ProbMapFormatError(f"{path}: expected 2 channels, found {array.shape[2]}")
    return ProbMap(array)
