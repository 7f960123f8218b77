"""
Model Store
NETP files: b'NETP', uint32 count n, n uint32 architecture integers
(depth, kernel size, input height, input width, input channels, convs per
block, batch-norm flag, channels...), then the float64 little-endian
parameters in layer order: weight, bias, then gamma and beta when the
flag is 1.
"""

import logging

import numpy as np

from network.segnet import ArchError, ArchSpec, NetParams

logger = logging.getLogger(__name__)

NETP_MAGIC = b'NETP'
FIXED_FIELDS = 7


class ModelFormatError(ValueError):
    """Raised when a NETP file is malformed"""


def _arch_integers(arch):
    return [
        arch.depth,
        arch.kernel_size,
        arch.input_height,
        arch.input_width,
        arch.in_channels,
        arch.convs_per_block,
        int(arch.batch_norm),
        *arch.channels,
    ]


def model_bytes(params):
    """Serialize NetParams to NETP bytes"""
    integers = _arch_integers(params.arch)
    header = np.array([len(integers)] + integers, dtype='<u4').tobytes()
    payload = b''.join(np.ascontiguousarray(v, dtype='<f8').tobytes() for v in params.tensors.values())
    return NETP_MAGIC + header + payload


def save_model(params, path):
    """
    Write a NETP model file

    Args:
        params: NetParams
        path: Output path
    """
    with open(path, 'wb') as fh:
        fh.write(model_bytes(params))
    logger.info(f"Model saved: {path} ({params.size} parameters)")


def load_model(path):
    """
    Read a NETP model file

    Args:
        path: Input path

    Returns:
        NetParams
    """
    with open(path, 'rb') as fh:
        data = fh.read()

    if data[:4] != NETP_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 8:
        raise ModelFormatError(f"{path}: header truncated")

    count = int(np.frombuffer(data[4:8], dtype='<u4')[0])
    header_end = 8 + 4 * count
    if count < FIXED_FIELDS + 1 or len(data) < header_end:
        raise ModelFormatError(f"{path}: architecture header truncated or too short ({count} fields)")

    fields = [int(v) for v in np.frombuffer(data[8:header_end], dtype='<u4')]
    depth, kernel_size, height, width, in_channels, convs, batch_norm = fields[:FIXED_FIELDS]
    if batch_norm not in (0, 1):
        raise ModelFormatError(f"{path}: batch-norm flag must be 0 or 1, got {batch_norm}")

    try:
        arch = ArchSpec(
            depth=depth,
            channels=tuple(fields[FIXED_FIELDS:]),
            kernel_size=kernel_size,
            input_height=height,
            input_width=width,
            in_channels=in_channels,
            convs_per_block=convs,
            batch_norm=bool(batch_norm),
        )
    except ArchError as e:
        raise ModelFormatError(f"{path}: {e}") from e

    shapes = arch.tensor_shapes()
    expected = 8 * sum(int(np.prod(shape)) for _, shape in shapes)
    payload = data[header_end:]
    if len(payload) != expected:
        raise ModelFormatError(f"{path}: payload length {len(payload)} does not match {expected}")

    values = np.frombuffer(payload, dtype='<f8').astype(np.float64)
    tensors = {}
    offset = 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        tensors[name] = values[offset:offset + size].reshape(shape)
        offset += size

    params = NetParams(arch, tensors)
    params.validate()
    logger.info(f"Model loaded: {path} (depth {arch.depth}, channels {list(arch.channels)})")
    return params
