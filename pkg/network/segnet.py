"""
Encoder-Decoder Network
Miniature fully convolutional segmentation network with index unpooling

Encoder block: same-padded convolution -> bias -> [batch norm] -> ReLU ->
2x2 max-pool (indices kept). Decoder block: index unpooling -> same-padded
convolution -> bias -> [batch norm] -> ReLU. Batch norm is off unless
ArchSpec.batch_norm is set. A final 1x1 convolution produces two logits
per pixel, followed by a softmax over classes.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from decision.prob_map import ProbMap
from network import layers
from network.loss import LOG_CLIP

logger = logging.getLogger(__name__)

N_CLASSES = 2


class ArchError(ValueError):
    """Raised for an inconsistent architecture description"""


class NetworkError(ValueError):
    """Raised for shape mismatches between inputs, parameters and caches"""


@dataclass(frozen=True)
class ArchSpec:
    """
    Architecture description
    """
    depth: int
    channels: tuple
    kernel_size: int = 3
    input_height: int = 64
    input_width: int = 64
    in_channels: int = 3
    convs_per_block: int = 1
    batch_norm: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'channels', tuple(int(c) for c in self.channels))

        if self.depth < 1:
            raise ArchError(f"depth must be >= 1, got {self.depth}")
        if len(self.channels) != self.depth:
            raise ArchError(f"channels {self.channels} must list {self.depth} feature counts")
        if any(c < 1 for c in self.channels):
            raise ArchError(f"channel counts must be positive, got {self.channels}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ArchError(f"kernel size must be odd, got {self.kernel_size}")
        if self.convs_per_block < 1:
            raise ArchError(f"convs per block must be >= 1, got {self.convs_per_block}")

        factor = 2 ** self.depth
        if self.input_height % factor or self.input_width % factor:
            raise ArchError(
                f"input {self.input_height}x{self.input_width} is not divisible by 2^{self.depth}"
            )

    def program(self):
        """
        Forward program in execution order

        Returns:
            List of tuples: ('conv'|'classifier', name, in, out, k) or
            ('pool'|'unpool', level)
        """
        k = self.kernel_size
        ops = []

        for level in range(self.depth):
            for m in range(self.convs_per_block):
                if m == 0:
                    cin = self.in_channels if level == 0 else self.channels[level - 1]
                else:
                    cin = self.channels[level]
                ops.append(('conv', f"enc{level + 1}.conv{m + 1}", cin, self.channels[level], k))
            ops.append(('pool', level))

        for level in reversed(range(self.depth)):
            ops.append(('unpool', level))
            cout = self.channels[level - 1] if level > 0 else self.channels[0]
            for m in range(self.convs_per_block):
                cin = self.channels[level] if m == 0 else cout
                ops.append(('conv', f"dec{level + 1}.conv{m + 1}", cin, cout, k))

        ops.append(('classifier', 'cls', self.channels[0], N_CLASSES, 1))
        return ops

    def tensor_shapes(self):
        """
        Parameter tensors in layer order (weight, bias, then gamma and beta
        for normalized convolutions)

        Returns:
            List of (name, shape)
        """
        shapes = []
        for op in self.program():
            if op[0] in ('conv', 'classifier'):
                _, name, cin, cout, k = op
                shapes.append((f"{name}.weight", (cout, cin, k, k)))
                shapes.append((f"{name}.bias", (cout,)))
                if op[0] == 'conv' and self.batch_norm:
                    shapes.append((f"{name}.gamma", (cout,)))
                    shapes.append((f"{name}.beta", (cout,)))
        return shapes

    def to_dict(self):
        return {
            'depth': self.depth,
            'channels': list(self.channels),
            'kernel-size': self.kernel_size,
            'input-height': self.input_height,
            'input-width': self.input_width,
            'in-channels': self.in_channels,
            'convs-per-block': self.convs_per_block,
            'batch-norm': self.batch_norm,
        }


def _check_tensors(arch, tensors, kind):
    expected = arch.tensor_shapes()
    if list(tensors) != [name for name, _ in expected]:
        raise NetworkError(f"{kind} tensor names do not match the architecture")
    for name, shape in expected:
        if tensors[name].shape != shape:
            raise NetworkError(f"{kind} tensor {name} has shape {tensors[name].shape}, expected {shape}")


@dataclass(frozen=True)
class NetParams:
    """
    Learnable kernels and biases keyed by layer name
    """
    arch: ArchSpec
    tensors: dict

    def __post_init__(self):
        _check_tensors(self.arch, self.tensors, 'Parameter')

    def validate(self):
        for name, value in self.tensors.items():
            if not np.all(np.isfinite(value)):
                raise NetworkError(f"Parameter tensor {name} holds non-finite values")

    def copy(self):
        return NetParams(self.arch, {k: v.copy() for k, v in self.tensors.items()})

    @property
    def size(self):
        return sum(v.size for v in self.tensors.values())


@dataclass(frozen=True)
class Gradients:
    """
    Loss gradients, shape-congruent with NetParams
    """
    arch: ArchSpec
    tensors: dict

    def __post_init__(self):
        _check_tensors(self.arch, self.tensors, 'Gradient')


@dataclass
class ForwardCache:
    """
    Everything backward needs from one forward pass
    """
    arch: ArchSpec
    records: list = field(default_factory=list)
    indices: dict = field(default_factory=dict)
    probs: np.ndarray = None


def init_params(arch, seed):
    """
    He-normal kernels, zero biases, unit gammas and zero betas

    Args:
        arch: ArchSpec
        seed: Random seed

    Returns:
        NetParams
    """
    rng = np.random.default_rng(seed)
    tensors = {}

    for name, shape in arch.tensor_shapes():
        if name.endswith('.weight'):
            fan_in = shape[1] * shape[2] * shape[3]
            tensors[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        elif name.endswith('.gamma'):
            tensors[name] = np.ones(shape)
        else:
            tensors[name] = np.zeros(shape)

    params = NetParams(arch, tensors)
    logger.info(f"Parameters initialized: {params.size} values, seed {seed}")
    return params


def forward(params, image):
    """
    Run the network on one image

    Args:
        params: NetParams
        image: H x W x C intensity grid

    Returns:
        Tuple (ProbMap, ForwardCache)
    """
    arch = params.arch
    image = np.asarray(image, dtype=np.float64)
    expected = (arch.input_height, arch.input_width, arch.in_channels)
    if image.shape != expected:
        raise NetworkError(f"Image shape {image.shape} does not match architecture input {expected}")

    cache = ForwardCache(arch)
    x = image.transpose(2, 0, 1)
    t = params.tensors

    for op in arch.program():
        kind = op[0]
        if kind == 'conv':
            name = op[1]
            z = layers.conv_forward(x, t[f"{name}.weight"], t[f"{name}.bias"])
            saved = None
            if arch.batch_norm:
                z, saved = layers.batchnorm_forward(z, t[f"{name}.gamma"], t[f"{name}.beta"])
            cache.records.append((kind, name, x, z, saved))
            x = layers.relu_forward(z)
        elif kind == 'pool':
            x, cache.indices[op[1]] = layers.maxpool_forward(x)
            cache.records.append((kind, op[1]))
        elif kind == 'unpool':
            x = layers.maxunpool_forward(x, cache.indices[op[1]])
            cache.records.append((kind, op[1]))
        else:
            name = op[1]
            logits = layers.conv_forward(x, t[f"{name}.weight"], t[f"{name}.bias"])
            cache.records.append((kind, name, x))

    cache.probs = layers.softmax(logits)
    return ProbMap(cache.probs.transpose(1, 2, 0)), cache


def backward(params, cache, truth, weights):
    """
    Exact gradients of the weighted cross-entropy

    Args:
        params: NetParams used for the forward pass
        cache: ForwardCache from that pass
        truth: H x W mask
        weights: ClassWeights

    Returns:
        Gradients
    """
    if cache.arch != params.arch or cache.probs is None:
        raise NetworkError("Forward cache does not belong to these parameters")

    truth = np.asarray(truth).astype(np.intp)
    probs = cache.probs
    if truth.shape != probs.shape[1:]:
        raise NetworkError(f"Truth shape {truth.shape} does not match cached output {probs.shape[1:]}")

    onehot = np.stack([truth == c for c in range(N_CLASSES)]).astype(np.float64)
    pixel_weight = weights.as_array()[truth]
    p_true = (probs * onehot).sum(axis=0)
    # clipped pixels have a constant loss
    active = p_true >= LOG_CLIP

    dx = (pixel_weight * active / truth.size)[None] * (probs - onehot)

    t = params.tensors
    grads = {}

    for record in reversed(cache.records):
        kind = record[0]
        if kind == 'classifier':
            _, name, x_in = record
            dx, grads[f"{name}.weight"], grads[f"{name}.bias"] = layers.conv_backward(dx, x_in, t[f"{name}.weight"])
        elif kind == 'conv':
            _, name, x_in, z, saved = record
            dz = layers.relu_backward(dx, z)
            if saved is not None:
                dz, grads[f"{name}.gamma"], grads[f"{name}.beta"] = layers.batchnorm_backward(
                    dz, saved, t[f"{name}.gamma"]
                )
            dx, grads[f"{name}.weight"], grads[f"{name}.bias"] = layers.conv_backward(dz, x_in, t[f"{name}.weight"])
        elif kind == 'unpool':
            dx = layers.maxunpool_backward(dx, cache.indices[record[1]])
        else:
            dx = layers.maxpool_backward(dx, cache.indices[record[1]])

    ordered = {name: grads[name] for name, _ in params.arch.tensor_shapes()}
    return Gradients(params.arch, ordered)
