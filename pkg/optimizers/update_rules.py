"""
Update Rules
First-order parameter updates with persistent accumulator state
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from optimizers.optimizer_spec import (
    ADADELTA, ADAGRAD, ADAM, ADAMAX, NADAM, RMSPROP, SGD, OptimizerError,
)

logger = logging.getLogger(__name__)

SLOTS = {
    SGD: (),
    RMSPROP: ('mean_square',),
    ADAGRAD: ('accumulator',),
    ADADELTA: ('grad_square', 'update_square'),
    ADAM: ('m', 'v'),
    ADAMAX: ('m', 'u'),
    NADAM: ('m', 'v'),
}

NADAM_DECAY_BASE = 0.96


@dataclass(frozen=True)
class OptimizerState:
    """
    Step counter, per-parameter buffers and scalar state
    """
    step: int = 0
    slots: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)


def _tensors(params):
    return params.tensors if hasattr(params, 'tensors') else params


def _rebuild(params, tensors):
    if hasattr(params, 'tensors'):
        return type(params)(params.arch, tensors)
    return tensors


def opt_init(spec, params):
    """
    Fresh optimizer state for a parameter set

    Args:
        spec: OptimizerSpec
        params: NetParams or a dict of named arrays

    Returns:
        OptimizerState with zero buffers and step 0
    """
    tensors = _tensors(params)
    names = list(SLOTS[spec.algorithm])
    if spec.algorithm == SGD and spec['momentum'] > 0:
        names.append('velocity')

    slots = {slot: {k: np.zeros_like(v, dtype=np.float64) for k, v in tensors.items()} for slot in names}
    scalars = {'m_schedule': 1.0} if spec.algorithm == NADAM else {}

    return OptimizerState(step=0, slots=slots, scalars=scalars)


def _check_grads(params, grads):
    for name, value in params.items():
        if name not in grads:
            raise OptimizerError(f"Gradient for layer {name} is missing")
        if grads[name].shape != value.shape:
            raise OptimizerError(f"Gradient for layer {name} has shape {grads[name].shape}, expected {value.shape}")
    for name in params:
        if not np.all(np.isfinite(grads[name])):
            raise OptimizerError(f"Non-finite gradient in layer {name}: step rejected")


def _sgd(h, t, p, g, slots, scalars):
    lr = h['learning-rate']
    if 'velocity' not in slots:
        return p - lr * g, {}
    momentum = h['momentum']
    v = momentum * slots['velocity'] - lr * g
    if h['nesterov']:
        return p + momentum * v - lr * g, {'velocity': v}
    return p + v, {'velocity': v}


def _rmsprop(h, t, p, g, slots, scalars):
    rho = h['rho']
    a = rho * slots['mean_square'] + (1.0 - rho) * g * g
    return p - h['learning-rate'] * g / (np.sqrt(a) + h['epsilon']), {'mean_square': a}


def _adagrad(h, t, p, g, slots, scalars):
    a = slots['accumulator'] + g * g
    return p - h['learning-rate'] * g / (np.sqrt(a) + h['epsilon']), {'accumulator': a}


def _adadelta(h, t, p, g, slots, scalars):
    rho, eps = h['rho'], h['epsilon']
    a = rho * slots['grad_square'] + (1.0 - rho) * g * g
    update = g * np.sqrt(slots['update_square'] + eps) / np.sqrt(a + eps)
    d = rho * slots['update_square'] + (1.0 - rho) * update * update
    return p - h['learning-rate'] * update, {'grad_square': a, 'update_square': d}


def _adam(h, t, p, g, slots, scalars):
    b1, b2 = h['beta1'], h['beta2']
    m = b1 * slots['m'] + (1.0 - b1) * g
    v = b2 * slots['v'] + (1.0 - b2) * g * g
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    return p - h['learning-rate'] * m_hat / (np.sqrt(v_hat) + h['epsilon']), {'m': m, 'v': v}


def _adamax(h, t, p, g, slots, scalars):
    b1, b2 = h['beta1'], h['beta2']
    m = b1 * slots['m'] + (1.0 - b1) * g
    u = np.maximum(b2 * slots['u'], np.abs(g))
    step = h['learning-rate'] / (1.0 - b1 ** t)
    return p - step * m / (u + h['epsilon']), {'m': m, 'u': u}


def _nadam_schedule(h, t):
    decay = h['schedule-decay']
    b1 = h['beta1']
    return (
        b1 * (1.0 - 0.5 * NADAM_DECAY_BASE ** (t * decay)),
        b1 * (1.0 - 0.5 * NADAM_DECAY_BASE ** ((t + 1) * decay)),
    )


def _nadam(h, t, p, g, slots, scalars):
    b1, b2 = h['beta1'], h['beta2']
    mu_t, mu_next = _nadam_schedule(h, t)
    schedule = scalars['m_schedule'] * mu_t
    schedule_next = schedule * mu_next

    m = b1 * slots['m'] + (1.0 - b1) * g
    v = b2 * slots['v'] + (1.0 - b2) * g * g

    g_hat = g / (1.0 - schedule)
    m_hat = m / (1.0 - schedule_next)
    v_hat = v / (1.0 - b2 ** t)
    m_bar = (1.0 - mu_t) * g_hat + mu_next * m_hat

    return p - h['learning-rate'] * m_bar / (np.sqrt(v_hat) + h['epsilon']), {'m': m, 'v': v}


RULES = {
    SGD: _sgd,
    RMSPROP: _rmsprop,
    ADAGRAD: _adagrad,
    ADADELTA: _adadelta,
    ADAM: _adam,
    ADAMAX: _adamax,
    NADAM: _nadam,
}


def opt_step(spec, state, params, grads):
    """
    Apply one update

    Inputs are left untouched; the returned state and parameters are new
    objects.

    Args:
        spec: OptimizerSpec
        state: OptimizerState from opt_init or a previous step
        params: NetParams or dict of named arrays
        grads: Gradients or dict congruent with params

    Returns:
        Tuple (OptimizerState, params of the same type as the input)
    """
    tensors = _tensors(params)
    gradients = _tensors(grads)
    _check_grads(tensors, gradients)

    t = state.step + 1
    rule = RULES[spec.algorithm]
    h = spec.hyperparameters

    new_tensors = {}
    new_slots = {slot: {} for slot in state.slots}

    for name, value in tensors.items():
        own_slots = {slot: buffers[name] for slot, buffers in state.slots.items()}
        new_tensors[name], updated = rule(h, t, value, gradients[name], own_slots, state.scalars)
        for slot, buffer in updated.items():
            new_slots[slot][name] = buffer

    scalars = dict(state.scalars)
    if spec.algorithm == NADAM:
        scalars['m_schedule'] = state.scalars['m_schedule'] * _nadam_schedule(h, t)[0]

    logger.debug(f"{spec.algorithm} step {t}")
    return OptimizerState(step=t, slots=new_slots, scalars=scalars), _rebuild(params, new_tensors)
