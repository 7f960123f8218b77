"""
Optimizer Spec
Algorithm names, default hyperparameters and their validation
"""

import logging
import math
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

SGD = 'sgd'
RMSPROP = 'rmsprop'
ADAGRAD = 'adagrad'
ADADELTA = 'adadelta'
ADAM = 'adam'
ADAMAX = 'adamax'
NADAM = 'nadam'

ALGORITHMS = (SGD, RMSPROP, ADAGRAD, ADADELTA, ADAM, ADAMAX, NADAM)

# Keras-style defaults
DEFAULTS = {
    SGD: {'learning-rate': 0.01, 'momentum': 0.0, 'nesterov': False},
    RMSPROP: {'learning-rate': 0.001, 'rho': 0.9, 'epsilon': 1e-7},
    ADAGRAD: {'learning-rate': 0.01, 'epsilon': 1e-7},
    ADADELTA: {'learning-rate': 1.0, 'rho': 0.95, 'epsilon': 1e-6},
    ADAM: {'learning-rate': 0.001, 'beta1': 0.9, 'beta2': 0.999, 'epsilon': 1e-8},
    ADAMAX: {'learning-rate': 0.002, 'beta1': 0.9, 'beta2': 0.999, 'epsilon': 1e-8},
    NADAM: {'learning-rate': 0.002, 'beta1': 0.9, 'beta2': 0.999, 'epsilon': 1e-8, 'schedule-decay': 0.004},
}

RATES = ('learning-rate',)
DECAYS = ('rho', 'beta1', 'beta2')


class OptimizerError(ValueError):
    """Raised for invalid optimizer settings and rejected steps"""


@dataclass(frozen=True)
class OptimizerSpec:
    """
    Algorithm name plus its complete hyperparameter map
    """
    algorithm: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        algorithm = str(self.algorithm).lower()
        if algorithm not in DEFAULTS:
            raise OptimizerError(f"Unknown optimizer: {self.algorithm} (choose from {', '.join(ALGORITHMS)})")

        merged = dict(DEFAULTS[algorithm])
        for name, value in self.hyperparameters.items():
            if name not in merged:
                raise OptimizerError(f"{algorithm} has no hyperparameter '{name}'")
            merged[name] = value

        for name, value in merged.items():
            if name == 'nesterov':
                if not isinstance(value, bool):
                    raise OptimizerError(f"{algorithm}: nesterov must be true or false, got {value!r}")
                continue
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise OptimizerError(f"{algorithm}: {name} must be a finite number, got {value!r}")
            if name in RATES and value <= 0:
                raise OptimizerError(f"{algorithm}: learning-rate must be positive, got {value}")
            if name in DECAYS and not 0.0 < value < 1.0:
                raise OptimizerError(f"{algorithm}: {name} must lie in (0, 1), got {value}")
            if name == 'epsilon' and value <= 0:
                raise OptimizerError(f"{algorithm}: epsilon must be positive, got {value}")
            if name == 'momentum' and not 0.0 <= value < 1.0:
                raise OptimizerError(f"{algorithm}: momentum must lie in [0, 1), got {value}")
            if name == 'schedule-decay' and value < 0:
                raise OptimizerError(f"{algorithm}: schedule-decay must be >= 0, got {value}")

        object.__setattr__(self, 'algorithm', algorithm)
        object.__setattr__(self, 'hyperparameters', merged)

    def __getitem__(self, name):
        return self.hyperparameters[name]

    def updated(self, overrides):
        """Copy with some hyperparameters replaced"""
        return OptimizerSpec(self.algorithm, {**self.hyperparameters, **overrides})

    def to_dict(self):
        return {'algorithm': self.algorithm, 'hyperparameters': dict(self.hyperparameters)}
