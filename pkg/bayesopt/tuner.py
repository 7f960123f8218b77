"""
Tuner
Search spaces and the sequential Bayesian optimization loop
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from bayesopt.acquisition import propose_next
from bayesopt.gaussian_process import fit_gp

logger = logging.getLogger(__name__)

LINEAR = 'linear'
LOG10 = 'log10'

MIN_BUDGET = 4
MIN_DESIGN = 3


class TuneError(ValueError):
    """Raised for invalid search spaces or budgets"""


@dataclass(frozen=True)
class Dimension:
    """
    One tunable hyperparameter
    """
    name: str
    lower: float
    upper: float
    scale: str = LINEAR

    def __post_init__(self):
        if self.scale not in (LINEAR, LOG10):
            raise TuneError(f"Dimension {self.name}: unknown scale '{self.scale}'")
        if not self.lower < self.upper:
            raise TuneError(f"Dimension {self.name}: lower {self.lower} must be below upper {self.upper}")
        if self.scale == LOG10 and self.lower <= 0:
            raise TuneError(f"Dimension {self.name}: log10 bounds must be positive")

    def _edges(self):
        if self.scale == LOG10:
            return math.log10(self.lower), math.log10(self.upper)
        return self.lower, self.upper

    def decode(self, u):
        lo, hi = self._edges()
        value = lo + float(u) * (hi - lo)
        if self.scale == LOG10:
            value = 10.0 ** value
        return min(max(value, self.lower), self.upper)

    def encode(self, value):
        lo, hi = self._edges()
        value = math.log10(value) if self.scale == LOG10 else float(value)
        return min(max((value - lo) / (hi - lo), 0.0), 1.0)

    def to_dict(self):
        return {'name': self.name, 'lower': self.lower, 'upper': self.upper, 'scale': self.scale}


@dataclass(frozen=True)
class SearchSpace:
    """
    Ordered dimensions mapped onto the unit hypercube
    """
    dimensions: tuple

    def __post_init__(self):
        object.__setattr__(self, 'dimensions', tuple(self.dimensions))
        if not self.dimensions:
            raise TuneError("Search space needs at least one dimension")
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise TuneError(f"Duplicate dimension names in {names}")

    @property
    def names(self):
        return [d.name for d in self.dimensions]

    def decode(self, unit):
        return {d.name: d.decode(u) for d, u in zip(self.dimensions, unit)}

    def encode(self, params):
        missing = [d.name for d in self.dimensions if d.name not in params]
        if missing:
            raise TuneError(f"Parameters lack search dimensions {missing}")
        return np.array([d.encode(params[d.name]) for d in self.dimensions])


def default_adadelta_space():
    return SearchSpace((
        Dimension('learning-rate', 0.1, 2.0, LINEAR),
        Dimension('rho', 0.8, 0.999, LINEAR),
        Dimension('epsilon', 1e-8, 1e-4, LOG10),
    ))


@dataclass
class TuneResult:
    """
    Best point and the full ordered evaluation history
    """
    best_params: dict
    best_objective: float
    history: list = field(default_factory=list)

    def to_dict(self):
        return {
            'best': {'params': self.best_params, 'objective': self.best_objective},
            'history': [{'params': p, 'objective': v} for p, v in self.history],
        }


def design_count(n):
    """Random design points among the first n evaluations: min(n, max(3, n // 4))"""
    return min(n, max(MIN_DESIGN, n // 4))


def tune(objective, space, budget, seed, initial_params=()):
    """
    Maximize an objective with GP expected improvement

    Of the first n evaluations, design_count(n) come from the initial
    design: the forced initial points (native units, evaluated as given)
    followed by seeded uniform points. The first three evaluations are
    design points, then one more joins at every evaluation 4k with k > 3
    (16, 20, ...). The rest come from propose_next. Because the schedule
    depends only on the evaluation index, a shorter budget evaluates a
    prefix of a longer one. A failed evaluation is recorded at the worst
    value seen so far and never becomes the best.

    Args:
        objective: Callable taking a params dict, returning a float
        space: SearchSpace
        budget: Total evaluations (>= 4)
        seed: Random seed
        initial_params: Points to evaluate first (at most 3)

    Returns:
        TuneResult
    """
    if budget < MIN_BUDGET:
        raise TuneError(f"Budget must be >= {MIN_BUDGET}, got {budget}")

    forced = [(dict(p), space.encode(p)) for p in initial_params]
    if len(forced) > MIN_DESIGN:
        raise TuneError(f"{len(forced)} forced points exceed the initial design of {MIN_DESIGN}")

    rng = np.random.default_rng(seed)
    n_dims = len(space.dimensions)

    history = []
    observed_x = []
    observed_y = []
    best_params, best_value = None, None

    def evaluate(params, unit):
        nonlocal best_params, best_value
        index = len(history) + 1
        try:
            value = float(objective(params))
            if not math.isfinite(value):
                raise ValueError(f"objective returned {value}")
        except Exception as e:
            logger.warning(f"Evaluation {index}/{budget} failed: {e}")
            value = min(observed_y) if observed_y else None
            history.append((params, value))
            if value is not None:
                observed_x.append(unit)
                observed_y.append(value)
            return

        history.append((params, value))
        observed_x.append(unit)
        observed_y.append(value)
        if best_value is None or value > best_value:
            best_params, best_value = params, value
        logger.info(f"Evaluation {index}/{budget}: {value:.6f} (best {best_value:.6f})")

    for step in range(budget):
        if design_count(step + 1) > design_count(step):
            if forced:
                params, unit = forced.pop(0)
            else:
                unit = rng.uniform(size=n_dims)
                params = space.decode(unit)
        elif observed_y:
            gp = fit_gp(np.array(observed_x), np.array(observed_y), seed + step)
            unit = propose_next(gp, seed + step)
            params = space.decode(unit)
        else:
            unit = rng.uniform(size=n_dims)
            params = space.decode(unit)
        evaluate(params, unit)

    if best_value is None:
        raise TuneError(f"All {budget} evaluations failed")

    return TuneResult(best_params, best_value, history)
