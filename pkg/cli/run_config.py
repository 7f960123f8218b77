"""
Run Configuration
JSON run documents (lower-kebab-case keys) parsed into frozen settings
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace

from bayesopt.tuner import Dimension, SearchSpace, TuneError, default_adadelta_space
from dataset.synthetic import SynthConfig, SynthesisError
from network.segnet import ArchError, ArchSpec
from optimizers.optimizer_spec import ADADELTA, OptimizerError, OptimizerSpec
from priors.class_weights import MEDIAN_FREQUENCY, UNIFORM
from decision.decision_rules import MAP, ML

logger = logging.getLogger(__name__)

STRATEGIES = ('uw-map', 'uw-ml', 'mfw-map')
CROSS_STRATEGIES = ('mfw-ml',)

SELECT_LOSS = 'loss'
SELECT_MPA = 'mpa'

DEFAULT_OUTPUT_DIR = 'runs'
DEFAULT_TUNE_BUDGET = 12

TOP_LEVEL_KEYS = {
    'data', 'arch', 'optimizer', 'strategy', 'allow-cross-strategies', 'epochs',
    'batch-size', 'seed', 'selection', 'prior-alpha', 'output-dir', 'model',
    'tune', 'compare',
}


class ConfigError(ValueError):
    """Raised for unreadable or invalid run configurations"""


@dataclass(frozen=True)
class RunConfig:
    """
    Everything one command needs
    """
    arch: ArchSpec
    optimizer: OptimizerSpec
    strategy: str = 'uw-map'
    data_directory: str = None
    synth: SynthConfig = None
    epochs: int = 15
    batch_size: int = 4
    seed: int = 0
    selection: str = SELECT_LOSS
    prior_alpha: float = 1.0
    output_dir: str = DEFAULT_OUTPUT_DIR
    model: str = None
    tune_budget: int = DEFAULT_TUNE_BUDGET
    tune_space: SearchSpace = None
    compare_inputs: dict = field(default_factory=dict)
    allow_cross_strategies: bool = False

    @property
    def weighting(self):
        return self.strategy.split('-')[0]

    @property
    def rule(self):
        return self.strategy.split('-')[1]

    @property
    def model_path(self):
        return self.model or os.path.join(self.output_dir, 'model.netp')

    def with_strategy(self, strategy):
        return replace(self, strategy=check_strategy(strategy, self.allow_cross_strategies))

    def with_optimizer(self, optimizer):
        return replace(self, optimizer=optimizer)


def check_strategy(strategy, allow_cross=False):
    """
    Validate a '<uw|mfw>-<map|ml>' strategy name

    Args:
        strategy: Strategy name
        allow_cross: Permit the combinations outside the three standard ones

    Returns:
        The strategy name
    """
    parts = str(strategy).split('-')
    if len(parts) != 2 or parts[0] not in (UNIFORM, MEDIAN_FREQUENCY) or parts[1] not in (MAP, ML):
        raise ConfigError(f"Unknown strategy '{strategy}' (expected <uw|mfw>-<map|ml>)")
    if strategy not in STRATEGIES and not allow_cross:
        raise ConfigError(f"Strategy '{strategy}' needs --allow-cross-strategies")
    return strategy


def _pair(section, key, default):
    value = section.get(key, default)
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"data.synthetic.{key} must be a two-element list, got {value!r}")
    return tuple(value)


def _parse_synth(section, seed):
    known = {'count', 'height', 'width', 'strokes-per-image', 'stroke-width',
             'target-crack-fraction', 'noise-amplitude', 'seed'}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"Unknown data.synthetic keys: {sorted(unknown)}")

    try:
        return SynthConfig(
            count=int(section.get('count', 200)),
            height=int(section.get('height', 64)),
            width=int(section.get('width', 64)),
            strokes=_pair(section, 'strokes-per-image', (1, 3)),
            stroke_width=_pair(section, 'stroke-width', (1, 2)),
            crack_fraction=_pair(section, 'target-crack-fraction', (0.01, 0.05)),
            noise_amplitude=float(section.get('noise-amplitude', 0.08)),
            seed=int(section.get('seed', seed)),
        )
    except SynthesisError as e:
        raise ConfigError(f"data.synthetic: {e}") from e


def _parse_arch(section, synth):
    known = {
        'depth', 'channels', 'kernel-size', 'input-height', 'input-width', 'in-channels', 'convs-per-block',
        'batch-norm',
    }
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"Unknown arch keys: {sorted(unknown)}")

    height = synth.height if synth else 64
    width = synth.width if synth else 64
    depth = int(section.get('depth', 2))
    channels = section.get('channels', [16 * 2 ** i for i in range(depth)])
    batch_norm = section.get('batch-norm', False)
    if not isinstance(batch_norm, bool):
        raise ConfigError(f"arch.batch-norm must be true or false, got {batch_norm!r}")

    try:
        return ArchSpec(
            depth=depth,
            channels=tuple(channels),
            kernel_size=int(section.get('kernel-size', 3)),
            input_height=int(section.get('input-height', height)),
            input_width=int(section.get('input-width', width)),
            in_channels=int(section.get('in-channels', 3)),
            convs_per_block=int(section.get('convs-per-block', 1)),
            batch_norm=batch_norm,
        )
    except (ArchError, TypeError) as e:
        raise ConfigError(f"arch: {e}") from e


def _parse_optimizer(section):
    try:
        return OptimizerSpec(
            section.get('algorithm', ADADELTA),
            dict(section.get('hyperparameters', {})),
        )
    except OptimizerError as e:
        raise ConfigError(f"optimizer: {e}") from e


def _parse_space(section):
    if 'space' not in section:
        return default_adadelta_space()
    try:
        return SearchSpace(tuple(
            Dimension(d['name'], float(d['lower']), float(d['upper']), d.get('scale', 'linear'))
            for d in section['space']
        ))
    except (KeyError, TypeError) as e:
        raise ConfigError(f"tune.space entries need name, lower and upper: {e}") from e
    except TuneError as e:
        raise ConfigError(f"tune.space: {e}") from e


def parse_config(document, seed=None, output_dir=None, allow_cross=False):
    """
    Build a RunConfig from a parsed JSON document

    Precedence: explicit arguments, then the document, then the
    environment, then built-in defaults.

    Args:
        document: Parsed JSON object
        seed: --seed override
        output_dir: --out override
        allow_cross: --allow-cross-strategies flag

    Returns:
        RunConfig
    """
    if not isinstance(document, dict):
        raise ConfigError("Configuration must be a JSON object")

    unknown = set(document) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}")

    run_seed = int(document.get('seed', 0)) if seed is None else int(seed)
    allow_cross = allow_cross or bool(document.get('allow-cross-strategies', False))

    data = document.get('data', {'synthetic': {}})
    if 'directory' in data and 'synthetic' in data:
        raise ConfigError("data must name either a directory or a synthetic spec, not both")
    synth = _parse_synth(data['synthetic'], run_seed) if 'synthetic' in data else None
    directory = data.get('directory')
    if synth is None and directory is None:
        raise ConfigError("data needs 'directory' or 'synthetic'")

    epochs = int(document.get('epochs', 15))
    batch_size = int(document.get('batch-size', 4))
    if epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {epochs}")
    if batch_size < 1:
        raise ConfigError(f"batch-size must be >= 1, got {batch_size}")

    selection = document.get('selection', SELECT_LOSS)
    if selection not in (SELECT_LOSS, SELECT_MPA):
        raise ConfigError(f"selection must be 'loss' or 'mpa', got '{selection}'")

    prior_alpha = float(document.get('prior-alpha', 1.0))
    if prior_alpha <= 0:
        raise ConfigError(f"prior-alpha must be positive, got {prior_alpha}")

    tune = document.get('tune', {})
    budget = int(tune.get('budget', DEFAULT_TUNE_BUDGET))

    out = output_dir or document.get('output-dir') or os.getenv('CRACKSEG_OUTPUT_DIR', DEFAULT_OUTPUT_DIR)

    config = RunConfig(
        arch=_parse_arch(document.get('arch', {}), synth),
        optimizer=_parse_optimizer(document.get('optimizer', {})),
        strategy=check_strategy(document.get('strategy', 'uw-map'), allow_cross),
        data_directory=directory,
        synth=synth,
        epochs=epochs,
        batch_size=batch_size,
        seed=run_seed,
        selection=selection,
        prior_alpha=prior_alpha,
        output_dir=out,
        model=document.get('model'),
        tune_budget=budget,
        tune_space=_parse_space(tune),
        compare_inputs=dict(document.get('compare', {}).get('inputs', {})),
        allow_cross_strategies=allow_cross,
    )

    logger.info(f"Configuration loaded: strategy {config.strategy}, seed {config.seed}, output {config.output_dir}")
    return config


def load_config(path, seed=None, output_dir=None, allow_cross=False):
    """
    Read and parse a JSON run configuration file

    Args:
        path: Config file path
        seed: --seed override
        output_dir: --out override
        allow_cross: --allow-cross-strategies flag

    Returns:
        RunConfig
    """
    try:
        with open(path) as fh:
            document = json.load(fh)
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}") from e

    return parse_config(document, seed, output_dir, allow_cross)
