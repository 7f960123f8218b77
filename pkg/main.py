"""
Crack Segmentation - Command Line Entry Point
crackseg <synth|train|eval|tune|compare|sweep> --config run.json [--seed N] [--out DIR]
"""

import argparse
import logging
import os
import sys

from dotenv import load_dotenv

from bayesopt.gaussian_process import GpError
from bayesopt.tuner import TuneError
from cli.commands import COMMANDS, PipelineError
from cli.run_config import ConfigError, load_config
from dataset.corpus import CorpusError, SplitError
from dataset.netpbm import NetpbmFormatError, ProbMapFormatError
from dataset.synthetic import SynthesisError
from decision.prob_map import DecisionError
from metrics.confusion import MetricsError
from network.model_store import ModelFormatError
from network.segnet import ArchError, NetworkError
from optimizers.optimizer_spec import OptimizerError
from priors.class_weights import WeightError
from priors.prior_estimator import PriorError

logger = logging.getLogger('crackseg')

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_MISSING = 5

# checked in order, first match wins
EXIT_CODES = (
    (ConfigError, EXIT_CONFIG),
    (TuneError, EXIT_CONFIG),
    (PipelineError, EXIT_MISSING),
    (OptimizerError, EXIT_NUMERICAL),
    (GpError, EXIT_NUMERICAL),
    ((NetpbmFormatError, ProbMapFormatError, ModelFormatError, CorpusError, SplitError,
      SynthesisError, ArchError, NetworkError, PriorError, WeightError, DecisionError,
      MetricsError, OSError), EXIT_DATA),
)


def print_section(title):
    """Print section header"""
    print("\n" + "=" * 70)
    print(f"  {title}")
    print("=" * 70)


def build_parser():
    parser = argparse.ArgumentParser(prog='crackseg', description='Pixel-level crack segmentation pipeline')
    parser.add_argument('command', choices=sorted(COMMANDS))
    parser.add_argument('--config', required=True, help='JSON run configuration')
    parser.add_argument('--seed', type=int, default=None, help='override the configured seed')
    parser.add_argument('--out', default=None, help='override the output directory')
    parser.add_argument('--allow-cross-strategies', action='store_true',
                        help='permit strategies beyond uw-map, uw-ml and mfw-map')
    return parser


def exit_code_for(error):
    for classes, code in EXIT_CODES:
        if isinstance(error, classes):
            return code
    return EXIT_INTERNAL


def main(argv=None):
    """Parse arguments, run one command and return its exit code"""
    load_dotenv()
    logging.basicConfig(
        level=os.getenv('CRACKSEG_LOG_LEVEL', 'INFO').upper(),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )

    args = build_parser().parse_args(argv)

    try:
        config = load_config(args.config, seed=args.seed, output_dir=args.out,
                             allow_cross=args.allow_cross_strategies)
        print_section(f"crackseg {args.command} ({config.strategy}, seed {config.seed})")
        COMMANDS[args.command](config)
    except Exception as e:
        code = exit_code_for(e)
        if code == EXIT_INTERNAL:
            logger.exception(f"Unexpected failure in {args.command}")
        else:
            logger.error(f"{args.command} failed: {e}")
        print(f"\nError: {e}")
        return code

    print(f"\nOutputs written to {config.output_dir}")
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
