"""
Commands
The synth, train, eval, tune, compare and sweep pipelines
"""

import logging
import os
from dataclasses import dataclass

import numpy as np

from bayesopt.tuner import tune
from cli.evaluator import Evaluator
from cli.reporting import ensure_dir, plot_pr_curves, read_json, write_json, write_rows
from cli.run_config import STRATEGIES, ConfigError, check_strategy
from cli.trainer import LOG_COLUMNS, Trainer
from dataset.corpus import load_corpus, save_corpus, split_dataset
from dataset.netpbm import save_mask
from dataset.synthetic import gen_synthetic
from decision.decision_rules import MAP, ML
from metrics.pr_curve import read_pr_csv, write_pr_csv
from network.model_store import load_model, save_model
from optimizers.optimizer_spec import ALGORITHMS, OptimizerSpec
from priors.class_weights import MEDIAN_FREQUENCY, UNIFORM, weights_for
from priors.prior_estimator import estimate_priors, load_priors, save_priors

logger = logging.getLogger(__name__)

METRIC_NAMES = ('precision', 'recall', 'f1', 'mpa')
COMPARE_COLUMNS = ('strategy',) + tuple(
    f"{cls}_{name}" for cls in ('crack', 'background') for name in METRIC_NAMES
)
SWEEP_COLUMNS = ('optimizer', 'strategy') + METRIC_NAMES
AVERAGE = 'average'


class PipelineError(RuntimeError):
    """Raised when a prerequisite artifact is missing"""


@dataclass
class Prepared:
    """
    Loaded samples cut into the three partitions
    """
    split: object
    train: list
    val: list
    test: list


def load_samples(config):
    if config.data_directory is not None:
        return load_corpus(config.data_directory)
    return gen_synthetic(config.synth)


def prepare(config):
    """
    Load the corpus and apply the seeded split

    Args:
        config: RunConfig

    Returns:
        Prepared
    """
    samples = load_samples(config)
    by_id = {s.id: s for s in samples}
    split = split_dataset([s.id for s in samples], config.seed)

    return Prepared(
        split=split,
        train=[by_id[i] for i in split.train],
        val=[by_id[i] for i in split.val],
        test=[by_id[i] for i in split.test],
    )


def _training_inputs(config, weighting, train):
    masks = [s.mask for s in train]
    weights = weights_for(weighting, masks)
    priors = estimate_priors(masks, (config.arch.input_height, config.arch.input_width), config.prior_alpha)
    return weights, priors


def _train(config, data):
    weights, priors = _training_inputs(config, config.weighting, data.train)
    result = Trainer(config, weights, priors).train(data.train, data.val)
    return result, priors


def _write_training_outputs(config, data, result, priors):
    out = ensure_dir(config.output_dir)
    model_path = config.model_path
    ensure_dir(os.path.dirname(model_path) or '.')

    save_model(result.params, model_path)
    save_priors(priors, os.path.join(out, 'priors.pmap'))
    write_rows(os.path.join(out, 'log.csv'), LOG_COLUMNS, result.log)
    write_json(data.split.to_dict(), os.path.join(out, 'split.json'))


def cmd_synth(config):
    """
    Write a synthetic corpus and its manifest

    Args:
        config: RunConfig with a synthetic data section

    Returns:
        Manifest dictionary
    """
    if config.synth is None:
        raise ConfigError("synth needs a data.synthetic section")

    out = ensure_dir(config.output_dir)
    samples = gen_synthetic(config.synth)

    manifest = save_corpus(samples, out)
    write_json(manifest, os.path.join(out, 'manifest.json'))

    logger.info(f"Synthetic corpus ready: {manifest['count']} samples, crack fraction {manifest['crack-fraction']:.4f}")
    return manifest


def cmd_train(config):
    """
    Train under the configured strategy and persist the best snapshot

    Args:
        config: RunConfig

    Returns:
        TrainingResult
    """
    data = prepare(config)
    result, priors = _train(config, data)
    _write_training_outputs(config, data, result, priors)

    logger.info(f"Training finished: best epoch {result.best_epoch}, val loss {result.best_val_loss:.4f}")
    return result


def _load_eval_inputs(config):
    model_path = config.model_path
    if not os.path.exists(model_path):
        raise PipelineError(f"Model file not found: {model_path} (run train first)")
    params = load_model(model_path)

    priors = None
    if config.rule == ML:
        priors_path = os.path.join(os.path.dirname(model_path), 'priors.pmap')
        if not os.path.exists(priors_path):
            raise PipelineError(f"Strategy {config.strategy} needs the prior map {priors_path}")
        priors = load_priors(priors_path)

    return params, priors


def cmd_eval(config):
    """
    Evaluate the trained model on the test partition

    Args:
        config: RunConfig

    Returns:
        EvaluationResult
    """
    params, priors = _load_eval_inputs(config)
    data = prepare(config)

    result = Evaluator(params, config.rule, priors).evaluate(data.test)

    out = ensure_dir(config.output_dir)
    masks_dir = ensure_dir(os.path.join(out, 'masks'))

    write_json(result.to_dict(config.strategy), os.path.join(out, 'metrics.json'))
    write_pr_csv(result.crack_curve, os.path.join(out, 'pr_curve.csv'))
    plot_pr_curves({config.strategy: result.crack_curve}, os.path.join(out, 'pr_curve.svg'),
                   title=f"Precision-recall ({config.strategy})")
    for sample_id, mask in result.masks.items():
        save_mask(mask, os.path.join(masks_dir, f"{sample_id}.pgm"))

    return result


def cmd_tune(config):
    """
    Tune the optimizer's hyperparameters for validation MPA, then retrain at the best point

    Args:
        config: RunConfig with a tune section

    Returns:
        TuneResult
    """
    space = config.tune_space
    spec = config.optimizer
    missing = [name for name in space.names if name not in spec.hyperparameters]
    if missing:
        raise ConfigError(f"{spec.algorithm} has no hyperparameters {missing} to tune")

    data = prepare(config)
    weights, priors = _training_inputs(config, config.weighting, data.train)

    def objective(params):
        trial = config.with_optimizer(spec.updated(params))
        return Trainer(trial, weights, priors).train(data.train, data.val).best_val_mpa

    defaults = {name: spec[name] for name in space.names}
    result = tune(objective, space, config.tune_budget, config.seed, initial_params=[defaults])

    out = ensure_dir(config.output_dir)
    write_json(result.to_dict(), os.path.join(out, 'tune.json'))

    best_config = config.with_optimizer(spec.updated(result.best_params))
    final = Trainer(best_config, weights, priors).train(data.train, data.val)
    _write_training_outputs(best_config, data, final, priors)

    logger.info(f"Tuning finished: best MPA {result.best_objective:.4f} at {result.best_params}")
    return result


def _average_row(rows, columns, **labels):
    average = dict(labels)
    for column in columns:
        average[column] = float(np.mean([row[column] for row in rows]))
    return average


def cmd_compare(config):
    """
    Tabulate finished eval outputs side by side

    Args:
        config: RunConfig whose compare.inputs maps strategy -> eval directory

    Returns:
        List of table rows
    """
    inputs = config.compare_inputs
    if not inputs:
        raise ConfigError("compare needs compare.inputs mapping strategies to eval directories")
    missing = [s for s in STRATEGIES if s not in inputs]
    if missing:
        raise PipelineError(f"compare needs all of {list(STRATEGIES)}; missing {missing}")

    rows = []
    curves = {}
    for strategy, directory in inputs.items():
        check_strategy(strategy, config.allow_cross_strategies)
        metrics_path = os.path.join(directory, 'metrics.json')
        curve_path = os.path.join(directory, 'pr_curve.csv')
        for path in (metrics_path, curve_path):
            if not os.path.exists(path):
                raise PipelineError(f"Strategy {strategy}: {path} is missing (run eval first)")

        metrics = read_json(metrics_path)
        row = {'strategy': strategy}
        for cls in ('crack', 'background'):
            for name in METRIC_NAMES:
                row[f"{cls}_{name}"] = metrics[cls][name]
        rows.append(row)
        curves[strategy] = read_pr_csv(curve_path)

    rows.append(_average_row(rows, COMPARE_COLUMNS[1:], strategy=AVERAGE))

    out = ensure_dir(config.output_dir)
    write_rows(os.path.join(out, 'compare.csv'), COMPARE_COLUMNS, rows)
    plot_pr_curves(curves, os.path.join(out, 'compare_pr_curve.svg'), title='Strategy comparison')

    return rows


def cmd_sweep(config):
    """
    Compare the seven optimizers at their default hyperparameters

    Each optimizer trains a UW and an MFW model; the UW model is scored
    under MAP and ML, the MFW model under MAP, and the three are averaged.

    Args:
        config: RunConfig

    Returns:
        List of table rows
    """
    data = prepare(config)
    rows = []

    for algorithm in ALGORITHMS:
        optimizer_rows = []
        for weighting in (UNIFORM, MEDIAN_FREQUENCY):
            trial = config.with_optimizer(OptimizerSpec(algorithm)).with_strategy(f"{weighting}-{MAP}")
            result, priors = _train(trial, data)

            rules = (MAP, ML) if weighting == UNIFORM else (MAP,)
            for rule in rules:
                report = Evaluator(result.params, rule, priors).evaluate(data.test).crack_report
                row = {'optimizer': algorithm, 'strategy': f"{weighting}-{rule}"}
                row.update({name: getattr(report, name) for name in METRIC_NAMES})
                optimizer_rows.append(row)

        rows.extend(optimizer_rows)
        rows.append(_average_row(optimizer_rows, METRIC_NAMES, optimizer=algorithm, strategy=AVERAGE))
        logger.info(f"Sweep {algorithm}: mean MPA {rows[-1]['mpa']:.4f}")

    out = ensure_dir(config.output_dir)
    write_rows(os.path.join(out, 'sweep.csv'), SWEEP_COLUMNS, rows)
    return rows


COMMANDS = {
    'synth': cmd_synth,
    'train': cmd_train,
    'eval': cmd_eval,
    'tune': cmd_tune,
    'compare': cmd_compare,
    'sweep': cmd_sweep,
}
