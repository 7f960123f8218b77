"""
Trainer
Mini-batch training with per-epoch validation and best-snapshot selection
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from decision.decision_rules import rule_scores
from metrics.pr_curve import mpa, pr_curve
from network.loss import batch_loss, weighted_cross_entropy
from network.segnet import NetworkError, backward, forward, init_params
from optimizers.update_rules import opt_init, opt_step
from cli.run_config import SELECT_MPA

logger = logging.getLogger(__name__)

LOG_COLUMNS = ('epoch', 'train_loss', 'val_loss', 'val_mpa')


@dataclass
class TrainingResult:
    """
    Best snapshot plus the per-epoch log
    """
    params: object
    best_epoch: int
    best_val_loss: float
    best_val_mpa: float
    log: list = field(default_factory=list)


class Trainer:
    """
    Trains one network under one strategy
    """

    def __init__(self, config, weights, priors=None):
        """
        Initialize trainer

        Args:
            config: RunConfig (arch, optimizer, epochs, batch size, seed, selection)
            weights: ClassWeights applied to the loss
            priors: PriorMap, needed when validating under the ML rule
        """
        self.config = config
        self.weights = weights
        self.priors = priors

        logger.info(
            f"Trainer initialized: {config.optimizer.algorithm}, {config.epochs} epochs, "
            f"batch {config.batch_size}, weights {weights.to_dict()}"
        )

    def check_samples(self, samples):
        arch = self.config.arch
        expected = (arch.input_height, arch.input_width)
        for sample in samples:
            if sample.shape != expected:
                raise NetworkError(f"Sample {sample.id} is {sample.shape}, network expects {expected}")

    def _batch_step(self, spec, state, params, batch):
        total = {name: np.zeros_like(v) for name, v in params.tensors.items()}
        losses = []

        for sample in batch:
            probs, cache = forward(params, sample.pixels)
            losses.append(weighted_cross_entropy(probs, sample.mask, self.weights))
            grads = backward(params, cache, sample.mask, self.weights)
            for name, value in grads.tensors.items():
                total[name] += value

        mean_grads = {name: value / len(batch) for name, value in total.items()}
        state, params = opt_step(spec, state, params, mean_grads)
        return state, params, losses

    def validate(self, params, samples):
        """
        Validation loss and MPA under the strategy's rule

        Args:
            params: NetParams
            samples: Validation ImageSamples

        Returns:
            Tuple (mean loss, MPA)
        """
        prob_maps = [forward(params, sample.pixels)[0] for sample in samples]
        masks = [s.mask for s in samples]
        scores = [rule_scores(self.config.rule, p, self.priors) for p in prob_maps]

        curve = pr_curve(scores, masks)
        return batch_loss(prob_maps, masks, self.weights), mpa(curve)

    def _improved(self, val_loss, val_mpa, best_loss, best_mpa):
        if best_loss is None:
            return True
        if self.config.selection == SELECT_MPA:
            return val_mpa > best_mpa
        return val_loss < best_loss

    def train(self, train_samples, val_samples):
        """
        Run every epoch and keep the best validation snapshot

        Args:
            train_samples: Training ImageSamples
            val_samples: Validation ImageSamples

        Returns:
            TrainingResult
        """
        config = self.config
        self.check_samples(train_samples)
        self.check_samples(val_samples)

        params = init_params(config.arch, config.seed)
        spec = config.optimizer
        state = opt_init(spec, params)
        rng = np.random.default_rng(config.seed + 1)

        best = None
        best_epoch, best_loss, best_mpa = 0, None, None
        log = []

        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(len(train_samples))
            epoch_losses = []

            for start in range(0, len(order), config.batch_size):
                batch = [train_samples[i] for i in order[start:start + config.batch_size]]
                state, params, losses = self._batch_step(spec, state, params, batch)
                epoch_losses.extend(losses)
                logger.debug(f"Epoch {epoch} batch {start // config.batch_size + 1}: loss {np.mean(losses):.4f}")

            train_loss = float(np.mean(epoch_losses))
            val_loss, val_mpa = self.validate(params, val_samples)
            log.append({'epoch': epoch, 'train_loss': train_loss, 'val_loss': val_loss, 'val_mpa': val_mpa})

            if self._improved(val_loss, val_mpa, best_loss, best_mpa):
                best = params.copy()
                best_epoch, best_loss, best_mpa = epoch, val_loss, val_mpa

            logger.info(
                f"Epoch {epoch}/{config.epochs}: train {train_loss:.4f} val {val_loss:.4f} "
                f"MPA {val_mpa:.4f} (best epoch {best_epoch})"
            )

        return TrainingResult(best, best_epoch, best_loss, best_mpa, log)
