"""
Evaluator
Applies a trained model and a decision rule to a sample set
"""

import logging
from dataclasses import dataclass

from decision.decision_rules import apply_rule, rule_scores
from metrics.confusion import build_report, pooled_confusion
from metrics.pr_curve import mpa, pr_curve_from_scores
from network.segnet import forward

logger = logging.getLogger(__name__)

OPERATING_THRESHOLD = 0.5


@dataclass
class EvaluationResult:
    """
    Crack and background metrics with the curves behind them
    """
    counts: object
    crack_report: object
    background_report: object
    crack_curve: object
    background_curve: object
    masks: dict

    def to_dict(self, strategy):
        return {
            'strategy': strategy,
            'threshold': OPERATING_THRESHOLD,
            'confusion': self.counts.to_dict(),
            'crack': self.crack_report.to_dict(),
            'background': self.background_report.to_dict(),
            'ids': sorted(self.masks),
        }


class Evaluator:
    """
    Model evaluation under one decision rule
    """

    def __init__(self, params, rule, priors=None):
        """
        Initialize evaluator

        Args:
            params: NetParams
            rule: 'map' or 'ml'
            priors: PriorMap (required for 'ml')
        """
        self.params = params
        self.rule = rule
        self.priors = priors

        logger.info(f"Evaluator initialized: rule {rule}")

    def predict(self, samples):
        return [forward(self.params, s.pixels)[0] for s in samples]

    def evaluate_maps(self, ids, prob_maps, truths):
        """
        Metrics for precomputed probability maps

        Args:
            ids: Sample ids
            prob_maps: ProbMaps aligned with ids
            truths: Masks aligned with ids

        Returns:
            EvaluationResult
        """
        scores = [rule_scores(self.rule, p, self.priors) for p in prob_maps]
        preds = [apply_rule(self.rule, p, self.priors) for p in prob_maps]

        counts = pooled_confusion(preds, truths)
        crack_curve = pr_curve_from_scores([s.crack for s in scores], truths)
        background_curve = pr_curve_from_scores([s.background for s in scores], [1 - t for t in truths])

        result = EvaluationResult(
            counts=counts,
            crack_report=build_report(counts, mpa(crack_curve)),
            background_report=build_report(counts.swapped(), mpa(background_curve)),
            crack_curve=crack_curve,
            background_curve=background_curve,
            masks=dict(zip(ids, preds)),
        )

        report = result.crack_report
        logger.info(
            f"Evaluated {len(ids)} samples ({self.rule}): P {report.precision:.4f} "
            f"R {report.recall:.4f} F1 {report.f1:.4f} MPA {report.mpa:.4f}"
        )
        return result

    def evaluate(self, samples):
        return self.evaluate_maps([s.id for s in samples], self.predict(samples), [s.mask for s in samples])
