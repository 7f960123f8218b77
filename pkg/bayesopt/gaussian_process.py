"""
Gaussian Process
Squared-exponential GP regression on the unit hypercube
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

NOISE_FLOOR = 1e-6
DEFAULT_LENGTHSCALE = 0.3
LENGTHSCALE_RANGE = (0.05, 2.0)
FIT_TRIALS = 64

JITTER_START = 1e-10
MAX_JITTER_TRIES = 8


class GpError(RuntimeError):
    """Raised when the covariance cannot be factorized or inputs are invalid"""


@dataclass(frozen=True)
class GpState:
    """
    Observations, kernel hyperparameters and the factorized covariance
    """
    x: np.ndarray
    y: np.ndarray
    signal_variance: float
    lengthscales: np.ndarray
    noise: float
    prior_mean: float
    chol: np.ndarray
    alpha: np.ndarray

    @property
    def dims(self):
        return self.x.shape[1]

    @property
    def size(self):
        return self.x.shape[0]


def se_kernel(a, b, signal_variance, lengthscales):
    """
    k(a, b) = s2 exp(-sum_d (a_d - b_d)^2 / (2 l_d^2))

    Args:
        a: n x d points
        b: m x d points
        signal_variance: s2
        lengthscales: Per-dimension l

    Returns:
        n x m covariance
    """
    scaled = cdist(a / lengthscales, b / lengthscales, 'sqeuclidean')
    return signal_variance * np.exp(-0.5 * scaled)


def _factorize(k):
    jitter = 0.0
    for attempt in range(MAX_JITTER_TRIES):
        try:
            return linalg.cholesky(k + jitter * np.eye(len(k)), lower=True)
        except linalg.LinAlgError:
            jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
            logger.debug(f"Cholesky failed, retrying with jitter {jitter:.1e}")
    raise GpError(f"Covariance factorization failed after {MAX_JITTER_TRIES} attempts (jitter {jitter:.1e})")


def build_gp(x, y, signal_variance, lengthscales, noise=NOISE_FLOOR, prior_mean=None):
    """
    Condition a GP on observations with fixed kernel hyperparameters

    Args:
        x: n x d inputs inside the unit hypercube
        y: n targets
        signal_variance: Kernel amplitude s2
        lengthscales: Scalar or per-dimension lengthscales
        noise: Observation noise variance on the diagonal
        prior_mean: Constant prior mean (defaults to mean(y))

    Returns:
        GpState
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()

    if x.shape[0] == 0 or x.shape[0] != y.shape[0]:
        raise GpError(f"Need matching non-empty inputs and targets, got {x.shape[0]} and {y.shape[0]}")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise GpError("GP inputs must lie inside the unit hypercube")
    if not np.all(np.isfinite(y)):
        raise GpError("GP targets must be finite")

    lengthscales = np.broadcast_to(np.asarray(lengthscales, dtype=np.float64), (x.shape[1],)).copy()
    mean = float(np.mean(y)) if prior_mean is None else float(prior_mean)

    k = se_kernel(x, x, signal_variance, lengthscales) + noise * np.eye(len(x))
    chol = _factorize(k)
    alpha = linalg.cho_solve((chol, True), y - mean)

    return GpState(x, y, float(signal_variance), lengthscales, float(noise), mean, chol, alpha)


def log_marginal_likelihood(gp):
    residual = gp.y - gp.prior_mean
    return float(
        -0.5 * residual @ gp.alpha
        - np.sum(np.log(np.diag(gp.chol)))
        - 0.5 * gp.size * np.log(2.0 * np.pi)
    )


def fit_gp(x, y, seed):
    """
    Pick kernel hyperparameters by seeded random search on the marginal likelihood

    The signal variance is scaled by the target variance (zero for a
    constant objective), lengthscales are log-uniform and the noise never
    drops below the floor. A default trial is always included.

    Args:
        x: n x d inputs inside the unit hypercube
        y: n targets
        seed: Random seed for the trials

    Returns:
        Best GpState
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    dims = x.shape[1]

    if len(y) < 2:
        scale = 1.0
    else:
        scale = float(np.var(y))

    rng = np.random.default_rng(seed)
    log_lo, log_hi = np.log(LENGTHSCALE_RANGE)

    trials = [(scale, np.full(dims, DEFAULT_LENGTHSCALE), NOISE_FLOOR)]
    for _ in range(FIT_TRIALS - 1):
        signal = scale * 10.0 ** rng.uniform(-1.0, 1.0)
        lengthscales = np.exp(rng.uniform(log_lo, log_hi, size=dims))
        noise = NOISE_FLOOR + scale * 10.0 ** rng.uniform(-6.0, -2.0)
        trials.append((signal, lengthscales, noise))

    best = None
    best_score = -np.inf
    for signal, lengthscales, noise in trials:
        try:
            gp = build_gp(x, y, signal, lengthscales, noise)
        except GpError:
            continue
        score = log_marginal_likelihood(gp)
        if score > best_score:
            best, best_score = gp, score

    if best is None:
        raise GpError(f"No kernel trial could be factorized for {len(y)} observations")

    logger.debug(
        f"GP fitted on {len(y)} points: s2 {best.signal_variance:.3g}, "
        f"lengthscales {np.round(best.lengthscales, 3).tolist()}, noise {best.noise:.1e}"
    )
    return best


def gp_posterior_batch(gp, points):
    """
    Posterior mean and latent variance at many points

    Args:
        gp: GpState
        points: m x d query points

    Returns:
        Tuple (means, variances) of length m
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    k_star = se_kernel(gp.x, points, gp.signal_variance, gp.lengthscales)

    means = gp.prior_mean + k_star.T @ gp.alpha
    v = linalg.solve_triangular(gp.chol, k_star, lower=True)
    variances = gp.signal_variance - np.sum(v * v, axis=0)

    # round-off can push the variance slightly negative
    return means, np.maximum(variances, 0.0)


def gp_posterior(gp, point):
    """
    Posterior mean and variance at one point

    Args:
        gp: GpState
        point: d-vector inside the unit hypercube

    Returns:
        Tuple (mean, variance)
    """
    means, variances = gp_posterior_batch(gp, np.asarray(point, dtype=np.float64).reshape(1, -1))
    return float(means[0]), float(variances[0])
