# powerlaw_fit.py

import logging
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, special

from errors import PowerLawFitError

CONTINUOUS = 'continuous'
DISCRETE = 'discrete'
MAX_ALPHA = 20.0


@dataclass
class PowerLawFit:
    alpha: float
    xmin: float
    ks: float
    n_tail: int
    mode: str = CONTINUOUS
    p_value: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def model_cdf(x, alpha: float, xmin: float, mode: str = CONTINUOUS) -> np.ndarray:
    """P(X <= x) of the power law above xmin."""
    x = np.asarray(x, dtype=float)
    if mode == DISCRETE:
        return 1.0 - special.zeta(alpha, np.floor(x) + 1.0) / special.zeta(alpha, xmin)
    return 1.0 - (x / xmin) ** (1.0 - alpha)


def _continuous_ks(tail: np.ndarray, alpha: float, xmin: float) -> float:
    # Two-sided: compare the model with both sides of each empirical step.
    n = tail.size
    cdf = 1.0 - (tail / xmin) ** (1.0 - alpha)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.max(upper - cdf), np.max(cdf - lower)))


def _discrete_ks(tail: np.ndarray, alpha: float, xmin: float) -> float:
    grid = np.arange(xmin, tail[-1] + 1.0)
    empirical = np.searchsorted(tail, grid, side='right') / tail.size
    return float(np.max(np.abs(empirical - model_cdf(grid, alpha, xmin, DISCRETE))))


def ks_distance(samples: Sequence[float], fit: PowerLawFit) -> float:
    """Sup-norm distance between the tail's empirical CDF and the fitted model."""
    tail = np.sort(np.asarray(samples, dtype=float))
    if tail.size == 0:
        raise PowerLawFitError("KS distance of an empty tail is undefined.")
    if tail[0] < fit.xmin:
        raise PowerLawFitError(f"Tail contains values below xmin={fit.xmin}.")
    if fit.mode == DISCRETE:
        return _discrete_ks(tail, fit.alpha, fit.xmin)
    return _continuous_ks(tail, fit.alpha, fit.xmin)


def _discrete_alpha(tail: np.ndarray, xmin: float) -> float:
    n = tail.size
    log_sum = np.log(tail).sum()

    def negative_log_likelihood(alpha):
        return n * np.log(special.zeta(alpha, xmin)) + alpha * log_sum

    result = optimize.minimize_scalar(negative_log_likelihood, bounds=(1.0 + 1e-6, MAX_ALPHA), method='bounded',
                                      options={'xatol': 1e-8})
    return float(result.x)


def _scan_continuous(x: np.ndarray, min_tail: int):
    logs = np.log(x)
    suffix = np.cumsum(logs[::-1])[::-1]
    candidates = []
    for xmin in np.unique(x):
        k = int(np.searchsorted(x, xmin, side='left'))
        n_tail = x.size - k
        if n_tail < min_tail or x[-1] <= xmin:
            continue
        alpha = 1.0 + n_tail / (suffix[k] - n_tail * np.log(xmin))
        candidates.append((_continuous_ks(x[k:], alpha, xmin), float(xmin), alpha, n_tail))
    return candidates


def _scan_discrete(x: np.ndarray, min_tail: int):
    candidates = []
    for xmin in np.unique(x):
        k = int(np.searchsorted(x, xmin, side='left'))
        tail = x[k:]
        if tail.size < min_tail or tail[-1] <= xmin:
            continue
        alpha = _discrete_alpha(tail, xmin)
        candidates.append((_discrete_ks(tail, alpha, xmin), float(xmin), alpha, tail.size))
    return candidates


def fit_power_law(
    samples: Sequence[float],
    mode: str = CONTINUOUS,
    min_tail: int = 10,
    bootstrap: int = 0,
    seed: int = None,
) -> PowerLawFit:
    """
    Fit p(x) ~ x^-alpha for x >= xmin by maximum likelihood, choosing xmin to
    minimise the KS distance.

    Args:
        samples (list): Positive observations.
        mode (str): 'continuous' (closed-form MLE) or 'discrete' (numerical MLE
            over the Hurwitz-zeta normalised form; samples must be integers).
        min_tail (int): Minimum number of samples at or above a candidate xmin.
        bootstrap (int): Number of semi-parametric resamples for a goodness-of-fit
            p-value; 0 disables it.
        seed (int): Seed for the bootstrap.

    Returns:
        PowerLawFit: Fitted exponent, cutoff, KS distance and tail size.
    """
    if mode not in (CONTINUOUS, DISCRETE):
        raise ValueError(f"Unknown fit mode {mode}.")
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size < min_tail:
        raise PowerLawFitError(f"Need at least {min_tail} samples, got {x.size}.")
    if x[0] <= 0:
        raise PowerLawFitError("Power-law samples must be positive.")
    if mode == DISCRETE and not np.all(x == np.round(x)):
        raise PowerLawFitError("Discrete fits need integer samples.")

    candidates = _scan_continuous(x, min_tail) if mode == CONTINUOUS else _scan_discrete(x, min_tail)
    if not candidates:
        raise PowerLawFitError(f"No cutoff leaves {min_tail} or more samples with spread above it.")

    # Smallest KS wins; ties go to the smaller cutoff.
    ks, xmin, alpha, n_tail = min(candidates, key=lambda c: (c[0], c[1]))
    fit = PowerLawFit(alpha=float(alpha), xmin=xmin, ks=float(ks), n_tail=int(n_tail), mode=mode)
    if bootstrap > 0:
        fit.p_value = bootstrap_p_value(x, fit, bootstrap, min_tail=min_tail, seed=seed)
    logging.debug(f"Power-law fit ({mode}): alpha={fit.alpha:.4f}, xmin={fit.xmin}, ks={fit.ks:.4f}, n_tail={fit.n_tail}")
    return fit


def sample_power_law(rng: np.random.Generator, size: int, alpha: float, xmin: float, mode: str = CONTINUOUS) -> np.ndarray:
    u = rng.random(size)
    if mode == DISCRETE:
        # Continuous approximation rounded to integers, accurate for xmin >= 1.
        return np.floor((xmin - 0.5) * (1.0 - u) ** (-1.0 / (alpha - 1.0)) + 0.5)
    return xmin * (1.0 - u) ** (-1.0 / (alpha - 1.0))


def bootstrap_p_value(samples: Sequence[float], fit: PowerLawFit, resamples: int = 100, min_tail: int = 10, seed: int = None) -> float:
    """Fraction of synthetic data sets whose refitted KS distance is at least the observed one."""
    rng = np.random.default_rng(seed)
    x = np.sort(np.asarray(samples, dtype=float))
    body = x[x < fit.xmin]
    n = x.size
    tail_share = fit.n_tail / n
    exceed = 0
    for _ in range(resamples):
        from_tail = rng.random(n) < tail_share
        synthetic = np.empty(n)
        synthetic[from_tail] = sample_power_law(rng, int(from_tail.sum()), fit.alpha, fit.xmin, fit.mode)
        if body.size:
            synthetic[~from_tail] = rng.choice(body, size=int((~from_tail).sum()))
        else:
            synthetic[~from_tail] = sample_power_law(rng, int((~from_tail).sum()), fit.alpha, fit.xmin, fit.mode)
        try:
            refit = fit_power_law(synthetic, mode=fit.mode, min_tail=min_tail)
        except PowerLawFitError:
            continue
        if refit.ks >= fit.ks:
            exceed += 1
    return exceed / resamples
