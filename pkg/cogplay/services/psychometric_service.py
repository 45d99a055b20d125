"""
Two-parameter logistic fits to staircase outcomes.

Success probability falls with difficulty: p(d) = 1 / (1 + exp((d - theta) / sigma)).
Fits are unweighted least squares on per-level success proportions.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from ..errors import StatsPreconditionError
from ..models.endpoints import PsychFit

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 0.05
CAP_OFFSET = 0.5
INITIAL_SIGMA = 1.0


def logistic_2pl(d, theta: float, sigma: float):
    z = np.clip((np.asarray(d, dtype=float) - theta) / sigma, -500.0, 500.0)
    return 1.0 / (1.0 + np.exp(z))


def level_proportions(levels: Sequence[float], outcomes: Sequence[bool]) -> Tuple[np.ndarray, np.ndarray]:
    """Distinct difficulty levels (ascending) and the success proportion at each."""
    d = np.asarray(levels, dtype=float)
    y = np.asarray(outcomes, dtype=float)
    if d.shape != y.shape:
        raise StatsPreconditionError("levels and outcomes must have the same length")
    unique, inverse = np.unique(d, return_inverse=True)
    proportions = np.bincount(inverse, weights=y) / np.bincount(inverse)
    return unique, proportions


def empirical_crossing(unique: np.ndarray, proportions: np.ndarray) -> float:
    """Difficulty where the proportions first drop through 0.5, by linear interpolation."""
    for i in range(len(unique) - 1):
        a, b = proportions[i], proportions[i + 1]
        if a >= 0.5 > b:
            return float(unique[i] + (a - 0.5) / (a - b) * (unique[i + 1] - unique[i]))
    return float(unique[np.argmin(np.abs(proportions - 0.5))])


def _rmse(unique, proportions, theta, sigma) -> float:
    return float(np.sqrt(np.mean((logistic_2pl(unique, theta, sigma) - proportions) ** 2)))


def _solve(unique, proportions, theta0: float, sigma0: float):
    def residuals(params):
        theta, u = params
        return logistic_2pl(unique, theta, SIGMA_FLOOR + np.exp(u)) - proportions

    u0 = np.log(max(sigma0 - SIGMA_FLOOR, 1e-3))
    result = least_squares(residuals, x0=[theta0, u0], method="lm")
    theta, u = result.x
    sigma = SIGMA_FLOOR + float(np.exp(u))
    ok = result.success and np.isfinite(theta) and np.isfinite(sigma)
    return ok, float(theta), sigma


def fit_2pl(
    levels: Sequence[float],
    outcomes: Sequence[bool],
    max_difficulty: Optional[float] = None,
) -> PsychFit:
    """
    Levenberg-Marquardt fit of theta (50% point) and sigma (spread).

    Theta is capped at max_difficulty + 0.5 (capped=True). Data without any
    failure return the cap; data without any success return the floor at the
    easiest level - 0.5, also flagged capped.

    Raises:
        StatsPreconditionError: fewer than two distinct levels
    """
    unique, proportions = level_proportions(levels, outcomes)
    if unique.size < 2:
        raise StatsPreconditionError(f"need at least 2 difficulty levels, got {unique.size}")

    cap = (float(unique.max()) if max_difficulty is None else float(max_difficulty)) + CAP_OFFSET
    floor = float(unique.min()) - CAP_OFFSET

    if np.all(proportions == 1.0):
        return PsychFit(theta=cap, sigma=SIGMA_FLOOR, rmse=_rmse(unique, proportions, cap, SIGMA_FLOOR),
                        capped=True, n_levels=unique.size)
    if np.all(proportions == 0.0):
        return PsychFit(theta=floor, sigma=SIGMA_FLOOR, rmse=_rmse(unique, proportions, floor, SIGMA_FLOOR),
                        capped=True, n_levels=unique.size)

    crossing = empirical_crossing(unique, proportions)
    ok, theta, sigma = _solve(unique, proportions, float(np.mean(unique)), INITIAL_SIGMA)
    retried = False
    if not ok or not floor - 1.0 <= theta <= cap + 1.0:
        logger.debug(f"2PL fit did not converge (theta={theta:.3f}); retrying from {crossing:.3f}")
        retried = True
        ok, theta, sigma = _solve(unique, proportions, crossing, INITIAL_SIGMA)
        if not ok:
            theta, sigma = crossing, INITIAL_SIGMA

    capped = False
    if theta > cap:
        theta, capped = cap, True
    elif theta < floor:
        theta, capped = floor, True
    if capped:
        logger.warning(f"2PL threshold capped at {theta:.2f}")

    return PsychFit(
        theta=theta,
        sigma=sigma,
        rmse=_rmse(unique, proportions, theta, sigma),
        capped=capped,
        retried=retried,
        n_levels=unique.size,
    )


def grid_search_2pl(
    levels: Sequence[float],
    outcomes: Sequence[bool],
    theta_step: float = 0.01,
    sigma_range: Tuple[float, float] = (SIGMA_FLOOR, 5.0),
) -> PsychFit:
    """Brute-force least squares over a (theta, sigma) grid, refined once around the coarse optimum."""
    unique, proportions = level_proportions(levels, outcomes)
    if unique.size < 2:
        raise StatsPreconditionError(f"need at least 2 difficulty levels, got {unique.size}")

    def search(thetas, sigmas):
        model = logistic_2pl(unique[None, None, :], thetas[:, None, None], sigmas[None, :, None])
        sse = ((model - proportions) ** 2).sum(axis=2)
        i, j = np.unravel_index(np.argmin(sse), sse.shape)
        return thetas[i], sigmas[j]

    lo, hi = float(unique.min()) - CAP_OFFSET, float(unique.max()) + CAP_OFFSET
    coarse = 10 * theta_step
    theta, sigma = search(np.arange(lo, hi + coarse / 2, coarse), np.arange(*sigma_range, coarse))
    theta, sigma = search(
        np.arange(max(lo, theta - coarse), min(hi, theta + coarse) + theta_step / 2, theta_step),
        np.arange(max(sigma_range[0], sigma - coarse), min(sigma_range[1], sigma + coarse) + theta_step / 2, theta_step),
    )
    return PsychFit(
        theta=float(theta),
        sigma=float(sigma),
        rmse=_rmse(unique, proportions, theta, sigma),
        n_levels=unique.size,
    )
