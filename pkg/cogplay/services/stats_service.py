"""
Service for correlation and reliability statistics.

Pearson r with two-tailed p, Bayes factors for a correlation, OLS residual
RMSE, and ICC(2,1) from a two-way ANOVA decomposition.
"""
import io
import logging
import math
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, optimize, special, stats

from ..errors import BayesFactorError, StatsPreconditionError
from ..models.endpoints import EndpointRow
from ..models.stats import CorrResult, ICCResult, Pairing, PairingSpec

logger = logging.getLogger(__name__)

DEFAULT_BF_SCALE = 1.0 / math.sqrt(2.0)
QUAD_RELATIVE_TOLERANCE = 1e-6
CORRELATION_COLUMNS = ["label", "r", "n", "p", "bf10", "rmse", "slope", "intercept", "p_limit"]
ICC_COLUMNS = ["label", "icc", "n", "k", "p", "f", "msr", "msc", "mse"]


def _paired(x: Sequence[float], y: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise StatsPreconditionError("x and y must be 1-D sequences of equal length")
    if x.size < 3:
        raise StatsPreconditionError(f"need at least 3 paired values, got {x.size}")
    return x, y


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = _paired(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise StatsPreconditionError("correlation undefined: zero variance")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def p_two_tailed(r: float, n: int) -> float:
    """
    Two-tailed p of t = r sqrt(n-2) / sqrt(1-r^2) on n-2 degrees of freedom.

    The tail is the regularized incomplete beta I_{1-r^2}((n-2)/2, 1/2).
    |r| = 1 returns the limit 0.
    """
    if n < 3:
        raise StatsPreconditionError(f"need n >= 3, got {n}")
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    return float(special.betainc(df / 2.0, 0.5, 1.0 - r * r))


def _bf_jeffreys(r: float, n: int) -> float:
    log_bf = -0.5 * math.log((2 * n - 3) / math.pi) - 0.5 * (n - 4) * math.log1p(-r * r)
    return math.exp(log_bf)


def _bf_uniform(r: float, n: int) -> float:
    """Exact Bayes factor under a uniform prior on rho."""
    log_front = 0.5 * math.log(math.pi) - math.log(2.0) + special.gammaln((n + 1) / 2.0) - special.gammaln(n / 2.0 + 1.0)
    return math.exp(log_front) * float(special.hyp2f1((n - 1) / 2.0, (n - 1) / 2.0, (n + 2) / 2.0, r * r))


def _bf_jzs(r: float, n: int, scale: float) -> float:
    """
    One-predictor linear-model Bayes factor with a Zellner-Siow Cauchy prior.

    Integrates over g with an inverse-gamma(1/2, n scale^2 / 2) mixing density,
    which puts a Cauchy(0, scale) prior on the standardized effect size.
    """
    r2 = r * r
    rate = 0.5 * n * scale * scale
    log_norm = 0.5 * math.log(rate) - 0.5 * math.log(math.pi)

    def log_integrand(g: float) -> float:
        return (
            0.5 * (n - 2) * math.log1p(g)
            - 0.5 * (n - 1) * math.log1p((1.0 - r2) * g)
            + log_norm - 1.5 * math.log(g) - rate / g
        )

    peak = optimize.minimize_scalar(
        lambda u: -(log_integrand(math.exp(u)) + u), bounds=(-30.0, 30.0), method="bounded"
    )
    g_peak = math.exp(peak.x)
    log_max = log_integrand(g_peak)

    def integrand(g: float) -> float:
        if g <= 0.0:
            return 0.0
        return math.exp(log_integrand(g) - log_max)

    total, abserr = 0.0, 0.0
    for lo, hi in ((0.0, g_peak), (g_peak, np.inf)):
        value, err = integrate.quad(integrand, lo, hi, epsrel=1e-9, limit=200)
        total += value
        abserr += err
    if not np.isfinite(total) or total <= 0.0 or abserr > QUAD_RELATIVE_TOLERANCE * total:
        raise BayesFactorError("Bayes factor quadrature did not converge", abserr=abserr, value=total)
    return total * math.exp(log_max)


def jzs_bf(r: float, n: int, method: str = "jeffreys", scale: float = DEFAULT_BF_SCALE) -> float:
    """
    Bayes factor BF10 for a correlation r observed on n pairs.

    Methods:
        jeffreys: closed-form approximation; ignores `scale`
        uniform: exact form under a uniform prior on rho; ignores `scale`
        jzs: adaptive quadrature of the one-predictor Zellner-Siow model with Cauchy `scale`

    jeffreys is the default because it is the only method within 15% of all
    eight published (r, n, BF) values; jzs at scale 1/sqrt(2) runs about 1.6x
    high at (0.93, 16).
    """
    if n < 3:
        raise StatsPreconditionError(f"need n >= 3, got {n}")
    if abs(r) >= 1.0:
        return math.inf
    if method == "jeffreys":
        return _bf_jeffreys(r, n)
    if method == "uniform":
        return _bf_uniform(r, n)
    if method == "jzs":
        return _bf_jzs(r, n, scale)
    raise StatsPreconditionError(f"unknown Bayes factor method '{method}'")


def linfit_rmse(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float, float]:
    """Ordinary least squares; returns (slope, intercept, sqrt(mean squared residual))."""
    x, y = _paired(x, y)
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise StatsPreconditionError("regression undefined: zero variance in x")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    residuals = y - (slope * x + intercept)
    return slope, intercept, float(np.sqrt(np.mean(residuals ** 2)))


def correlate(
    x: Sequence[float],
    y: Sequence[float],
    label: str = "",
    method: str = "jeffreys",
    scale: float = DEFAULT_BF_SCALE,
) -> CorrResult:
    r = pearson(x, y)
    n = len(x)
    slope, intercept, rmse = linfit_rmse(x, y)
    return CorrResult(
        label=label,
        r=r,
        n=n,
        p=p_two_tailed(r, n),
        bf10=jzs_bf(r, n, method=method, scale=scale),
        rmse=rmse,
        slope=slope,
        intercept=intercept,
        p_limit=abs(r) >= 1.0,
    )


def icc_2_1(matrix, label: str = "") -> ICCResult:
    """
    ICC(2,1): two-way random effects, absolute agreement, single measurement.

    Raises:
        StatsPreconditionError: missing cells, fewer than 2 subjects or sessions, or no variance
    """
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise StatsPreconditionError("ICC needs a subjects x sessions matrix")
    n, k = x.shape
    if n < 2 or k < 2:
        raise StatsPreconditionError(f"ICC needs at least 2 subjects and 2 sessions, got {n}x{k}")
    if not np.all(np.isfinite(x)):
        raise StatsPreconditionError("ICC matrix has missing cells")

    row_means = x.mean(axis=1)
    col_means = x.mean(axis=0)
    grand = float(col_means.mean())
    ss_rows = k * float(np.sum((row_means - grand) ** 2))
    ss_cols = n * float(np.sum((col_means - grand) ** 2))
    residuals = x - row_means[:, None] - col_means[None, :] + grand
    ss_error = float(np.sum(residuals ** 2))

    msr = ss_rows / (n - 1)
    msc = ss_cols / (k - 1)
    mse = ss_error / ((n - 1) * (k - 1))
    denominator = msr + (k - 1) * mse + k * (msc - mse) / n
    if denominator == 0.0:
        raise StatsPreconditionError("ICC undefined: no variance in the matrix")
    icc = (msr - mse) / denominator

    if mse == 0.0:
        f_value, p = None, 0.0
    else:
        f_value = msr / mse
        p = float(stats.f.sf(f_value, n - 1, (n - 1) * (k - 1)))
    return ICCResult(label=label, icc=min(icc, 1.0), n=n, k=k, p=p, f=f_value, msr=msr, msc=msc, mse=mse)


# ============================================================================
# Endpoint tables
# ============================================================================

def _participant_values(rows: List[EndpointRow], game: str, kind: str, form: Optional[str]) -> Dict[str, float]:
    """Mean endpoint per participant over their sessions."""
    collected: Dict[str, List[float]] = defaultdict(list)
    for row in rows:
        if row.game == game and row.kind == kind and (form is None or row.form == form):
            collected[row.participant].append(row.value)
    return {p: float(np.mean(v)) for p, v in collected.items()}


def pair_endpoints(rows: List[EndpointRow], spec: PairingSpec) -> List[CorrResult]:
    """
    One correlation per pairing over participants present in both tasks.

    Participants missing either endpoint are left out of that pairing only.
    """
    results = []
    for pairing in spec.pairings:
        xs = _participant_values(rows, pairing.x_game, pairing.x_kind, pairing.x_form)
        ys = _participant_values(rows, pairing.y_game, pairing.y_kind, pairing.y_form)
        shared = sorted(set(xs) & set(ys))
        logger.debug(f"Pairing '{pairing.label}': {len(shared)} participants in both tasks")
        try:
            results.append(correlate(
                [xs[p] for p in shared],
                [ys[p] for p in shared],
                label=pairing.label,
                method=spec.bf_method,
                scale=spec.bf_scale,
            ))
        except StatsPreconditionError as e:
            raise StatsPreconditionError(f"pairing '{pairing.label}': {e.detail}")
    return results


def default_pairings(rows: List[EndpointRow]) -> PairingSpec:
    """RT against gRT for every game that has both."""
    kinds = defaultdict(set)
    for row in rows:
        if row.source == "game":
            kinds[row.game].add(row.kind)
    pairings = [
        Pairing(label=f"{game} RT vs gRT", x_game=game, x_kind="RT", y_game=game, y_kind="gRT")
        for game in sorted(kinds)
        if {"RT", "gRT"} <= kinds[game]
    ]
    return PairingSpec(pairings=pairings)


def icc_from_table(rows: List[EndpointRow], game: str, kind: str, sessions: int = 2) -> ICCResult:
    """
    Test-retest ICC over each participant's first `sessions` sessions (by session label).

    Participants without that many sessions are dropped listwise.
    """
    per_participant: Dict[str, List[Tuple[str, float]]] = defaultdict(list)
    for row in rows:
        if row.game == game and row.kind == kind:
            per_participant[row.participant].append((row.session, row.value))

    matrix = []
    for participant in sorted(per_participant):
        ordered = sorted(per_participant[participant])
        if len(ordered) >= sessions:
            matrix.append([value for _, value in ordered[:sessions]])
        else:
            logger.debug(f"ICC {game} {kind}: {participant} has {len(ordered)} sessions, dropped")
    if len(matrix) < 2:
        raise StatsPreconditionError(f"ICC {game} {kind}: fewer than 2 participants with {sessions} sessions")
    return icc_2_1(matrix, label=f"{game} {kind}")


def icc_table(rows: List[EndpointRow]) -> List[ICCResult]:
    """ICC for every game endpoint with enough complete participants."""
    results = []
    combos = sorted({(r.game, r.kind) for r in rows if r.source == "game"})
    for game, kind in combos:
        try:
            results.append(icc_from_table(rows, game, kind))
        except StatsPreconditionError as e:
            logger.warning(f"Skipping ICC: {e.detail}")
    return results


def _csv(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def correlations_csv(results: List[CorrResult]) -> str:
    return _csv(pd.DataFrame([r.model_dump() for r in results], columns=CORRELATION_COLUMNS))


def icc_csv(results: List[ICCResult]) -> str:
    return _csv(pd.DataFrame([r.model_dump() for r in results], columns=ICC_COLUMNS))
