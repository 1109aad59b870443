"""
Verdoorn Toolkit - Estimators
-----------------------------
The four estimator rows of the Verdoorn tables: pooled OLS, fixed effects
(within), random effects (Swamy-Arora feasible GLS) and one-step
Arellano-Bond difference GMM with a lagged dependent variable.

Every estimator regresses productivity growth p on output growth q and
returns an EstimateResult; the slope is the Verdoorn coefficient.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from core.errors import (
    DegenerateRegressorError,
    EstimationError,
    InsufficientDataError,
    RankDeficiencyError,
)
from core.numerics import solve_least_squares, symmetric_inverse
from core.panel_data import GrowthPanel
from core.results import Coefficient, Distribution, EstimateResult, TestResult

logger = logging.getLogger("verdoorn.estimators")

METHODS = ("FE", "RE", "OLS", "DPD")

# Instrument depth meaning "all available lags".
UNTRUNCATED_LAGS = 99


def _group_means(values: np.ndarray, codes: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    sums = np.bincount(codes, weights=values, minlength=sizes.shape[0])
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(sizes > 0, sums / np.maximum(sizes, 1), 0.0)


def _r_squared(rss: float, tss: float) -> Optional[float]:
    if tss <= 0:
        return None
    return float(min(1.0, max(0.0, 1.0 - rss / tss)))


def _squared_correlation(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    a = a - a.mean()
    b = b - b.mean()
    denominator = float((a @ a) * (b @ b))
    if denominator <= 0:
        return None
    return float(min(1.0, max(0.0, (a @ b) ** 2 / denominator)))


def _coefficients(fit, sigma2: float, df: Optional[float]) -> List[Coefficient]:
    std_errors = np.sqrt(np.maximum(sigma2 * np.diag(fit.xtx_inverse), 0.0))
    return [Coefficient.from_estimate(b, se, df) for b, se in zip(fit.coefficients, std_errors)]


def _check_regressor(gp: GrowthPanel) -> None:
    if gp.usable_observations < 3:
        raise InsufficientDataError(
            f"need at least 3 growth rows, have {gp.usable_observations}",
            required=3,
            available=gp.usable_observations,
        )
    if np.ptp(gp.q) == 0:
        raise DegenerateRegressorError("output growth q is constant; slope not identified")


def estimate_ols(gp: GrowthPanel) -> EstimateResult:
    """Pooled regression of p on a constant and q with conventional standard errors."""
    _check_regressor(gp)
    p, q = gp.p, gp.q
    n = gp.usable_observations
    fit = solve_least_squares(np.column_stack([np.ones(n), q]), p)
    df = n - 2
    intercept, slope = _coefficients(fit, fit.residual_sum_squares / df, df)
    model_test = TestResult.evaluate("F", slope.t_statistic ** 2, Distribution.f(1, df), "slope = 0")
    centred = p - p.mean()
    return EstimateResult(
        method="OLS",
        intercept=intercept,
        slope=slope,
        model_test=model_test,
        n_observations=n,
        n_entities=gp.entity_count,
        residual_sum_squares=fit.residual_sum_squares,
        df_resid=df,
        r_squared_overall=_r_squared(fit.residual_sum_squares, float(centred @ centred)),
        label=gp.label,
    )


@dataclass(frozen=True)
class _WithinFit:
    slope: float
    var_slope: float
    intercept: float
    var_intercept: float
    rss: float
    df: int
    p_demeaned: np.ndarray
    q_demeaned: np.ndarray
    p_means: np.ndarray
    q_means: np.ndarray


def _within(gp: GrowthPanel) -> _WithinFit:
    sizes = gp.entity_sizes
    if int(np.sum(sizes >= 2)) < 2:
        raise InsufficientDataError(
            "within estimation needs at least 2 entities with 2 or more rows",
            required=2,
            available=int(np.sum(sizes >= 2)),
        )
    n, n_entities = gp.usable_observations, gp.entity_count
    df = n - n_entities - 1
    if df <= 0:
        raise InsufficientDataError(
            f"{n} rows leave no within degrees of freedom for {n_entities} entities",
            required=n_entities + 2,
            available=n,
        )
    codes = gp.codes
    p_means = _group_means(gp.p, codes, sizes)
    q_means = _group_means(gp.q, codes, sizes)
    p_w = gp.p - p_means[codes]
    q_w = gp.q - q_means[codes]
    scale = max(1.0, float(np.abs(gp.q).max()))
    if np.all(np.abs(q_w) <= 1e-12 * scale):
        raise DegenerateRegressorError("q is constant within every entity; within slope not identified")

    fit = solve_least_squares(q_w[:, None], p_w)
    slope = float(fit.coefficients[0])
    sigma2 = fit.residual_sum_squares / df
    var_slope = sigma2 * float(fit.xtx_inverse[0, 0])
    q_bar = float(gp.q.mean())
    return _WithinFit(
        slope=slope,
        var_slope=var_slope,
        intercept=float(gp.p.mean()) - slope * q_bar,
        var_intercept=sigma2 / n + q_bar ** 2 * var_slope,
        rss=fit.residual_sum_squares,
        df=df,
        p_demeaned=p_w,
        q_demeaned=q_w,
        p_means=p_means,
        q_means=q_means,
    )


def estimate_fixed_effects(gp: GrowthPanel) -> EstimateResult:
    """
    Within estimator with entity effects recovered around a grand-mean intercept.

    The reported constant is the observation-weighted mean of p_i - b q_i
    (equal to mean(p) - b mean(q)); entity effects are deviations from it and
    average to zero when weighted by entity row counts.
    """
    _check_regressor(gp)
    within = _within(gp)
    intercept = Coefficient.from_estimate(within.intercept, math.sqrt(max(within.var_intercept, 0.0)), within.df)
    slope = Coefficient.from_estimate(within.slope, math.sqrt(max(within.var_slope, 0.0)), within.df)
    effects = within.p_means - within.slope * within.q_means - within.intercept
    model_test = TestResult.evaluate("F", slope.t_statistic ** 2, Distribution.f(1, within.df), "slope = 0")
    return EstimateResult(
        method="FE",
        intercept=intercept,
        slope=slope,
        model_test=model_test,
        n_observations=gp.usable_observations,
        n_entities=gp.entity_count,
        residual_sum_squares=within.rss,
        df_resid=within.df,
        r_squared_within=_r_squared(within.rss, float(within.p_demeaned @ within.p_demeaned)),
        r_squared_overall=_squared_correlation(gp.p, within.intercept + within.slope * gp.q),
        entity_effects={entity: float(u) for entity, u in zip(gp.entities, effects)},
        sigma_e2=within.rss / within.df,
        label=gp.label,
    )


def _between_variance(p_means: np.ndarray, q_means: np.ndarray, notes: List[str]) -> float:
    n_entities = p_means.shape[0]
    ones = np.ones(n_entities)
    try:
        fit = solve_least_squares(np.column_stack([ones, q_means]), p_means)
        return fit.residual_sum_squares / (n_entities - 2)
    except RankDeficiencyError:
        notes.append("entity means of q are identical; between variance taken around the mean of p")
        fit = solve_least_squares(ones[:, None], p_means)
        return fit.residual_sum_squares / (n_entities - 1)


def estimate_random_effects(gp: GrowthPanel) -> EstimateResult:
    """
    Swamy-Arora feasible GLS.

    sigma_e^2 comes from the within residuals and sigma_u^2 from the between
    regression, sigma_b^2 - sigma_e^2 / T_h with T_h the harmonic mean of the
    entity lengths, clamped at zero. Each entity is quasi-demeaned with
    theta_i = 1 - sqrt(sigma_e^2 / (T_i sigma_u^2 + sigma_e^2)).
    """
    _check_regressor(gp)
    within = _within(gp)
    n_entities = gp.entity_count
    if n_entities < 3:
        raise InsufficientDataError(
            "random effects needs at least 3 entities for the between regression",
            required=3,
            available=n_entities,
        )
    notes: List[str] = []
    sizes = gp.entity_sizes.astype(float)
    sigma_e2 = within.rss / within.df
    sigma_b2 = _between_variance(within.p_means, within.q_means, notes)
    harmonic_t = n_entities / float(np.sum(1.0 / sizes))
    sigma_u2 = sigma_b2 - sigma_e2 / harmonic_t
    if sigma_u2 <= 0:
        if sigma_u2 < 0:
            notes.append("RE degenerates to pooled OLS (sigma_u^2 clamped at 0)")
            logger.info(f"{gp.label or 'panel'}: sigma_u^2 = {sigma_u2:.3g} clamped at 0")
        sigma_u2 = 0.0

    denominators = sizes * sigma_u2 + sigma_e2
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.where(denominators > 0, 1.0 - np.sqrt(sigma_e2 / np.where(denominators > 0, denominators, 1.0)), 0.0)

    codes = gp.codes
    th = theta[codes]
    n = gp.usable_observations
    y_star = gp.p - th * within.p_means[codes]
    x_star = np.column_stack([1.0 - th, gp.q - th * within.q_means[codes]])
    fit = solve_least_squares(x_star, y_star)
    df = n - 2
    intercept, slope = _coefficients(fit, fit.residual_sum_squares / df, df)
    model_test = TestResult.evaluate("Wald", slope.t_statistic ** 2, Distribution.chi_squared(1), "slope = 0")
    return EstimateResult(
        method="RE",
        intercept=intercept,
        slope=slope,
        model_test=model_test,
        n_observations=n,
        n_entities=n_entities,
        residual_sum_squares=fit.residual_sum_squares,
        df_resid=df,
        r_squared_within=_squared_correlation(within.p_demeaned, slope.estimate * within.q_demeaned),
        r_squared_overall=_squared_correlation(gp.p, intercept.estimate + slope.estimate * gp.q),
        sigma_u2=sigma_u2,
        sigma_e2=sigma_e2,
        theta={entity: float(t) for entity, t in zip(gp.entities, theta)},
        notes=tuple(notes),
        label=gp.label,
    )


@dataclass(frozen=True)
class DpdDesign:
    """
    First-differenced design of the dynamic panel model.

    Rows are differenced equations (entity, period). Regressors are the
    drift constant, the lagged differenced dependent variable (optional) and
    the differenced output growth. Instruments are the constant, the
    differenced output growth and one GMM-style column per (equation period,
    level lag) pair, zero where the lag is unavailable.
    """

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    codes: np.ndarray
    periods: np.ndarray
    regressors: Tuple[str, ...]
    instruments: Tuple[str, ...]

    @property
    def n_rows(self) -> int:
        return int(self.y.shape[0])

    @property
    def n_instruments(self) -> int:
        return int(self.Z.shape[1])


def build_dpd_design(gp: GrowthPanel, max_instrument_lags: int = UNTRUNCATED_LAGS, lagged_dependent: bool = True) -> DpdDesign:
    """
    Difference the model and lay out the GMM-style instrument matrix.

    An equation for period t needs p and q at t and t-1 (and p at t-2 with
    the lagged dependent variable). Its level instruments are p at
    t-2, ..., t-1-max_instrument_lags, whichever the entity observed.
    """
    if max_instrument_lags < 1:
        raise EstimationError(f"max_instrument_lags must be at least 1, got {max_instrument_lags}")

    equations = []
    for code, entity in enumerate(gp.entities):
        observed = {row.period: row for row in gp.entity_rows(entity)}
        for t in sorted(observed):
            if t - 1 not in observed or (lagged_dependent and t - 2 not in observed):
                continue
            now, before = observed[t], observed[t - 1]
            lags = {
                s: observed[s].p
                for s in range(t - 1 - max_instrument_lags, t - 1)
                if s in observed
            }
            lagged = before.p - observed[t - 2].p if lagged_dependent else None
            equations.append((code, t, now.p - before.p, lagged, now.q - before.q, lags))

    gmm_columns = sorted({(t, s) for _, t, _, _, _, lags in equations for s in lags})
    column_index = {key: 2 + j for j, key in enumerate(gmm_columns)}
    n_rows = len(equations)
    Z = np.zeros((n_rows, 2 + len(gmm_columns)))
    regressors = ("const", "L.dp", "dq") if lagged_dependent else ("const", "dq")
    X = np.zeros((n_rows, len(regressors)))
    y = np.zeros(n_rows)
    codes = np.zeros(n_rows, dtype=int)
    periods = np.zeros(n_rows, dtype=int)
    for row, (code, t, dp, lagged, dq, lags) in enumerate(equations):
        y[row] = dp
        X[row, 0] = 1.0
        X[row, -1] = dq
        if lagged_dependent:
            X[row, 1] = lagged
        Z[row, 0] = 1.0
        Z[row, 1] = dq
        for s, level in lags.items():
            Z[row, column_index[(t, s)]] = level
        codes[row] = code
        periods[row] = t

    instruments = ("const", "dq") + tuple(f"p[{s}]@{t}" for t, s in gmm_columns)
    return DpdDesign(y, X, Z, codes, periods, regressors, instruments)


def _difference_covariance(periods: np.ndarray) -> np.ndarray:
    """2 on the diagonal, -1 for adjacent periods, 0 elsewhere."""
    gap = np.abs(periods[:, None] - periods[None, :])
    return np.where(gap == 0, 2.0, np.where(gap == 1, -1.0, 0.0))


def estimate_dpd_gmm(
    gp: GrowthPanel,
    max_instrument_lags: int = UNTRUNCATED_LAGS,
    lagged_dependent: bool = True,
) -> EstimateResult:
    """
    One-step Arellano-Bond difference GMM with robust standard errors.

    The weighting matrix is (sum_i Z_i' H Z_i)^-1 with H the first-difference
    covariance pattern; a pseudo-inverse is used (and flagged) when that sum
    is singular. The constant of the differenced equation is the drift term
    reported as Const.; no time dummies are included.

    Args:
        gp: Growth panel.
        max_instrument_lags: Deepest level lag used as an instrument.
        lagged_dependent: Include the lagged dependent variable (rho term).
    """
    design = build_dpd_design(gp, max_instrument_lags, lagged_dependent)
    n_rows, n_instruments = design.n_rows, design.n_instruments
    n_params = design.X.shape[1]
    if n_rows < n_instruments:
        raise InsufficientDataError(
            f"{n_rows} usable differenced rows but {n_instruments} instruments",
            required=n_instruments,
            available=n_rows,
        )
    if n_rows <= n_params:
        raise InsufficientDataError(
            f"{n_rows} usable differenced rows for {n_params} parameters",
            required=n_params + 1,
            available=n_rows,
        )
    if np.ptp(design.X[:, -1]) == 0:
        raise DegenerateRegressorError("differenced output growth is constant")

    Z, X, y = design.Z, design.X, design.y
    weighting_sum = np.zeros((n_instruments, n_instruments))
    for code in np.unique(design.codes):
        rows = design.codes == code
        z_i = Z[rows]
        weighting_sum += z_i.T @ _difference_covariance(design.periods[rows]) @ z_i
    weight, used_pseudo = symmetric_inverse(weighting_sum)
    flags: Tuple[str, ...] = ()
    if used_pseudo:
        flags = ("pseudo_inverse_weighting",)
        logger.warning(f"{gp.label or 'panel'}: singular GMM weighting matrix, pseudo-inverse used")

    # W = R R', so the GMM criterion is a least-squares problem in R' Z' (y - X b).
    eigenvalues, eigenvectors = np.linalg.eigh(weight)
    root = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
    zx, zy = Z.T @ X, Z.T @ y
    fit = solve_least_squares(root.T @ zx, root.T @ zy)
    beta = fit.coefficients
    bread = fit.xtx_inverse

    residuals = y - X @ beta
    moments = np.zeros((len(gp.entities), n_instruments))
    np.add.at(moments, design.codes, Z * residuals[:, None])
    meat = zx.T @ weight @ (moments.T @ moments) @ weight @ zx
    covariance = bread @ meat @ bread
    std_errors = np.sqrt(np.maximum(np.diag(covariance), 0.0))
    coefficients = [Coefficient.from_estimate(b, se, None) for b, se in zip(beta, std_errors)]
    slope = coefficients[-1]
    model_test = TestResult.evaluate("Wald", slope.t_statistic ** 2, Distribution.chi_squared(1), "slope = 0")
    notes = ["constant is the drift of the differenced equation; no time dummies"]
    if not lagged_dependent:
        notes.append("lagged dependent variable switched off")
    return EstimateResult(
        method="DPD",
        intercept=coefficients[0],
        slope=slope,
        model_test=model_test,
        n_observations=n_rows,
        n_entities=int(np.unique(design.codes).shape[0]),
        residual_sum_squares=float(residuals @ residuals),
        df_resid=n_rows - n_params,
        n_instruments=n_instruments,
        rho=coefficients[1] if lagged_dependent else None,
        notes=tuple(notes),
        flags=flags,
        label=gp.label,
    )


@dataclass(frozen=True)
class ReturnsToScale:
    coefficient: float
    implied_degree: Optional[float]
    classification: str


def returns_to_scale(result: EstimateResult) -> ReturnsToScale:
    """
    Read the Verdoorn coefficient as a returns-to-scale statement.

    The implied degree of returns is 1 / (1 - b) for b < 1. A coefficient
    significantly above zero signals increasing returns, and one at or above
    one signals strong increasing returns.
    """
    b = result.slope.estimate
    degree = 1.0 / (1.0 - b) if b < 1.0 else None
    if not result.slope.significant_5pct:
        classification = "constant"
    elif b >= 1.0:
        classification = "strong increasing"
    elif b > 0:
        classification = "increasing"
    else:
        classification = "decreasing"
    return ReturnsToScale(b, degree, classification)


def run_estimator(method: str, gp: GrowthPanel, max_instrument_lags: int = UNTRUNCATED_LAGS, lagged_dependent: bool = True) -> EstimateResult:
    """Dispatch on an estimator label (OLS, FE, RE, DPD)."""
    handlers: Dict[str, Callable[[], EstimateResult]] = {
        "OLS": lambda: estimate_ols(gp),
        "FE": lambda: estimate_fixed_effects(gp),
        "RE": lambda: estimate_random_effects(gp),
        "DPD": lambda: estimate_dpd_gmm(gp, max_instrument_lags, lagged_dependent),
    }
    handler = handlers.get(method.upper())
    if handler is None:
        raise EstimationError(f"unknown estimator {method!r}, expected one of {METHODS}")
    return handler()
