"""
Verdoorn Toolkit - Monte Carlo
------------------------------
Synthetic Verdoorn panels and a replication harness that measures bias,
RMSE, CI coverage and rejection rates of the estimators and tests.
"""

import configparser
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.errors import ConfigError, VerdoornError
from core.estimators import METHODS, UNTRUNCATED_LAGS, run_estimator
from core.panel_data import GrowthPanel
from core.results import SIGNIFICANCE, Coefficient, TestResult
from core.spec_tests import test_fe_vs_ols, test_hausman, test_re_vs_ols

logger = logging.getLogger("verdoorn.montecarlo")

TEST_LABELS = ("F_FE_OLS", "BP_LM", "HAUSMAN")
STUDY_LABELS = METHODS + TEST_LABELS

SUMMARY_COLUMNS = [
    "estimator",
    "replications",
    "successes",
    "failures",
    "mean_estimate",
    "bias",
    "rmse",
    "rejection_rate",
    "coverage_95",
    "failure_messages",
]


@dataclass(frozen=True)
class DgpSpec:
    """
    Data-generating process p_it = a + b q_it + u_i + e_it.

    q_it ~ N(q_mean, q_sd); u_i = kappa * mean_i(q) + N(0, sigma_u), or
    U(-h, h) when ``effect_halfwidth`` h > 0; e_it is AR(1) with parameter
    ``ar1_rho`` and innovation sd ``sigma_e``. With ``unit_root`` the series
    q and e are random walks.
    """

    n_entities: int = 7
    n_periods: int = 8
    intercept: float = 0.0
    slope: float = 0.7
    sigma_u: float = 0.05
    sigma_e: float = 0.02
    kappa: float = 0.0
    ar1_rho: float = 0.0
    unit_root: bool = False
    q_mean: float = 0.02
    q_sd: float = 0.08
    effect_halfwidth: float = 0.0
    lagged_dependent: bool = True
    max_instrument_lags: int = UNTRUNCATED_LAGS
    seed: int = 20240101

    def __post_init__(self):
        if self.n_entities < 1 or self.n_periods < 1:
            raise ConfigError(f"panel needs at least one entity and period, got {self.n_entities}x{self.n_periods}")
        for name in ("sigma_u", "sigma_e", "q_sd", "effect_halfwidth"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not self.unit_root and abs(self.ar1_rho) >= 1:
            raise ConfigError(f"|ar1_rho| must be below 1 for a stationary error, got {self.ar1_rho}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class ReplicationOutcome:
    index: int
    estimate: Optional[float] = None
    std_error: Optional[float] = None
    rejected: Optional[bool] = None
    covered: Optional[bool] = None
    error: Optional[str] = None

    @property
    def succeeded(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class McSummary:
    """
    Aggregate of one study. bias, rmse and coverage_95 are None for the
    test labels, which only report the rejection rate and mean statistic.
    """

    estimator: str
    replications: int
    successes: int
    failures: int
    mean_estimate: Optional[float]
    bias: Optional[float]
    rmse: Optional[float]
    rejection_rate: Optional[float]
    coverage_95: Optional[float]
    failure_messages: Tuple[str, ...] = ()

    def as_record(self) -> Dict[str, Any]:
        record = asdict(self)
        record["failure_messages"] = "; ".join(self.failure_messages)
        return record


def generate_panel(spec: DgpSpec) -> GrowthPanel:
    """Draw one synthetic growth panel; identical seeds give identical panels."""
    rng = np.random.default_rng(spec.seed)
    n, t = spec.n_entities, spec.n_periods

    if spec.unit_root:
        q = spec.q_mean + np.cumsum(rng.normal(0.0, spec.q_sd, size=(n, t)), axis=1)
    else:
        q = rng.normal(spec.q_mean, spec.q_sd, size=(n, t))

    if spec.effect_halfwidth > 0:
        noise_u = rng.uniform(-spec.effect_halfwidth, spec.effect_halfwidth, size=n)
    else:
        noise_u = rng.normal(0.0, spec.sigma_u, size=n)
    effects = spec.kappa * q.mean(axis=1) + noise_u

    shocks = rng.normal(0.0, spec.sigma_e, size=(n, t))
    if spec.unit_root:
        errors = np.cumsum(shocks, axis=1)
    else:
        errors = np.empty((n, t))
        errors[:, 0] = shocks[:, 0] / math.sqrt(1.0 - spec.ar1_rho ** 2)
        for col in range(1, t):
            errors[:, col] = spec.ar1_rho * errors[:, col - 1] + shocks[:, col]

    p = spec.intercept + spec.slope * q + effects[:, None] + errors
    width = max(2, len(str(n)))
    entities = np.repeat([f"e{i + 1:0{width}d}" for i in range(n)], t)
    periods = np.tile(np.arange(1, t + 1), n)
    return GrowthPanel.from_arrays(entities, periods, p.ravel(), q.ravel(), label="simulated")


def replication_seeds(master_seed: int, replications: int) -> List[int]:
    """Per-replication seeds: SeedSequence(master).generate_state(n, uint64)."""
    state = np.random.SeedSequence(master_seed).generate_state(replications, dtype=np.uint64)
    return [int(s) for s in state]


def _coverage(coefficient: Coefficient, truth: float, df: Optional[float]) -> bool:
    shifted = Coefficient.from_estimate(coefficient.estimate - truth, coefficient.std_error, df)
    return shifted.p_value >= SIGNIFICANCE


def _test_outcome(index: int, test: TestResult) -> ReplicationOutcome:
    return ReplicationOutcome(index, estimate=test.statistic, rejected=test.significant_5pct)


def _replicate(spec: DgpSpec, estimator: str, index: int, seed: int) -> ReplicationOutcome:
    gp = generate_panel(replace(spec, seed=seed))
    try:
        if estimator in METHODS:
            result = run_estimator(estimator, gp, spec.max_instrument_lags, spec.lagged_dependent)
            df = None if result.method == "DPD" else result.df_resid
            return ReplicationOutcome(
                index,
                estimate=result.slope.estimate,
                std_error=result.slope.std_error,
                rejected=result.slope.significant_5pct,
                covered=_coverage(result.slope, spec.slope, df),
            )
        ols = run_estimator("OLS", gp)
        if estimator == "BP_LM":
            return _test_outcome(index, test_re_vs_ols(gp, ols))
        fe = run_estimator("FE", gp)
        if estimator == "F_FE_OLS":
            return _test_outcome(index, test_fe_vs_ols(fe, ols))
        return _test_outcome(index, test_hausman(fe, run_estimator("RE", gp)))
    except (VerdoornError, np.linalg.LinAlgError) as exc:
        return ReplicationOutcome(index, error=f"{type(exc).__name__}: {exc}")


def run_replications(
    spec: DgpSpec,
    estimator: str,
    replications: int,
    workers: int = 1,
    order: Optional[Sequence[int]] = None,
) -> List[ReplicationOutcome]:
    """
    Run the replications of a study.

    Args:
        spec: DGP; its seed is the master seed.
        estimator: One of the estimator or test labels.
        replications: Number of draws.
        workers: Thread count; 1 runs inline.
        order: Execution order of replication indices (defaults to 0..n-1).

    Returns:
        One outcome per replication, in execution order.
    """
    label = _check_label(estimator)
    if replications < 1:
        raise ConfigError(f"replications must be at least 1, got {replications}")
    seeds = replication_seeds(spec.seed, replications)
    indices = list(range(replications)) if order is None else list(order)
    if sorted(indices) != list(range(replications)):
        raise ConfigError("order must be a permutation of the replication indices")

    if workers <= 1:
        return [_replicate(spec, label, i, seeds[i]) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: _replicate(spec, label, i, seeds[i]), indices))


def summarize_outcomes(estimator: str, truth: float, outcomes: Iterable[ReplicationOutcome]) -> McSummary:
    """Aggregate outcomes; failures are counted and excluded from the moments."""
    ordered = sorted(outcomes, key=lambda o: o.index)
    good = [o for o in ordered if o.succeeded]
    failed = [o for o in ordered if not o.succeeded]
    messages = tuple(dict.fromkeys(o.error for o in failed))
    if failed:
        logger.warning(f"{estimator}: {len(failed)} of {len(ordered)} replications failed")

    mean_estimate = bias = rmse = rejection = coverage = None
    if good:
        estimates = np.array([o.estimate for o in good], dtype=float)
        mean_estimate = float(estimates.mean())
        rejection = float(np.mean([o.rejected for o in good]))
        if estimator in METHODS:
            deviations = estimates - truth
            bias = float(deviations.mean())
            rmse = float(np.sqrt(np.mean(deviations * deviations)))
            coverage = float(np.mean([o.covered for o in good]))
    return McSummary(
        estimator=estimator,
        replications=len(ordered),
        successes=len(good),
        failures=len(failed),
        mean_estimate=mean_estimate,
        bias=bias,
        rmse=rmse,
        rejection_rate=rejection,
        coverage_95=coverage,
        failure_messages=messages,
    )


def run_study(spec: DgpSpec, estimator: str, replications: int, workers: int = 1) -> McSummary:
    """Replicate, then summarise against the true slope of ``spec``."""
    label = _check_label(estimator)
    logger.info(f"study {label}: {replications} replications, N={spec.n_entities}, T={spec.n_periods}, seed={spec.seed}")
    outcomes = run_replications(spec, label, replications, workers)
    return summarize_outcomes(label, spec.slope, outcomes)


def _check_label(estimator: str) -> str:
    label = str(estimator).strip().upper()
    if label not in STUDY_LABELS:
        raise ConfigError(f"unknown study estimator {estimator!r}, expected one of {STUDY_LABELS}")
    return label


_BOOLEAN_STATES = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _coerce(name: str, text: str, kind: type) -> Any:
    try:
        if kind is bool:
            return _BOOLEAN_STATES[text.strip().lower()]
        if kind is int:
            return int(text)
        return float(text)
    except (KeyError, ValueError):
        raise ConfigError(f"study key {name!r}: cannot read {text!r} as {kind.__name__}") from None


def study_from_mapping(values: Dict[str, Any]) -> Tuple[DgpSpec, str, int, int]:
    """Build (spec, estimator, replications, workers) from a flat mapping."""
    values = {str(k).strip().lower(): v for k, v in values.items()}
    kinds = {f.name: f.type for f in fields(DgpSpec)}
    known = set(kinds) | {"estimator", "replications", "workers"}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown study keys: {', '.join(unknown)}")

    spec_values = {
        name: value if isinstance(value, kinds[name]) and not isinstance(value, str) else _coerce(name, str(value), kinds[name])
        for name, value in values.items()
        if name in kinds
    }
    spec = DgpSpec(**spec_values)
    estimator = _check_label(values.get("estimator", "FE"))
    replications = _coerce("replications", str(values.get("replications", 100)), int)
    workers = _coerce("workers", str(values.get("workers", 1)), int)
    if replications < 1:
        raise ConfigError(f"replications must be at least 1, got {replications}")
    return spec, estimator, replications, workers


def read_study_mapping(path: Union[str, Path]) -> Dict[str, str]:
    """Parse a ``key = value`` study file into a flat mapping."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read study file {path}: {exc}") from exc
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string("[study]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"malformed study file {path}: {exc}") from exc
    return dict(parser["study"])


def load_study(path: Union[str, Path]) -> Tuple[DgpSpec, str, int, int]:
    """
    Read a study file.

    Returns:
        (DgpSpec, estimator label, replications, workers)
    """
    return study_from_mapping(read_study_mapping(path))


def write_summary_csv(summaries: Sequence[McSummary], out) -> None:
    """Write one CSV row per summary (path or open text stream)."""
    frame = pd.DataFrame([s.as_record() for s in summaries], columns=SUMMARY_COLUMNS)
    frame.to_csv(out, index=False, lineterminator="\n", float_format="%.10g")
