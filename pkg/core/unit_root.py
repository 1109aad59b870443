"""
Verdoorn Toolkit - Unit Root Tests
----------------------------------
Per-entity Phillips-Perron tests on the growth series and their Fisher-type
panel combinations: inverse chi-squared (P), inverse normal (Z) and
inverse logit (L*).
"""

import logging
import math
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.errors import ConfigError, RankDeficiencyError, UnitRootError
from core.numerics import as_vector, cdf_normal, quantile_normal, solve_least_squares
from core.panel_data import GrowthPanel
from core.results import SIGNIFICANCE, Distribution, TestResult

logger = logging.getLogger("verdoorn.unit_root")

# MacKinnon (1994) response surface, one unit root, constant and no trend.
# p = Phi(sum_k c_k tau^k), small-p polynomial up to tau_star, large-p above it.
MACKINNON_CONSTANT = {
    "tau_min": -18.83,
    "tau_star": -1.61,
    "tau_max": 2.74,
    "small_p": (2.1659, 1.4412, 3.8269e-2),
    "large_p": (1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2),
}

P_VALUE_FLOOR = 1e-6
P_VALUE_CEILING = 1.0 - 1e-6

RESIDUAL_FLOOR = 1e-20

POLICY_KINDS = ("fixed", "escalate", "until_significant")


@dataclass(frozen=True)
class LagPolicy:
    """How the Newey-West bandwidth of each entity's test is chosen."""

    kind: str = "fixed"
    lags: int = 1

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown lag policy {self.kind!r}, expected one of {POLICY_KINDS}")
        if self.kind == "fixed" and self.lags < 1:
            raise ConfigError(f"fixed lag policy needs at least 1 lag, got {self.lags}")

    @classmethod
    def parse(cls, text: str) -> "LagPolicy":
        """Parse 'fixed:K', 'fixed(K)', 'escalate' or 'until_significant'."""
        value = str(text).strip().lower().replace("-", "_")
        match = re.fullmatch(r"fixed(?:[:(]\s*(\d+)\s*\)?)?", value)
        if match:
            return cls("fixed", int(match.group(1) or 1))
        return cls(value)

    @property
    def label(self) -> str:
        return f"fixed:{self.lags}" if self.kind == "fixed" else self.kind


@dataclass(frozen=True)
class EntityUnitRootStat:
    entity: str
    t_statistic: float
    lags_used: int
    p_value: float
    raw_p_value: float
    n_observations: int
    policy: str = "fixed:1"

    @property
    def clamped(self) -> bool:
        return self.p_value != self.raw_p_value


@dataclass(frozen=True)
class FisherCombination:
    chi_squared: TestResult
    normal: TestResult
    logit: TestResult
    n_entities: int
    clamped: bool = False

    @property
    def inverse_chi_squared_P(self) -> float:
        return self.chi_squared.statistic

    @property
    def inverse_normal_Z(self) -> float:
        return self.normal.statistic

    @property
    def inverse_logit_L_star(self) -> float:
        return self.logit.statistic

    @property
    def statistics(self) -> Tuple[TestResult, TestResult, TestResult]:
        return (self.chi_squared, self.normal, self.logit)


@dataclass(frozen=True)
class UnitRootReport:
    variable: str
    policy: str
    stats: Tuple[EntityUnitRootStat, ...]
    combination: Optional[FisherCombination]
    excluded: Tuple[Tuple[str, str], ...] = ()
    notes: Tuple[str, ...] = ()
    label: str = ""

    @property
    def superscript(self) -> str:
        """'a' when every entity used one lag, 'b' when any used more."""
        return "a" if all(s.lags_used == 1 for s in self.stats) else "b"


def mackinnon_p_value(tau: float) -> float:
    """Asymptotic p-value of a constant-only Dickey-Fuller tau statistic."""
    surface = MACKINNON_CONSTANT
    if tau > surface["tau_max"]:
        return 1.0
    if tau < surface["tau_min"]:
        return 0.0
    coefficients = surface["small_p"] if tau <= surface["tau_star"] else surface["large_p"]
    return cdf_normal(float(np.polyval(coefficients[::-1], tau)))


def long_run_variance(residuals: np.ndarray, lags: int) -> float:
    """Bartlett-kernel (Newey-West) long-run variance of mean-zero residuals."""
    n = residuals.shape[0]
    value = float(residuals @ residuals) / n
    for j in range(1, lags + 1):
        weight = 1.0 - j / (lags + 1.0)
        value += 2.0 * weight * float(residuals[j:] @ residuals[:-j]) / n
    return value


def _dickey_fuller_fit(y: np.ndarray):
    dy = np.diff(y)
    X = np.column_stack([np.ones(dy.shape[0]), y[:-1]])
    try:
        return solve_least_squares(X, dy)
    except RankDeficiencyError:
        raise UnitRootError("degenerate unit-root regression: lagged level has no variation") from None


def pp_test_entity(series: Sequence[float], lags: int, entity: str = "", policy: str = "") -> EntityUnitRootStat:
    """
    Phillips-Perron tau test of a unit root in one series.

    Estimates dy_t = a + rho y_{t-1} + e_t by OLS and corrects the t-ratio
    of rho with a Bartlett long-run variance of e using ``lags`` as the
    bandwidth. Null: the series has a unit root.

    Raises:
        UnitRootError: If the series is shorter than lags + 4 or the
            regression is degenerate.
    """
    y = as_vector(series, name="series")
    if lags < 0:
        raise UnitRootError(f"lags must be non-negative, got {lags}")
    required = lags + 4
    if y.shape[0] < required:
        raise UnitRootError(f"series of length {y.shape[0]} is too short; {required} observations required")

    fit = _dickey_fuller_fit(y)
    n = fit.n_observations
    rss = fit.residual_sum_squares
    s2 = rss / (n - 2)
    gamma0 = rss / n
    lam2 = long_run_variance(fit.residuals, lags)
    # Residuals at rounding level of the series count as an exact fit.
    if gamma0 <= RESIDUAL_FLOOR * float(y @ y) / y.shape[0] or lam2 <= 0:
        raise UnitRootError("degenerate unit-root regression: zero residual or long-run variance")
    se_rho = math.sqrt(s2 * fit.xtx_inverse[1, 1])
    rho = float(fit.coefficients[1])
    lam = math.sqrt(lam2)
    tau = math.sqrt(gamma0 / lam2) * rho / se_rho - 0.5 * (lam2 - gamma0) / lam * (n * se_rho / math.sqrt(s2))
    raw = mackinnon_p_value(tau)
    return EntityUnitRootStat(
        entity=entity,
        t_statistic=tau,
        lags_used=lags,
        p_value=min(max(raw, P_VALUE_FLOOR), P_VALUE_CEILING),
        raw_p_value=raw,
        n_observations=int(y.shape[0]),
        policy=policy or f"fixed:{lags}",
    )


def bandwidth_cap(length: int) -> int:
    """floor(4 (T/100)^(2/9)), at least 1."""
    return max(1, int(math.floor(4.0 * (length / 100.0) ** (2.0 / 9.0))))


def select_lags(series: Sequence[float], policy: LagPolicy) -> int:
    """
    Choose the bandwidth for one series.

    fixed(k) returns k. escalate walks from 1 up to the bandwidth cap and
    returns the first lag with a positive long-run variance.
    until_significant walks the same range and stops at the first lag whose
    test rejects at 5%, keeping the cap when none does.
    """
    if policy.kind == "fixed":
        return policy.lags
    y = as_vector(series, name="series")
    cap = max(1, min(bandwidth_cap(y.shape[0]), y.shape[0] - 4))
    if policy.kind == "escalate":
        try:
            residuals = _dickey_fuller_fit(y).residuals
        except UnitRootError:
            return 1
        for lags in range(1, cap + 1):
            if long_run_variance(residuals, lags) > 0:
                return lags
        return cap
    for lags in range(1, cap + 1):
        try:
            if pp_test_entity(y, lags).p_value < SIGNIFICANCE:
                return lags
        except UnitRootError:
            return lags
    return cap


def fisher_combine(stats: Sequence[EntityUnitRootStat]) -> FisherCombination:
    """
    Combine per-entity p-values into the three Fisher-type statistics.

    P = -2 sum ln p_i against chi2(2N) upper tail; Z = sum Phi^-1(p_i) / sqrt(N)
    against the normal lower tail; L* = sqrt(3 (5N+4) / (pi^2 N (5N+2))) *
    sum ln(p_i / (1 - p_i)) against the t(5N+4) lower tail.
    """
    n = len(stats)
    if n < 2:
        raise UnitRootError(f"Fisher combination needs at least 2 entities, got {n}")
    raw = np.array([s.p_value for s in stats], dtype=float)
    p = np.clip(raw, P_VALUE_FLOOR, P_VALUE_CEILING)
    clamped = bool(np.any(p != raw) or any(s.clamped for s in stats))
    flags = ("clamped_p_values",) if clamped else ()

    chi_statistic = -2.0 * float(np.sum(np.log(p)))
    z_statistic = float(np.sum([quantile_normal(v) for v in p])) / math.sqrt(n)
    scale = math.sqrt(3.0 * (5 * n + 4) / (math.pi ** 2 * n * (5 * n + 2)))
    logit_statistic = scale * float(np.sum(np.log(p / (1.0 - p))))
    null = "all series have a unit root"
    return FisherCombination(
        chi_squared=TestResult.evaluate("Inverse chi-squared (P)", chi_statistic, Distribution.chi_squared(2 * n), null, "upper", flags),
        normal=TestResult.evaluate("Inverse normal (Z)", z_statistic, Distribution.normal(), null, "lower", flags),
        logit=TestResult.evaluate("Inverse logit t (L*)", logit_statistic, Distribution.student_t(5 * n + 4), null, "lower", flags),
        n_entities=n,
        clamped=clamped,
    )


def _longest_run(periods: List[int]) -> Tuple[int, int]:
    best_start, best_length = 0, 0
    start = 0
    for i in range(1, len(periods) + 1):
        if i == len(periods) or periods[i] != periods[i - 1] + 1:
            if i - start > best_length:
                best_start, best_length = start, i - start
            start = i
    return best_start, best_length


def unit_root_report(gp: GrowthPanel, variable: str, policy: LagPolicy) -> UnitRootReport:
    """Run the per-entity tests on p or q and combine them across entities."""
    if variable not in ("p", "q"):
        raise UnitRootError(f"unknown variable {variable!r}, expected 'p' or 'q'")
    stats: List[EntityUnitRootStat] = []
    excluded: List[Tuple[str, str]] = []
    notes: List[str] = []
    for entity in gp.entities:
        rows = gp.entity_rows(entity)
        start, length = _longest_run([row.period for row in rows])
        if length < len(rows):
            notes.append(f"{entity}: period gap, using the longest consecutive run of {length} rows")
        series = [getattr(row, variable) for row in rows[start:start + length]]
        try:
            lags = select_lags(series, policy)
            stats.append(pp_test_entity(series, lags, entity=entity, policy=policy.label))
        except UnitRootError as exc:
            excluded.append((entity, str(exc)))
            logger.info(f"{gp.label or 'panel'} {variable}: entity {entity} excluded ({exc})")

    for entity in gp.excluded_entities:
        excluded.append((entity, "fewer than 2 growth rows"))

    combination = None
    if len(stats) >= 2:
        combination = fisher_combine(stats)
    else:
        notes.append(f"{len(stats)} testable entities; Fisher combination needs at least 2")
    return UnitRootReport(
        variable=variable,
        policy=policy.label,
        stats=tuple(stats),
        combination=combination,
        excluded=tuple(excluded),
        notes=tuple(notes),
        label=gp.label,
    )
