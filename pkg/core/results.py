"""
Verdoorn Toolkit - Result Containers
------------------------------------
Value objects shared by the estimators, the specification tests and the
report renderer: coefficients, test results and estimate results.
"""

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple

from core import numerics
from core.errors import EstimationError

SIGNIFICANCE = 0.05

TAILS = ("upper", "lower", "two-sided")


@dataclass(frozen=True)
class Distribution:
    """Reference distribution of a statistic: F, chi2, normal or t."""

    family: str
    df1: Optional[float] = None
    df2: Optional[float] = None

    @classmethod
    def f(cls, df1: float, df2: float) -> "Distribution":
        return cls("F", df1, df2)

    @classmethod
    def chi_squared(cls, df: float) -> "Distribution":
        return cls("chi2", df)

    @classmethod
    def normal(cls) -> "Distribution":
        return cls("normal")

    @classmethod
    def student_t(cls, df: float) -> "Distribution":
        return cls("t", df)

    @property
    def label(self) -> str:
        if self.family == "F":
            return f"F({_df(self.df1)},{_df(self.df2)})"
        if self.family == "chi2":
            return f"chi2({_df(self.df1)})"
        if self.family == "t":
            return f"t({_df(self.df1)})"
        return "N(0,1)"

    def cdf(self, x: float) -> float:
        if self.family == "F":
            return numerics.cdf_f(x, self.df1, self.df2)
        if self.family == "chi2":
            return numerics.cdf_chi_squared(x, self.df1)
        if self.family == "t":
            return numerics.cdf_student_t(x, self.df1)
        return numerics.cdf_normal(x)

    def sf(self, x: float) -> float:
        if self.family == "F":
            return numerics.sf_f(x, self.df1, self.df2)
        if self.family == "chi2":
            return numerics.sf_chi_squared(x, self.df1)
        if self.family == "t":
            return numerics.sf_student_t(x, self.df1)
        return numerics.sf_normal(x)

    def tail_probability(self, statistic: float, tail: str = "upper") -> float:
        if tail == "upper":
            return self.sf(statistic)
        if tail == "lower":
            return self.cdf(statistic)
        if tail == "two-sided":
            return min(1.0, 2.0 * self.sf(abs(statistic)))
        raise ValueError(f"unknown tail {tail!r}, expected one of {TAILS}")


def _df(value: Optional[float]) -> str:
    if value is None:
        return "?"
    return str(int(value)) if float(value).is_integer() else f"{value:g}"


@dataclass(frozen=True)
class TestResult:
    """A hypothesis test: statistic, reference distribution and p-value."""

    __test__ = False

    name: str
    statistic: float
    distribution: Distribution
    p_value: float
    null_hypothesis: str
    significant_5pct: bool
    tail: str = "upper"
    flags: Tuple[str, ...] = ()

    @classmethod
    def evaluate(
        cls,
        name: str,
        statistic: float,
        distribution: Distribution,
        null_hypothesis: str,
        tail: str = "upper",
        flags: Tuple[str, ...] = (),
    ) -> "TestResult":
        p_value = distribution.tail_probability(statistic, tail)
        return cls(
            name=name,
            statistic=float(statistic),
            distribution=distribution,
            p_value=p_value,
            null_hypothesis=null_hypothesis,
            significant_5pct=p_value < SIGNIFICANCE,
            tail=tail,
            flags=tuple(flags),
        )


@dataclass(frozen=True)
class Coefficient:
    """Point estimate with standard error, t-ratio and two-sided p-value."""

    estimate: float
    std_error: float
    t_statistic: float
    p_value: float
    significant_5pct: bool

    @classmethod
    def from_estimate(cls, estimate: float, std_error: float, df: Optional[float] = None) -> "Coefficient":
        """Build from estimate and s.e.; Student-t(df) when df is given, else normal."""
        t_stat = numerics.t_ratio(float(estimate), float(std_error))
        reference = Distribution.student_t(df) if df is not None else Distribution.normal()
        p_value = reference.tail_probability(t_stat, "two-sided")
        return cls(float(estimate), float(std_error), t_stat, p_value, p_value < SIGNIFICANCE)


@dataclass(frozen=True)
class EstimateResult:
    """
    Output of one estimator row (OLS, FE, RE or DPD).

    ``entity_effects`` is filled for FE only; ``theta``, ``sigma_u2`` and
    ``sigma_e2`` for RE; ``rho`` and ``n_instruments`` for DPD.
    """

    method: str
    intercept: Coefficient
    slope: Coefficient
    model_test: TestResult
    n_observations: int
    n_entities: int
    residual_sum_squares: float
    df_resid: int
    r_squared_within: Optional[float] = None
    r_squared_overall: Optional[float] = None
    n_instruments: Optional[int] = None
    entity_effects: Mapping[str, float] = field(default_factory=dict)
    rho: Optional[Coefficient] = None
    sigma_u2: Optional[float] = None
    sigma_e2: Optional[float] = None
    theta: Mapping[str, float] = field(default_factory=dict)
    notes: Tuple[str, ...] = ()
    flags: Tuple[str, ...] = ()
    label: str = ""

    def __post_init__(self):
        n_params = 2 if self.rho is None else 3
        if self.n_observations <= n_params:
            raise EstimationError(
                f"{self.method}: {self.n_observations} observations for {n_params} parameters"
            )
        for name in ("r_squared_within", "r_squared_overall"):
            value = getattr(self, name)
            if value is not None and not (0.0 <= value <= 1.0 and math.isfinite(value)):
                raise EstimationError(f"{self.method}: {name}={value} outside [0, 1]")

    @property
    def headline_r_squared(self) -> Optional[float]:
        """Within R^2 for FE and RE, overall R^2 for OLS, none for DPD."""
        if self.method in ("FE", "RE"):
            return self.r_squared_within
        if self.method == "OLS":
            return self.r_squared_overall
        return None
