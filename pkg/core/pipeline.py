"""
Verdoorn Toolkit - Pipeline
---------------------------
Shared steps of the fit, unitroot and scatter commands: load the input,
split it by industry, cut the period windows and build growth panels,
then analyse each panel.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

from core.errors import ConfigError, DomainError, PanelDataError, VerdoornError
from core.estimators import estimate_ols, run_estimator
from core.panel_data import (
    GrowthPanel,
    PanelDataset,
    derive_productivity,
    load_industry_panels,
    restrict_periods,
    to_growth_panel,
)
from core.report_renderer import FitBlock, SkippedRun, UnitRootBlock, Window
from core.run_config import RunConfig
from core.spec_tests import corr_effects_regressors, test_fe_vs_ols, test_hausman, test_re_vs_ols
from core.unit_root import unit_root_report

logger = logging.getLogger("verdoorn.pipeline")

T = TypeVar("T")


@dataclass(frozen=True)
class PreparedPanel:
    industry: str
    window: Window
    levels: PanelDataset
    growth: GrowthPanel


def _industry_order(config: RunConfig, found: Sequence[str]) -> Tuple[List[str], List[str]]:
    if not config.industries:
        return list(found), []
    present = [i for i in config.industries if i in found]
    missing = [i for i in config.industries if i not in found]
    return present, missing


def prepare_panels(config: RunConfig) -> Tuple[List[PreparedPanel], List[SkippedRun]]:
    """
    Build one growth panel per selected industry and period window.

    Industries follow the filter order when a filter is given, file order
    otherwise. Empty selections are returned as SkippedRun entries.

    Raises:
        ConfigError: If no input path is configured.
        PanelDataError: If the input is missing or malformed.
    """
    if config.input_path is None:
        raise ConfigError("no input file configured; pass --input or set run.input")
    if not config.input_path.is_file():
        raise PanelDataError(f"input file {config.input_path} not found")

    panels = load_industry_panels(config.input_path, config.schema)
    industries, missing = _industry_order(config, list(panels))
    windows: List[Window] = list(config.period_windows) or [None]

    prepared: List[PreparedPanel] = []
    skipped = [SkippedRun(industry, window, "industry not present in the input") for industry in missing for window in windows]
    for industry in industries:
        dataset = derive_productivity(panels[industry])
        for window in windows:
            levels = restrict_periods(dataset, *window) if window else dataset
            growth = to_growth_panel(levels, config.growth_method)
            if growth.usable_observations == 0:
                reason = "no usable growth observations after filtering"
                skipped.append(SkippedRun(industry, window, reason))
                logger.warning(f"Skipping {industry or 'panel'} ({window}): {reason}")
                continue
            prepared.append(PreparedPanel(industry, window, levels, growth))
    logger.info(f"Prepared {len(prepared)} panels, skipped {len(skipped)}")
    return prepared, skipped


def map_ordered(func: Callable[[PreparedPanel], T], items: Sequence[PreparedPanel], workers: int = 1) -> List[T]:
    """Apply ``func`` to every panel, concurrently when workers > 1, keeping input order."""
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def analyse_fit(panel: PreparedPanel, config: RunConfig) -> FitBlock:
    """Run the selected estimators and the specification tests for one panel."""
    gp = panel.growth
    results = {}
    failures: Dict[str, str] = {}
    for method in config.estimators:
        try:
            results[method] = run_estimator(method, gp, config.dpd_max_instrument_lags, config.lagged_dependent)
        except VerdoornError as exc:
            failures[method] = str(exc)
            logger.warning(f"{panel.industry or 'panel'} {method} failed: {exc}")

    notes: List[str] = []
    fe, re = results.get("FE"), results.get("RE")
    ols = results.get("OLS")
    if ols is None and (fe is not None or re is not None):
        try:
            ols = estimate_ols(gp)
        except VerdoornError as exc:
            notes.append(f"pooled OLS for the specification tests failed: {exc}")

    fe_vs_ols = re_vs_ols = hausman = None
    corr: Optional[float] = None
    if fe is not None and ols is not None:
        fe_vs_ols = test_fe_vs_ols(fe, ols)
        corr = corr_effects_regressors(fe, gp)
    if re is not None and ols is not None:
        try:
            re_vs_ols = test_re_vs_ols(gp, ols)
        except DomainError as exc:
            notes.append(f"F(Re_OLS) not computed: {exc}")
    if fe is not None and re is not None:
        hausman = test_hausman(fe, re)
    notes.extend(gp.diagnostics)

    return FitBlock(
        industry=panel.industry,
        window=panel.window,
        results=results,
        failures=failures,
        fe_vs_ols=fe_vs_ols,
        corr_effects=corr,
        re_vs_ols=re_vs_ols,
        hausman=hausman,
        notes=tuple(notes),
    )


def analyse_unit_roots(panel: PreparedPanel, config: RunConfig) -> UnitRootBlock:
    """Fisher-type tests on both growth series of one panel."""
    reports = {variable: unit_root_report(panel.growth, variable, config.lag_policy) for variable in ("p", "q")}
    return UnitRootBlock(industry=panel.industry, window=panel.window, reports=reports)
