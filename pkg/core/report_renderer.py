"""
Verdoorn Toolkit - Report Renderer
----------------------------------
Turns estimation and unit-root results into the fixed-width text tables,
and their CSV and JSON-lines mirrors.
"""

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from core.estimators import returns_to_scale
from core.results import Coefficient, EstimateResult, TestResult
from core.unit_root import UnitRootReport

EMPTY_CELL = "-----"
FIT_ROW_ORDER = ("FE", "RE", "OLS", "DPD")

Window = Optional[Tuple[int, int]]


def format_number(value: Optional[float], decimals: int = 3) -> str:
    """Fixed-decimal rendering; None gives '-----' and negative zero prints unsigned."""
    if value is None:
        return EMPTY_CELL
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = f"{value:.{decimals}f}"
    if text.startswith("-") and float(text) == 0:
        text = text[1:]
    return text


def format_statistic(test: Optional[TestResult]) -> str:
    """'16.107*' when significant at 5%, '9.704' otherwise."""
    if test is None:
        return EMPTY_CELL
    return format_number(test.statistic) + ("*" if test.significant_5pct else "")


def format_coefficient(coefficient: Optional[Coefficient]) -> str:
    """'0.675* (8.910)': estimate, star at 5%, t-statistic in parentheses."""
    if coefficient is None:
        return EMPTY_CELL
    star = "*" if coefficient.significant_5pct else ""
    return f"{format_number(coefficient.estimate)}{star} ({format_number(coefficient.t_statistic)})"


def rounded(value: Optional[float], decimals: int = 3) -> Optional[float]:
    """The number exactly as the text table shows it."""
    if value is None or not math.isfinite(value):
        return value
    return float(format_number(value, decimals))


def window_label(window: Window) -> str:
    return f"{window[0]}-{window[1]}" if window else "all periods"


def slug(text: str) -> str:
    """Lowercase with runs of non-alphanumerics collapsed to '_'."""
    return re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_") or "panel"


def json_safe(record: Mapping[str, Any]) -> Dict[str, Any]:
    """Non-finite numbers become None; JSON has no inf or NaN."""
    return {
        key: None if isinstance(value, float) and not math.isfinite(value) else value
        for key, value in record.items()
    }


def _write_unix_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


@dataclass(frozen=True)
class FitBlock:
    """Everything printed for one industry and period window."""

    industry: str
    window: Window
    results: Mapping[str, EstimateResult]
    failures: Mapping[str, str] = field(default_factory=dict)
    fe_vs_ols: Optional[TestResult] = None
    corr_effects: Optional[float] = None
    re_vs_ols: Optional[TestResult] = None
    hausman: Optional[TestResult] = None
    notes: Tuple[str, ...] = ()


@dataclass(frozen=True)
class UnitRootBlock:
    industry: str
    window: Window
    reports: Mapping[str, UnitRootReport]
    notes: Tuple[str, ...] = ()


@dataclass(frozen=True)
class SkippedRun:
    industry: str
    window: Window
    reason: str


class ReportRenderer:
    """
    Renders FitBlock and UnitRootBlock objects.

    Column headers, row labels and footnotes come from ``_load_templates``;
    column widths are derived from the cell contents of each block so the
    same inputs always give the same bytes.
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.logger = logging.getLogger("verdoorn.report_renderer")
        self.config = config or {}
        self.templates = self._load_templates()
        self.column_gap = int(self.config.get("column_gap", 2))

    def _load_templates(self) -> Dict[str, Any]:
        return {
            "fit_columns": [
                ("const", "Const.¹"),
                ("coef", "Coef.²"),
                ("model", "F/Wald(mod.)³"),
                ("fe_ols", "F(Fe_OLS)⁴"),
                ("corr", "Corr(u_i)⁵"),
                ("re_ols", "F(Re_OLS)⁶"),
                ("hausman", "Hausman⁷"),
                ("r2", "R²⁸"),
                ("n_obs", "N.O.⁹"),
                ("n_inst", "N.I.¹⁰"),
            ],
            "fit_rows": {
                "FE": "FE¹¹",
                "RE": "RE¹²",
                "OLS": "OLS",
                "DPD": "DPD¹³",
            },
            "fit_notes": [
                "1 Constant (drift of the differenced equation for DPD); t-statistic in parentheses.",
                "2 Verdoorn coefficient b of p = a + b q; t-statistic in parentheses.",
                "3 F test of the model for OLS and FE, Wald chi2(1) test for RE and DPD.",
                "4 F test of the fixed effects against pooled OLS.",
                "5 Correlation between the fixed effects and b * mean(q).",
                "6 Breusch-Pagan LM test of the random effects against pooled OLS, chi2(1).",
                "7 Hausman test of FE against RE on the slope, chi2(1).",
                "8 Within R² for FE and RE, overall R² for OLS.",
                "9 Number of observations used.",
                "10 Number of GMM instruments.",
                "11 Fixed effects (within) estimator.",
                "12 Random effects estimator (Swamy-Arora FGLS).",
                "13 Arellano-Bond one-step difference GMM with robust standard errors.",
                "* Statistically significant at 5%.",
            ],
            "unitroot_rows": [
                ("chi_squared", "Inverse¹"),
                ("normal", "Inverse²"),
                ("logit", "Inverse³"),
            ],
            "unitroot_superscripts": {"a": "ᵃ", "b": "ᵇ"},
            "unitroot_notes": [
                "Fisher-type unit root tests combining per-region Phillips-Perron tests.",
                "1 Inverse chi-squared (P).",
                "2 Inverse normal (Z).",
                "3 Inverse logit t (L*).",
                "a Newey-West bandwidth of one lag for every region.",
                "b More than one lag needed for at least one region.",
                "* Statistically significant at 5%.",
            ],
        }

    # Fit tables

    def _fit_cells(self, block: FitBlock, method: str) -> Dict[str, str]:
        cells = {key: EMPTY_CELL for key, _ in self.templates["fit_columns"]}
        result = block.results.get(method)
        if result is None:
            return cells
        cells["const"] = format_coefficient(result.intercept)
        cells["coef"] = format_coefficient(result.slope)
        cells["model"] = format_statistic(result.model_test)
        cells["r2"] = format_number(result.headline_r_squared)
        cells["n_obs"] = str(result.n_observations)
        if method == "FE":
            cells["fe_ols"] = format_statistic(block.fe_vs_ols)
            cells["corr"] = format_number(block.corr_effects)
        elif method == "RE":
            cells["re_ols"] = format_statistic(block.re_vs_ols)
            cells["hausman"] = format_statistic(block.hausman)
        elif method == "DPD" and result.n_instruments is not None:
            cells["n_inst"] = str(result.n_instruments)
        return cells

    def _table(self, header: List[str], rows: List[List[str]]) -> List[str]:
        widths = [max(len(row[i]) for row in [header, *rows]) for i in range(len(header))]
        gap = " " * self.column_gap
        lines = []
        for row in [header, *rows]:
            first = row[0].ljust(widths[0])
            rest = [cell.rjust(width) for cell, width in zip(row[1:], widths[1:])]
            lines.append(gap.join([first, *rest]).rstrip())
        return lines

    def _methods(self, block: FitBlock) -> List[str]:
        present = set(block.results) | set(block.failures)
        return [m for m in FIT_ROW_ORDER if m in present]

    def render_fit_block(self, block: FitBlock) -> str:
        """One industry/window table followed by its p-value line and notes."""
        columns = self.templates["fit_columns"]
        header = [""] + [title for _, title in columns]
        rows = []
        for method in self._methods(block):
            cells = self._fit_cells(block, method)
            rows.append([self.templates["fit_rows"][method]] + [cells[key] for key, _ in columns])

        lines = [f"{block.industry or 'All entities'} ({window_label(block.window)})"]
        lines.extend(self._table(header, rows))
        lines.append(self._p_value_line(block))
        scale_line = self._returns_to_scale_line(block)
        if scale_line:
            lines.append(scale_line)
        for method, reason in block.failures.items():
            lines.append(f"  {method} not estimated: {reason}")
        for result in block.results.values():
            for note in result.notes:
                lines.append(f"  {result.method}: {note}")
            for flag in result.flags:
                lines.append(f"  {result.method}: flag {flag}")
        for test in (block.hausman,):
            if test is not None and test.flags:
                lines.append(f"  {test.name}: flag {', '.join(test.flags)}")
        for note in block.notes:
            lines.append(f"  {note}")
        return "\n".join(lines)

    def _p_value_line(self, block: FitBlock) -> str:
        parts = []
        for method in self._methods(block):
            result = block.results.get(method)
            if result is not None:
                parts.append(f"{method} {result.model_test.name}={format_number(result.model_test.p_value)}")
        for test in (block.fe_vs_ols, block.re_vs_ols, block.hausman):
            if test is not None:
                parts.append(f"{test.name}={format_number(test.p_value)}")
        return "  p-values: " + ("; ".join(parts) if parts else EMPTY_CELL)

    def _returns_to_scale_line(self, block: FitBlock) -> Optional[str]:
        parts = []
        for method in self._methods(block):
            result = block.results.get(method)
            if result is None:
                continue
            reading = returns_to_scale(result)
            degree = f", degree {format_number(reading.implied_degree)}" if reading.implied_degree is not None else ""
            parts.append(f"{method} {reading.classification}{degree}")
        return "  returns to scale: " + "; ".join(parts) if parts else None

    def render_fit_report(self, blocks: Sequence[FitBlock], skipped: Sequence[SkippedRun] = ()) -> str:
        sections = [self.render_fit_block(block) for block in blocks]
        sections.append("\n".join(self.templates["fit_notes"]))
        if skipped:
            sections.append(self.render_skips(skipped))
        return "\n\n".join(sections) + "\n"

    def render_skips(self, skipped: Sequence[SkippedRun]) -> str:
        lines = ["Skipped:"]
        for skip in skipped:
            lines.append(f"  {skip.industry or 'All entities'} ({window_label(skip.window)}): {skip.reason}")
        return "\n".join(lines)

    def fit_records(self, blocks: Sequence[FitBlock]) -> List[Dict[str, Any]]:
        """One record per printed row, with numbers rounded as printed."""
        records = []
        for block in blocks:
            for method in self._methods(block):
                result = block.results.get(method)
                record: Dict[str, Any] = {
                    "industry": block.industry,
                    "window": window_label(block.window),
                    "method": method,
                    "status": "ok" if result is not None else "failed",
                    "error": block.failures.get(method),
                }
                record.update(self._fit_numbers(block, method, result))
                records.append(record)
        return records

    def _fit_numbers(self, block: FitBlock, method: str, result: Optional[EstimateResult]) -> Dict[str, Any]:
        numbers: Dict[str, Any] = dict.fromkeys(
            ["const", "const_t", "const_sig", "coef", "coef_t", "coef_sig", "model_stat", "model_p",
             "model_sig", "fe_ols", "fe_ols_p", "fe_ols_sig", "corr", "re_ols", "re_ols_p", "re_ols_sig",
             "hausman", "hausman_p", "hausman_sig", "r2", "n_obs", "n_instruments", "returns_to_scale",
             "scale_degree"]
        )
        if result is None:
            return numbers
        numbers.update(
            const=rounded(result.intercept.estimate),
            const_t=rounded(result.intercept.t_statistic),
            const_sig=result.intercept.significant_5pct,
            coef=rounded(result.slope.estimate),
            coef_t=rounded(result.slope.t_statistic),
            coef_sig=result.slope.significant_5pct,
            model_stat=rounded(result.model_test.statistic),
            model_p=rounded(result.model_test.p_value),
            model_sig=result.model_test.significant_5pct,
            r2=rounded(result.headline_r_squared),
            n_obs=result.n_observations,
        )
        reading = returns_to_scale(result)
        numbers["returns_to_scale"] = reading.classification
        numbers["scale_degree"] = rounded(reading.implied_degree)
        tests: Dict[str, Optional[TestResult]] = {}
        if method == "FE":
            tests["fe_ols"] = block.fe_vs_ols
            numbers["corr"] = rounded(block.corr_effects)
        elif method == "RE":
            tests["re_ols"] = block.re_vs_ols
            tests["hausman"] = block.hausman
        elif method == "DPD":
            numbers["n_instruments"] = result.n_instruments
        for key, test in tests.items():
            if test is not None:
                numbers[key] = rounded(test.statistic)
                numbers[f"{key}_p"] = rounded(test.p_value)
                numbers[f"{key}_sig"] = test.significant_5pct
        return numbers

    # Unit-root tables

    def render_unitroot_block(self, block: UnitRootBlock) -> str:
        title = f"{block.industry or 'All entities'} ({window_label(block.window)})"
        variables = [v for v in ("p", "q") if v in block.reports]
        if all(block.reports[v].combination is None for v in variables):
            lines = [title, "  no testable entities; Fisher combination not computed"]
            for variable in variables:
                lines.extend(self._exclusion_lines(block.reports[variable]))
            return "\n".join(lines)

        marks = self.templates["unitroot_superscripts"]
        header = [""] + [f"{v}{marks[block.reports[v].superscript]}" for v in variables]
        rows = []
        for attribute, label in self.templates["unitroot_rows"]:
            row = [label]
            for variable in variables:
                combination = block.reports[variable].combination
                row.append(format_statistic(getattr(combination, attribute)) if combination else EMPTY_CELL)
            rows.append(row)

        lines = [title]
        lines.extend(self._table(header, rows))
        for variable in variables:
            report = block.reports[variable]
            lines.append(f"  {variable}: lag policy {report.policy}, {len(report.stats)} regions tested")
            lines.extend(self._exclusion_lines(report))
            if report.combination is not None and report.combination.clamped:
                lines.append(f"  {variable}: p-values clamped to [1e-6, 1 - 1e-6]")
        for note in block.notes:
            lines.append(f"  {note}")
        return "\n".join(lines)

    def _exclusion_lines(self, report: UnitRootReport) -> List[str]:
        lines = [f"  {report.variable}: {entity} excluded ({reason})" for entity, reason in report.excluded]
        lines.extend(f"  {report.variable}: {note}" for note in report.notes)
        return lines

    def render_unitroot_report(self, blocks: Sequence[UnitRootBlock], skipped: Sequence[SkippedRun] = ()) -> str:
        sections = [self.render_unitroot_block(block) for block in blocks]
        sections.append("\n".join(self.templates["unitroot_notes"]))
        if skipped:
            sections.append(self.render_skips(skipped))
        return "\n\n".join(sections) + "\n"

    def unitroot_records(self, blocks: Sequence[UnitRootBlock]) -> List[Dict[str, Any]]:
        records = []
        for block in blocks:
            for variable, report in block.reports.items():
                record: Dict[str, Any] = {
                    "industry": block.industry,
                    "window": window_label(block.window),
                    "variable": variable,
                    "policy": report.policy,
                    "superscript": report.superscript,
                    "n_entities": len(report.stats),
                    "excluded": len(report.excluded),
                }
                for attribute, _ in self.templates["unitroot_rows"]:
                    test = getattr(report.combination, attribute) if report.combination else None
                    record[attribute] = rounded(test.statistic) if test else None
                    record[f"{attribute}_p"] = rounded(test.p_value) if test else None
                    record[f"{attribute}_sig"] = test.significant_5pct if test else None
                records.append(record)
        return records

    # Files

    def write_outputs(
        self,
        stem: str,
        text: str,
        records: Sequence[Dict[str, Any]],
        out_dir: Path,
        formats: Sequence[str],
    ) -> List[Path]:
        """Write <stem>.txt/.csv/.jsonl for the requested formats."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        if "text" in formats:
            path = out_dir / f"{stem}.txt"
            _write_unix_text(path, text)
            written.append(path)
        if "csv" in formats:
            path = out_dir / f"{stem}.csv"
            pd.DataFrame(list(records)).to_csv(path, index=False, lineterminator="\n")
            written.append(path)
        if "jsonl" in formats:
            path = out_dir / f"{stem}.jsonl"
            lines = [json.dumps(json_safe(record), ensure_ascii=False, allow_nan=False) for record in records]
            _write_unix_text(path, "".join(line + "\n" for line in lines))
            written.append(path)
        for path in written:
            self.logger.info(f"Wrote {path}")
        return written
