"""
Verdoorn Toolkit - Panel Data
-----------------------------
Panel dataset model, CSV ingestion, growth-rate construction and the
plot-ready exports that stand in for the level and growth annex figures.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd

from core.errors import DuplicateKeyError, PanelDataError, SchemaError

logger = logging.getLogger("verdoorn.panel_data")

Key = Tuple[str, int]
Source = Union[str, Path, Any]

GROWTH_METHODS = ("log", "simple")


@dataclass(frozen=True)
class PanelSchema:
    """Column-name mapping for a panel CSV.

    Attributes:
        entity: Column holding entity identifiers (regions).
        period: Column holding integer periods (years).
        variables: Variable name -> column name, e.g. {"output": "gva"}.
        industry: Optional column used to split a file into industries.
    """

    entity: str = "region"
    period: str = "year"
    variables: Mapping[str, str] = field(default_factory=lambda: {"output": "output", "productivity": "productivity"})
    industry: Optional[str] = None

    @classmethod
    def from_mapping(cls, mapping: Optional[Dict[str, Any]]) -> "PanelSchema":
        mapping = dict(mapping or {})
        variables = mapping.get("variables") or {"output": "output", "productivity": "productivity"}
        return cls(
            entity=mapping.get("entity", "region"),
            period=mapping.get("period", "year"),
            variables={name: column for name, column in variables.items() if column},
            industry=mapping.get("industry") or None,
        )

    def columns(self) -> List[str]:
        cols = [self.entity, self.period, *self.variables.values()]
        if self.industry:
            cols.append(self.industry)
        return cols


@dataclass(frozen=True)
class PanelDataset:
    """Entity x period observations of named variables, possibly unbalanced.

    A variable value of None means the cell is missing. Keys listed in
    ``invalid`` are indexed but unusable.
    """

    entities: Tuple[str, ...]
    periods: Tuple[int, ...]
    observations: Mapping[Key, Mapping[str, Optional[float]]]
    variables: Tuple[str, ...]
    invalid: FrozenSet[Key] = frozenset()
    diagnostics: Tuple[str, ...] = ()
    label: str = ""

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.periods, self.periods[1:])):
            raise PanelDataError("declared periods must be strictly increasing")
        entity_set, period_set = set(self.entities), set(self.periods)
        if len(entity_set) != len(self.entities):
            raise PanelDataError("entity list contains repeats")
        for entity, period in self.observations:
            if entity not in entity_set or period not in period_set:
                raise PanelDataError(f"observation ({entity}, {period}) is outside the declared index")

    @property
    def n_slots(self) -> int:
        return len(self.observations)

    def value(self, entity: str, period: int, variable: str) -> Optional[float]:
        key = (entity, period)
        if key in self.invalid:
            return None
        record = self.observations.get(key)
        if record is None:
            return None
        return record.get(variable)

    def is_complete(self, entity: str, period: int, variables: Optional[Iterable[str]] = None) -> bool:
        names = tuple(variables) if variables is not None else self.variables
        return all(self.value(entity, period, name) is not None for name in names)

    @property
    def complete_observations(self) -> int:
        return sum(1 for entity, period in self.observations if self.is_complete(entity, period))


class GrowthRow(NamedTuple):
    entity: str
    period: int
    p: float
    q: float


@dataclass(frozen=True)
class GrowthPanel:
    """(p, q) growth-rate pairs per entity-period, ordered by entity then period."""

    rows: Tuple[GrowthRow, ...]
    entities: Tuple[str, ...]
    excluded_entities: Tuple[str, ...] = ()
    diagnostics: Tuple[str, ...] = ()
    label: str = ""

    @classmethod
    def from_arrays(cls, entities, periods, p, q, label: str = "") -> "GrowthPanel":
        """Build a panel from parallel arrays (entity labels may repeat in any order)."""
        entity_list = [str(e) for e in entities]
        order: Dict[str, int] = {}
        for entity in entity_list:
            order.setdefault(entity, len(order))
        rows = sorted(
            (GrowthRow(e, int(t), float(pv), float(qv)) for e, t, pv, qv in zip(entity_list, periods, p, q)),
            key=lambda row: (order[row.entity], row.period),
        )
        return cls(rows=tuple(rows), entities=tuple(order), label=label)

    @property
    def entity_count(self) -> int:
        return len(self.entities)

    @property
    def usable_observations(self) -> int:
        return len(self.rows)

    @cached_property
    def p(self) -> np.ndarray:
        return np.array([row.p for row in self.rows], dtype=float)

    @cached_property
    def q(self) -> np.ndarray:
        return np.array([row.q for row in self.rows], dtype=float)

    @cached_property
    def period_array(self) -> np.ndarray:
        return np.array([row.period for row in self.rows], dtype=int)

    @cached_property
    def codes(self) -> np.ndarray:
        """Integer entity index of each row, positions in ``entities``."""
        index = {entity: i for i, entity in enumerate(self.entities)}
        return np.array([index[row.entity] for row in self.rows], dtype=int)

    @cached_property
    def entity_sizes(self) -> np.ndarray:
        return np.bincount(self.codes, minlength=self.entity_count)

    def entity_rows(self, entity: str) -> List[GrowthRow]:
        return [row for row in self.rows if row.entity == entity]

    def variable(self, name: str) -> np.ndarray:
        if name not in ("p", "q"):
            raise PanelDataError(f"unknown growth variable {name!r}, expected 'p' or 'q'")
        return self.p if name == "p" else self.q

    def replace_values(self, p=None, q=None) -> "GrowthPanel":
        """Copy of the panel with p and/or q replaced row by row."""
        p = self.p if p is None else np.asarray(p, dtype=float)
        q = self.q if q is None else np.asarray(q, dtype=float)
        rows = tuple(row._replace(p=float(pv), q=float(qv)) for row, pv, qv in zip(self.rows, p, q))
        return GrowthPanel(rows, self.entities, self.excluded_entities, self.diagnostics, self.label)


def _parse_number(cell: Any) -> Optional[float]:
    text = str(cell).strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _parse_period(cell: Any) -> int:
    text = str(cell).strip()
    try:
        return int(text)
    except ValueError:
        try:
            value = float(text)
        except ValueError:
            raise PanelDataError(f"period value {text!r} is not an integer") from None
        if not value.is_integer():
            raise PanelDataError(f"period value {text!r} is not an integer")
        return int(value)


def read_panel_frame(source: Source, schema: PanelSchema) -> pd.DataFrame:
    """Read a UTF-8 panel CSV as strings and check the schema against its header."""
    frame = pd.read_csv(source, dtype=str, keep_default_na=False, encoding="utf-8")
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [col for col in schema.columns() if col not in frame.columns]
    if missing:
        raise SchemaError(f"schema column(s) not found in input: {', '.join(missing)}")
    return frame


def _frame_to_dataset(frame: pd.DataFrame, schema: PanelSchema, label: str = "") -> PanelDataset:
    entities: Dict[str, None] = {}
    periods = set()
    observations: Dict[Key, Dict[str, Optional[float]]] = {}
    duplicates: List[Key] = []

    for record in frame.to_dict("records"):
        entity = str(record[schema.entity]).strip()
        if not entity:
            raise PanelDataError("empty entity identifier")
        period = _parse_period(record[schema.period])
        key = (entity, period)
        if key in observations:
            if key not in duplicates:
                duplicates.append(key)
            continue
        entities.setdefault(entity, None)
        periods.add(period)
        observations[key] = {name: _parse_number(record[col]) for name, col in schema.variables.items()}

    if duplicates:
        raise DuplicateKeyError(duplicates)

    dataset = PanelDataset(
        entities=tuple(entities),
        periods=tuple(sorted(periods)),
        observations=observations,
        variables=tuple(schema.variables),
        label=label,
    )
    logger.info(
        f"Loaded panel {label or '(unlabelled)'}: {len(dataset.entities)} entities, "
        f"{dataset.n_slots} slots, {dataset.complete_observations} complete"
    )
    return dataset


def load_panel_csv(source: Source, schema: PanelSchema, industry: Optional[str] = None) -> PanelDataset:
    """
    Load a panel CSV into a PanelDataset.

    Empty or non-numeric variable cells are kept as missing values in an
    indexed slot. With ``industry`` given, rows are first filtered on the
    schema's industry column.

    Raises:
        SchemaError: If the schema names a column not in the header.
        DuplicateKeyError: If an (entity, period) pair repeats.
    """
    frame = read_panel_frame(source, schema)
    if industry is not None:
        if not schema.industry:
            raise SchemaError("an industry filter needs an industry column in the schema")
        frame = frame[frame[schema.industry].str.strip() == industry]
    return _frame_to_dataset(frame, schema, label=industry or "")


def load_industry_panels(source: Source, schema: PanelSchema) -> Dict[str, PanelDataset]:
    """Split a multi-industry CSV into one dataset per industry, in file order."""
    frame = read_panel_frame(source, schema)
    if not schema.industry:
        return {"": _frame_to_dataset(frame, schema)}
    labels = frame[schema.industry].str.strip()
    panels: Dict[str, PanelDataset] = {}
    for industry in dict.fromkeys(labels):
        panels[industry] = _frame_to_dataset(frame[labels == industry], schema, label=industry)
    return panels


def derive_productivity(ds: PanelDataset) -> PanelDataset:
    """Fill productivity = output / employment where productivity is absent."""
    observations: Dict[Key, Dict[str, Optional[float]]] = {}
    invalid = set(ds.invalid)
    diagnostics = list(ds.diagnostics)
    derived = 0

    for key, record in ds.observations.items():
        new_record = dict(record)
        new_record.setdefault("productivity", None)
        if new_record["productivity"] is None:
            output, employment = record.get("output"), record.get("employment")
            if output is not None and employment is not None:
                if employment <= 0:
                    invalid.add(key)
                    message = f"employment {employment} <= 0 at {key}; observation marked missing"
                    diagnostics.append(message)
                    logger.warning(message)
                else:
                    new_record["productivity"] = output / employment
                    derived += 1
        observations[key] = new_record

    variables = ds.variables if "productivity" in ds.variables else ds.variables + ("productivity",)
    logger.debug(f"Derived productivity for {derived} observations of {ds.label or 'panel'}")
    return PanelDataset(
        entities=ds.entities,
        periods=ds.periods,
        observations=observations,
        variables=variables,
        invalid=frozenset(invalid),
        diagnostics=tuple(diagnostics),
        label=ds.label,
    )


def restrict_periods(ds: PanelDataset, start: int, end: int) -> PanelDataset:
    """Keep only periods in the inclusive window [start, end]."""
    if start > end:
        raise PanelDataError(f"empty period window {start}-{end}")
    observations = {k: v for k, v in ds.observations.items() if start <= k[1] <= end}
    present = {entity for entity, _ in observations}
    return PanelDataset(
        entities=tuple(e for e in ds.entities if e in present),
        periods=tuple(t for t in ds.periods if start <= t <= end),
        observations=observations,
        variables=ds.variables,
        invalid=frozenset(k for k in ds.invalid if k in observations),
        diagnostics=ds.diagnostics,
        label=ds.label,
    )


def _growth(previous: float, current: float, method: str) -> float:
    if method == "log":
        return math.log(current) - math.log(previous)
    return (current - previous) / previous


def _assemble(rows_by_entity: Dict[str, List[GrowthRow]], diagnostics: List[str], label: str) -> GrowthPanel:
    rows: List[GrowthRow] = []
    kept: List[str] = []
    excluded: List[str] = []
    for entity, entity_rows in rows_by_entity.items():
        if len(entity_rows) < 2:
            excluded.append(entity)
            diagnostics.append(f"entity {entity} excluded: {len(entity_rows)} usable growth row(s), need 2")
            continue
        kept.append(entity)
        rows.extend(entity_rows)
    if excluded:
        logger.info(f"Excluded entities from {label or 'panel'}: {', '.join(excluded)}")
    return GrowthPanel(tuple(rows), tuple(kept), tuple(excluded), tuple(diagnostics), label)


def to_growth_panel(ds: PanelDataset, method: str = "log") -> GrowthPanel:
    """
    Turn levels into productivity (p) and output (q) growth rates.

    A row exists for period t only when t - 1 is also observed and both
    observations are complete; gaps in the period sequence never produce
    multi-year differences.

    Args:
        ds: Dataset holding ``productivity`` and ``output``.
        method: "log" for log-differences, "simple" for (x_t - x_{t-1}) / x_{t-1}.
    """
    if method not in GROWTH_METHODS:
        raise PanelDataError(f"unknown growth method {method!r}, expected one of {GROWTH_METHODS}")
    if "productivity" not in ds.variables or "output" not in ds.variables:
        raise PanelDataError("growth panel needs 'productivity' and 'output'; run derive_productivity first")

    names = ("productivity", "output")
    rows_by_entity: Dict[str, List[GrowthRow]] = {}
    diagnostics = list(ds.diagnostics)
    for entity in ds.entities:
        entity_rows = rows_by_entity.setdefault(entity, [])
        for period in ds.periods:
            if not (ds.is_complete(entity, period, names) and ds.is_complete(entity, period - 1, names)):
                continue
            prod_now, out_now = (ds.value(entity, period, n) for n in names)
            prod_before, out_before = (ds.value(entity, period - 1, n) for n in names)
            if min(prod_now, out_now, prod_before, out_before) <= 0:
                diagnostics.append(f"non-positive level for {entity} in {period - 1}-{period}; row excluded")
                continue
            entity_rows.append(GrowthRow(
                entity,
                period,
                _growth(prod_before, prod_now, method),
                _growth(out_before, out_now, method),
            ))
    return _assemble(rows_by_entity, diagnostics, ds.label)


def growth_panel_from_columns(ds: PanelDataset, p: str = "p", q: str = "q") -> GrowthPanel:
    """Read an already-differenced two-variable panel, such as an emitted scatter CSV."""
    rows_by_entity: Dict[str, List[GrowthRow]] = {}
    for entity in ds.entities:
        entity_rows = rows_by_entity.setdefault(entity, [])
        for period in ds.periods:
            pv, qv = ds.value(entity, period, p), ds.value(entity, period, q)
            if pv is not None and qv is not None:
                entity_rows.append(GrowthRow(entity, period, pv, qv))
    return _assemble(rows_by_entity, list(ds.diagnostics), ds.label)


def emit_scatter_csv(gp: GrowthPanel, out) -> None:
    """Write entity, period, q, p with one line per growth row, entity order then period."""
    order = {entity: i for i, entity in enumerate(gp.entities)}
    rows = sorted(gp.rows, key=lambda row: (order.get(row.entity, len(order)), row.period))
    frame = pd.DataFrame(
        [(row.entity, row.period, row.q, row.p) for row in rows],
        columns=["entity", "period", "q", "p"],
    )
    frame.to_csv(out, index=False, lineterminator="\n")


def emit_levels_csv(ds: PanelDataset, out) -> None:
    """Write the level data (entity, period, variables...) with blanks for missing cells."""
    records = []
    for entity in ds.entities:
        for period in ds.periods:
            if (entity, period) in ds.observations:
                records.append([entity, period, *(ds.value(entity, period, v) for v in ds.variables)])
    frame = pd.DataFrame(records, columns=["entity", "period", *ds.variables])
    frame.to_csv(out, index=False, lineterminator="\n")
