import io
import math

import numpy as np
import pandas as pd
import pytest

from core.errors import DuplicateKeyError, PanelDataError, SchemaError
from core.panel_data import (
    GrowthPanel,
    PanelSchema,
    derive_productivity,
    emit_levels_csv,
    emit_scatter_csv,
    growth_panel_from_columns,
    load_industry_panels,
    load_panel_csv,
    restrict_periods,
    to_growth_panel,
)
from tests.conftest import make_growth_panel

GRID = """region,year,output,productivity
Norte,1990,100,10
Norte,1991,110,11
Norte,1992,121,12
Centro,1990,50,5
Centro,1991,,5.5
Centro,1992,60,6
"""


def load(text, schema=None):
    return load_panel_csv(io.StringIO(text), schema or PanelSchema())


def test_full_grid_and_missing_cell_bookkeeping():
    complete = load(GRID.replace("Centro,1991,,5.5", "Centro,1991,55,5.5"))
    assert complete.n_slots == 6
    assert complete.complete_observations == 6

    gapped = load(GRID)
    assert gapped.n_slots == 6
    assert gapped.complete_observations == 5
    assert gapped.value("Centro", 1991, "output") is None
    assert gapped.entities == ("Norte", "Centro")
    assert gapped.periods == (1990, 1991, 1992)


def test_duplicate_key_is_an_error():
    with pytest.raises(DuplicateKeyError) as info:
        load(GRID + "Norte,1990,1,1\n")
    assert ("Norte", 1990) in info.value.pairs


def test_unknown_schema_column():
    with pytest.raises(SchemaError):
        load(GRID, PanelSchema(variables={"output": "gva", "productivity": "productivity"}))


def test_non_integer_period():
    with pytest.raises(PanelDataError):
        load("region,year,output,productivity\nNorte,1990.5,1,1\n")


def test_derive_productivity():
    text = "region,year,output,employment,productivity\nA,1990,100,4,\nB,1990,100,,30\nC,1990,100,0,\n"
    schema = PanelSchema(variables={"output": "output", "employment": "employment", "productivity": "productivity"})
    ds = derive_productivity(load(text, schema))
    assert ds.value("A", 1990, "productivity") == 25.0
    assert ds.value("B", 1990, "productivity") == 30.0
    assert ("C", 1990) in ds.invalid
    assert ds.value("C", 1990, "output") is None
    assert any("employment" in d for d in ds.diagnostics)


def test_growth_rates():
    text = "region,year,output,productivity\nA,1990,50,100\nA,1991,50,110\nA,1992,50,121\n"
    gp = to_growth_panel(load(text))
    assert [row.p for row in gp.rows] == pytest.approx([math.log(1.1), math.log(1.1)])
    assert [row.q for row in gp.rows] == [0.0, 0.0]
    assert gp.usable_observations == 2

    simple = to_growth_panel(load(text), method="simple")
    assert simple.rows[0].p == pytest.approx(0.1)


def test_missing_cell_and_gap_do_not_bridge_years():
    gp = to_growth_panel(load(GRID))
    # Centro 1991 is incomplete, so neither 1991 nor 1992 has a predecessor.
    assert [(r.entity, r.period) for r in gp.rows] == [("Norte", 1991), ("Norte", 1992)]
    assert gp.excluded_entities == ("Centro",)

    gapped = "region,year,output,productivity\nA,1990,1,1\nA,1992,2,2\nA,1993,3,3\nA,1994,4,4\n"
    rows = to_growth_panel(load(gapped)).rows
    assert [r.period for r in rows] == [1993, 1994]


def test_non_positive_levels_excluded_with_diagnostic():
    text = "region,year,output,productivity\nA,1990,1,1\nA,1991,-1,1\nA,1992,2,2\nA,1993,3,3\nA,1994,4,4\n"
    gp = to_growth_panel(load(text))
    assert [r.period for r in gp.rows] == [1993, 1994]
    assert any("non-positive" in d for d in gp.diagnostics)


def test_full_panel_row_count():
    records = [(f"R{i}", 1986 + t, 100 + i + t, 10 + t) for i in range(7) for t in range(9)]
    buffer = io.StringIO()
    pd.DataFrame(records, columns=["region", "year", "output", "productivity"]).to_csv(buffer, index=False)
    gp = to_growth_panel(load(buffer.getvalue()))
    assert gp.usable_observations == 56
    assert gp.entity_count == 7


def test_row_count_matches_pair_enumeration(rng):
    records, complete = [], set()
    for i in range(6):
        for year in range(1990, 2000):
            if rng.random() < 0.25:
                continue
            blank = rng.random() < 0.1
            records.append((f"R{i}", year, "" if blank else 10 + year - 1990, 5.0))
            if not blank:
                complete.add((f"R{i}", year))
    buffer = io.StringIO()
    pd.DataFrame(records, columns=["region", "year", "output", "productivity"]).to_csv(buffer, index=False)
    gp = to_growth_panel(load(buffer.getvalue()))

    pairs = {}
    for entity, year in complete:
        if (entity, year - 1) in complete:
            pairs[entity] = pairs.get(entity, 0) + 1
    expected = sum(n for n in pairs.values() if n >= 2)
    assert gp.usable_observations == expected


def test_growth_is_invariant_to_entity_scale():
    base = "region,year,output,productivity\nA,1990,50,10\nA,1991,55,12\nA,1992,61,13\n"
    scaled = "region,year,output,productivity\nA,1990,500,30\nA,1991,550,36\nA,1992,610,39\n"
    first, second = to_growth_panel(load(base)), to_growth_panel(load(scaled))
    np.testing.assert_allclose(first.p, second.p, atol=1e-12)
    np.testing.assert_allclose(first.q, second.q, atol=1e-12)


def test_restrict_periods():
    ds = restrict_periods(load(GRID), 1991, 1992)
    assert ds.periods == (1991, 1992)
    assert ds.n_slots == 4
    with pytest.raises(PanelDataError):
        restrict_periods(ds, 1995, 1994)


def test_load_industry_panels_keeps_file_order():
    text = "industry,region,year,output,productivity\nTextile,A,1990,1,1\nMetal,A,1990,1,1\nTextile,A,1991,2,2\n"
    panels = load_industry_panels(io.StringIO(text), PanelSchema(industry="industry"))
    assert list(panels) == ["Textile", "Metal"]
    assert panels["Textile"].n_slots == 2
    assert panels["Metal"].label == "Metal"

    metal = load_panel_csv(io.StringIO(text), PanelSchema(industry="industry"), industry="Metal")
    assert metal.n_slots == 1


def test_emit_scatter_csv_lines():
    gp = make_growth_panel([0.1, 0.2, 0.3], [0.01, 0.02, 0.03], ["a", "a", "b"], [2, 3, 2])
    out = io.StringIO()
    emit_scatter_csv(gp, out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "entity,period,q,p"
    assert len(lines) == 4
    assert lines[1] == "a,2,0.01,0.1"

    empty = io.StringIO()
    emit_scatter_csv(GrowthPanel(rows=(), entities=()), empty)
    assert empty.getvalue().splitlines() == ["entity,period,q,p"]


def test_scatter_round_trip(rng):
    p, q = rng.normal(size=6), rng.normal(size=6)
    gp = make_growth_panel(p, q, ["a", "a", "a", "b", "b", "b"], [1, 2, 3, 1, 2, 3])
    out = io.StringIO()
    emit_scatter_csv(gp, out)
    schema = PanelSchema(entity="entity", period="period", variables={"p": "p", "q": "q"})
    reloaded = growth_panel_from_columns(load_panel_csv(io.StringIO(out.getvalue()), schema))
    np.testing.assert_array_equal(reloaded.p, gp.p)
    np.testing.assert_array_equal(reloaded.q, gp.q)


def test_levels_round_trip_is_a_fixed_point():
    text = GRID.replace("Centro,1991,,5.5", "Centro,1991,55,5.5")
    first = load(text)
    out = io.StringIO()
    emit_levels_csv(first, out)
    schema = PanelSchema(entity="entity", period="period")
    second = load_panel_csv(io.StringIO(out.getvalue()), schema)
    assert second.observations == first.observations
    again = io.StringIO()
    emit_levels_csv(second, again)
    assert again.getvalue() == out.getvalue()
