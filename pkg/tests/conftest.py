"""Shared fixtures: growth-panel builders and level CSV files."""

import numpy as np
import pandas as pd
import pytest

from core.panel_data import GrowthPanel


def make_growth_panel(p, q, entities, periods, label="") -> GrowthPanel:
    return GrowthPanel.from_arrays(entities, periods, p, q, label=label)


def random_growth_panel(rng, n_entities=7, n_periods=8, slope=0.7, sigma_u=0.05, sigma_e=0.02, drop=0.0):
    """Verdoorn panel with optional random row drops (every entity keeps at least 3 rows)."""
    entities, periods, p, q = [], [], [], []
    for i in range(n_entities):
        u = rng.normal(0.0, sigma_u)
        keep = rng.random(n_periods) >= drop
        keep[:3] = True
        for t in range(1, n_periods + 1):
            if not keep[t - 1]:
                continue
            qv = rng.normal(0.02, 0.08)
            entities.append(f"r{i}")
            periods.append(t)
            q.append(qv)
            p.append(0.01 + slope * qv + u + rng.normal(0.0, sigma_e))
    return make_growth_panel(p, q, entities, periods)


def write_levels_csv(path, n_regions=7, years=range(1986, 2000), industries=("Metal", "Textile"), seed=7):
    """Multi-industry level CSV with output and productivity following a Verdoorn relation."""
    rng = np.random.default_rng(seed)
    records = []
    for industry in industries:
        for r in range(n_regions):
            output, productivity = 100.0 + 10 * r, 20.0 + r
            effect = rng.normal(0.0, 0.02)
            for year in years:
                records.append((industry, f"R{r + 1}", year, round(output, 6), round(productivity, 6)))
                q = rng.normal(0.03, 0.05)
                output *= np.exp(q)
                productivity *= np.exp(0.6 * q + effect + rng.normal(0.0, 0.01))
    frame = pd.DataFrame(records, columns=["industry", "region", "year", "output", "productivity"])
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture
def levels_csv(tmp_path):
    return write_levels_csv(tmp_path / "levels.csv")
