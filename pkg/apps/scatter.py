"""
Verdoorn Toolkit - Scatter Controller
-------------------------------------
Writes the (q, p) growth pairs of each industry and period window as CSV,
ready for a productivity-against-output scatter plot, together with the
level data behind them.
"""

import logging
from typing import Any, Dict, Optional

from core.panel_data import emit_levels_csv, emit_scatter_csv
from core.pipeline import prepare_panels
from core.report_renderer import slug
from core.run_config import build_run_config


class ScatterController:
    """Controller for the ``scatter`` subcommand."""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.logger = logging.getLogger("verdoorn.apps.scatter")
        self.config = config or {}

    def run(self, parameters: Dict[str, Any], defaults: Dict[str, Any]) -> Dict[str, Any]:
        """scatter_<industry>_<window>.csv and levels_<industry>_<window>.csv per industry and window."""
        config = build_run_config(defaults, parameters.get("overrides"), parameters.get("config_path"))
        panels, skipped = prepare_panels(config)
        config.output_dir.mkdir(parents=True, exist_ok=True)

        outputs = []
        for panel in panels:
            name = f"{slug(panel.industry)}_{panel.window[0]}-{panel.window[1]}" if panel.window else f"{slug(panel.industry)}_all"
            scatter_path = config.output_dir / f"scatter_{name}.csv"
            emit_scatter_csv(panel.growth, scatter_path)
            levels_path = config.output_dir / f"levels_{name}.csv"
            emit_levels_csv(panel.levels, levels_path)
            outputs.extend([scatter_path, levels_path])
            self.logger.info(f"Wrote {scatter_path} ({panel.growth.usable_observations} points) and {levels_path}")
        return {
            "success": True,
            "message": f"Wrote scatter and level files for {len(panels)} panel(s); {len(skipped)} skipped",
            "outputs": outputs,
            "skipped": skipped,
        }
