"""
Verdoorn Toolkit - Unit Root Controller
---------------------------------------
Runs the Fisher-type panel unit-root tests on productivity and output
growth per industry and period window.
"""

import logging
from functools import partial
from typing import Any, Dict, Optional

from core.pipeline import analyse_unit_roots, map_ordered, prepare_panels
from core.report_renderer import ReportRenderer, SkippedRun
from core.run_config import build_run_config


class UnitrootController:
    """Controller for the ``unitroot`` subcommand."""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.logger = logging.getLogger("verdoorn.apps.unitroot")
        self.config = config or {}

    def run(self, parameters: Dict[str, Any], defaults: Dict[str, Any]) -> Dict[str, Any]:
        config = build_run_config(defaults, parameters.get("overrides"), parameters.get("config_path"))
        panels, skipped = prepare_panels(config)
        blocks = map_ordered(partial(analyse_unit_roots, config=config), panels, config.workers)

        for block in blocks:
            if all(report.combination is None for report in block.reports.values()):
                skipped.append(SkippedRun(block.industry, block.window, "no testable entities"))

        renderer = ReportRenderer(defaults.get("output"))
        text = renderer.render_unitroot_report(blocks, skipped)
        records = renderer.unitroot_records(blocks)
        outputs = renderer.write_outputs("unitroot", text, records, config.output_dir, config.output_formats)
        self.logger.info(f"Unit-root tests on {len(blocks)} panels with lag policy {config.lag_policy.label}")
        return {
            "success": True,
            "message": f"Tested {len(blocks)} panel(s); {len(skipped)} skipped",
            "outputs": outputs,
            "skipped": skipped,
            "blocks": blocks,
        }
