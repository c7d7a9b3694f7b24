# Copyright (c), CommunityLogiq Software

from typing import List

import faultforge.argparser
from faultforge.commands.command import FaultforgeCommand
from faultforge.commands.run import print_kpis
from faultforge.engine.evaluation import (
    DEFAULT_CONF_THRESHOLD,
    DEFAULT_IOU_THRESHOLD,
    evaluate_results,
    write_evaluation,
)
from faultforge.internal import Console


# Example usage:
# faultforge eval --results runs/baseline --format json
class Eval(FaultforgeCommand):
    __help__ = "Compute SDE/DUE KPIs from a campaign's result files"

    def __init__(self):
        super().__init__("eval")

    def run(self, args: List[str]) -> bool:
        parser = faultforge.argparser.ArgumentParser(
            prog="faultforge eval", description="Write KPI, per-bit and per-layer tables next to the results"
        )
        parser.add_argument("--results", "-r", required=True, help="campaign directory or its results/ folder")
        parser.add_argument("--format", choices=["csv", "json"], default="csv", help="report format (default: csv)")
        parser.add_argument("--iou", type=float, default=DEFAULT_IOU_THRESHOLD, help="detection IoU threshold")
        parser.add_argument("--conf", type=float, default=DEFAULT_CONF_THRESHOLD, help="detection score threshold")
        parsed = parser.parse_args(args)

        reports = evaluate_results(parsed.results, parsed.iou, parsed.conf)
        paths = write_evaluation(parsed.results, reports, parsed.format)
        print_kpis(reports)
        for path in paths:
            Console.log(f"wrote {path}")
        return True
