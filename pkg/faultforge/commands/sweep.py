# Copyright (c), CommunityLogiq Software

from typing import List

import faultforge.argparser
from faultforge.commands.command import FaultforgeCommand
from faultforge.commands.common import (
    add_common_campaign_args,
    get_dataset,
    get_model,
    get_out_dir,
    get_scenario,
)
from faultforge.commands.run import add_execution_args
from faultforge.engine.campaign import Session, SweepAxis, sweep
from faultforge.engine.evaluation import evaluate_results
from faultforge.internal import Console

axes = [axis.value for axis in SweepAxis]


# Example usage:
# faultforge sweep --axis bit --values 30,0 --scenario default --model tiny-cnn
# faultforge sweep --axis layer --values 0,1-2 --scenario default --model tiny-cnn
class Sweep(FaultforgeCommand):
    __help__ = "Run one campaign per value of a scenario axis"

    def __init__(self):
        super().__init__("sweep")

    def run(self, args: List[str]) -> bool:
        parser = faultforge.argparser.ArgumentParser(
            prog="faultforge sweep", description="Sweep layers, bit positions, faults per image or the target"
        )
        parser.add_argument("--axis", "-a", required=True, choices=axes, help="scenario axis to sweep")
        parser.add_argument("--values", "-v", required=True, help="comma separated values, layer groups as lo-hi")
        add_common_campaign_args(parser)
        add_execution_args(parser)
        parsed = parser.parse_args(args)

        values = [v.strip() for v in parsed.values.split(",") if v.strip()]
        if not values:
            parser.error("--values is empty")

        cfg = get_scenario(parsed.scenario, parsed.seed)
        model = get_model(parsed.model)
        session = Session(model, get_dataset(parsed.dataset, model, cfg.dataset_size), cfg)
        dirs = sweep(
            session,
            SweepAxis(parsed.axis),
            values,
            get_out_dir(parsed.out_dir),
            with_mitigation=parsed.mitigation == "on",
            threads=parsed.threads,
        )

        table = []
        for value, out_dir in zip(values, dirs):
            for leg, report in evaluate_results(out_dir).items():
                table.append([value, leg, report.total, f"{report.sde_rate:.4f}", f"{report.due_rate:.4f}", out_dir])
        Console.table(table, headers=[parsed.axis, "Leg", "Inferences", "SDE rate", "DUE rate", "Directory"])
        return True
