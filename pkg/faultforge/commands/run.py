# Copyright (c), CommunityLogiq Software

from typing import Dict, List

import faultforge.argparser
from faultforge.commands.command import FaultforgeCommand
from faultforge.commands.common import (
    add_common_campaign_args,
    get_dataset,
    get_model,
    get_out_dir,
    get_scenario,
)
from faultforge.engine.campaign import run_campaign
from faultforge.engine.evaluation import KpiReport
from faultforge.engine.fault_gen import load_fault_matrix
from faultforge.internal import Console


def print_kpis(reports: Dict[str, KpiReport]):
    Console.table(
        [[leg, r.total, r.corrupted, r.due, f"{r.sde_rate:.4f}", f"{r.due_rate:.4f}"] for leg, r in reports.items()],
        headers=["Leg", "Inferences", "SDE", "DUE", "SDE rate", "DUE rate"],
    )


def add_execution_args(parser):
    parser.add_argument("--out-dir", "-o", help="output directory (default: $FAULTFORGE_OUT or faultforge-out)")
    parser.add_argument(
        "--mitigation", choices=["on", "off"], default="off", help="run the clipper-hardened leg (default: off)"
    )
    parser.add_argument("--threads", type=int, default=1, help="worker threads (default: 1)")


# Example usage:
# faultforge run --scenario default --model tiny-cnn --mitigation on --out-dir runs/baseline
class Run(FaultforgeCommand):
    __help__ = "Run a fault injection campaign"

    def __init__(self):
        super().__init__("run")

    def run(self, args: List[str]) -> bool:
        parser = faultforge.argparser.ArgumentParser(
            prog="faultforge run", description="Run the fault-free, faulty and hardened legs in lockstep"
        )
        add_common_campaign_args(parser)
        parser.add_argument("--faults", "-f", help="ALFF fault file; generated from --seed when omitted")
        add_execution_args(parser)
        parsed = parser.parse_args(args)

        cfg = get_scenario(parsed.scenario, parsed.seed)
        model = get_model(parsed.model)
        ds = get_dataset(parsed.dataset, model, cfg.dataset_size)
        faults = load_fault_matrix(parsed.faults) if parsed.faults else None
        out_dir = get_out_dir(parsed.out_dir)

        result = run_campaign(
            model,
            ds,
            cfg,
            faults,
            with_mitigation=parsed.mitigation == "on",
            out_dir=out_dir,
            threads=parsed.threads,
        )
        print_kpis({leg: result.kpi(leg) for leg in result.rows if leg != "orig"})
        Console.ok(f"Campaign written to {out_dir}")
        return True
