# Copyright (c), CommunityLogiq Software

from collections import Counter
from typing import List

import faultforge.argparser
from faultforge.commands.command import FaultforgeCommand
from faultforge.commands.common import add_common_campaign_args, get_model, get_out_dir, get_scenario
from faultforge.engine.fault_gen import generate_fault_matrix, save_fault_matrix
from faultforge.internal import Console


# Example usage:
# faultforge generate --scenario default --model tiny-cnn --out faults.alff --seed 7
class Generate(FaultforgeCommand):
    __help__ = "Generate a fault matrix (ALFF file) for a scenario and model"

    def __init__(self):
        super().__init__("generate")

    def run(self, args: List[str]) -> bool:
        parser = faultforge.argparser.ArgumentParser(
            prog="faultforge generate", description="Pre-generate every fault of a campaign"
        )
        add_common_campaign_args(parser, need_dataset=False)
        parser.add_argument("--out", "-o", help="fault file to write (default: $FAULTFORGE_OUT/campaign.alff)")
        parsed = parser.parse_args(args)

        cfg = get_scenario(parsed.scenario, parsed.seed)
        model = get_model(parsed.model)
        matrix = generate_fault_matrix(model, cfg)
        out = parsed.out or str(get_out_dir(None) / "campaign.alff")
        save_fault_matrix(matrix, out)

        per_layer = Counter(fault.layer for fault in matrix.columns)
        Console.table(
            [[layer, count] for layer, count in sorted(per_layer.items())],
            headers=["Layer", "Faults"],
        )
        Console.ok(f"{len(matrix)} {matrix.target.value} faults written to {out}")
        return True
