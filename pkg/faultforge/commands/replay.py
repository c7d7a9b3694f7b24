# Copyright (c), CommunityLogiq Software

from pathlib import Path
from typing import List

import faultforge.argparser
from faultforge.commands.command import FaultforgeCommand
from faultforge.commands.common import get_dataset, get_model
from faultforge.engine.campaign import replay
from faultforge.engine.runset import load_runset
from faultforge.errors import FaultFileError, ReplayMismatchError, ValidationError
from faultforge.internal import Console

# mismatches beyond this many are only counted
SHOWN_MISMATCHES = 20


def default_dataset(fault_file: Path) -> str:
    descriptor = fault_file.resolve().parent.parent / "meta" / "dataset.json"
    if not descriptor.exists():
        raise ValidationError(f"no --dataset given and no {descriptor} next to the fault file")
    return str(descriptor)


# Example usage:
# faultforge replay --faults runs/baseline/faults/campaign.alff --runset runs/baseline/faults/campaign.alfr --model tiny-cnn
class Replay(FaultforgeCommand):
    __help__ = "Re-run every recorded injection and check it reproduces bit for bit"

    def __init__(self):
        super().__init__("replay")

    def run(self, args: List[str]) -> bool:
        parser = faultforge.argparser.ArgumentParser(
            prog="faultforge replay", description="Replay a campaign from its fault file and runset"
        )
        parser.add_argument("--faults", "-f", required=True, help="ALFF fault file of the campaign")
        parser.add_argument("--runset", "-r", required=True, help="ALFR runset file of the campaign")
        parser.add_argument("--model", "-m", required=True, help="built-in model name or ALFM model file")
        parser.add_argument("--dataset", help="data set spec (default: meta/dataset.json of the campaign)")
        parsed = parser.parse_args(args)

        fault_file = Path(parsed.faults)
        try:
            records = load_runset(parsed.runset)
        except FaultFileError as e:
            raise ReplayMismatchError(f"runset cannot be replayed: {e}")

        model = get_model(parsed.model)
        ds = get_dataset(
            parsed.dataset or default_dataset(fault_file), model, max((r.image_id for r in records), default=-1) + 1
        )
        report = replay(fault_file, parsed.runset, model, ds)

        if not report.ok:
            Console.table(
                [
                    [m.epoch, m.image_id, m.column, m.field, m.recorded, m.replayed]
                    for m in report.mismatches[:SHOWN_MISMATCHES]
                ],
                headers=["Epoch", "Image", "Column", "Field", "Recorded", "Replayed"],
            )
            raise ReplayMismatchError(
                f"{len(report.mismatches)} mismatches over {report.faults} replayed faults", report
            )

        Console.ok(f"Replayed {report.faults} faults over {report.inferences} inferences, all identical")
        return True
