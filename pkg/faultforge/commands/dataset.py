# Copyright (c), CommunityLogiq Software

from typing import List

import faultforge.argparser
import faultforge.cmdparser
from faultforge.commands.command import FaultforgeCommand
from faultforge.commands.common import get_dataset, get_model
from faultforge.engine.dataset import export_ground_truth_json, save_descriptor
from faultforge.internal import Console


def _dataset_args(parser):
    parser.add_argument("--model", "-m", required=True, help="model labelling the data set")
    parser.add_argument("--dataset", default="synthetic", help="'synthetic', 'synthetic:SEED' or a descriptor file")
    parser.add_argument("--count", "-n", type=int, default=16, help="images in a synthetic data set (default: 16)")
    parser.add_argument("--out", "-o", required=True, help="file to write")


def export_gt(args: List[str]) -> bool:
    parser = faultforge.argparser.ArgumentParser(prog="faultforge dataset export-gt")
    _dataset_args(parser)
    parsed = parser.parse_args(args)

    model = get_model(parsed.model)
    ds = get_dataset(parsed.dataset, model, parsed.count)
    export_ground_truth_json(ds, parsed.out)
    Console.ok(f"Wrote ground truth of {len(ds)} images to {parsed.out}")
    return True


def export_descriptor(args: List[str]) -> bool:
    parser = faultforge.argparser.ArgumentParser(prog="faultforge dataset describe")
    _dataset_args(parser)
    parsed = parser.parse_args(args)

    model = get_model(parsed.model)
    ds = get_dataset(parsed.dataset, model, parsed.count)
    save_descriptor(ds, parsed.out)
    Console.ok(f"Wrote descriptor of {ds.name} to {parsed.out}")
    return True


class Dataset(FaultforgeCommand):
    __help__ = "Export data set ground truth and descriptors"

    def __init__(self):
        super().__init__("dataset")

    def run(self, args: List[str]) -> bool:
        parser = faultforge.cmdparser.CmdParser("dataset")
        parser.add_cmd("export-gt", "write COCO-style ground truth JSON", export_gt)
        parser.add_cmd("describe", "write the descriptor a data set is rebuilt from", export_descriptor)

        try:
            return parser.dispatch(args)
        except faultforge.cmdparser.UnsupportedArgException:
            Console.log(parser.get_help())
            return False
