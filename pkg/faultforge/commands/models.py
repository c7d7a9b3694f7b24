# Copyright (c), CommunityLogiq Software

from typing import List

import faultforge.argparser
import faultforge.cmdparser
from faultforge.commands.command import FaultforgeCommand
from faultforge.commands.common import get_model
from faultforge.engine.model_registry import builtin_models, save_model, weights_digest
from faultforge.internal import Console


# This function must take an argument due to how it is invoked by `parser.dispatch`
def list_models(args: List[str]) -> bool:
    table = []
    for name, model in sorted(builtin_models().items()):
        shape = "x".join(str(d) for d in model.input_shape)
        table.append([name, model.task.value, shape, model.num_injectable, model.parameter_count()])

    Console.table(table, headers=["Model", "Task", "Input", "Injectable layers", "Parameters"])
    return True


def model_info(args: List[str]) -> bool:
    parser = faultforge.argparser.ArgumentParser(prog="faultforge models info")
    parser.add_argument("model", help="built-in model name or ALFM model file")
    parsed = parser.parse_args(args)

    model = get_model(parsed.model)
    Console.log(f"{model.name} ({model.task.value}), weights digest {weights_digest(model)}")
    table = []
    for info in model.layer_infos():
        table.append(
            [
                info.index,
                info.position,
                info.kind.value,
                "x".join(str(d) for d in info.neuron_dims),
                info.element_count_neurons,
                "x".join(str(d) for d in info.weight_dims),
                info.element_count_weights,
            ]
        )
    Console.table(table, headers=["Index", "Position", "Kind", "Output", "Neurons", "Kernel", "Weights"])
    return True


def export_model(args: List[str]) -> bool:
    parser = faultforge.argparser.ArgumentParser(prog="faultforge models export")
    parser.add_argument("model", help="built-in model name")
    parser.add_argument("--out", "-o", required=True, help="ALFM file to write")
    parsed = parser.parse_args(args)

    save_model(get_model(parsed.model), parsed.out)
    Console.ok(f"Wrote {parsed.model} to {parsed.out}")
    return True


class Models(FaultforgeCommand):
    __help__ = "List, describe and export models"

    def __init__(self):
        super().__init__("models")

    def run(self, args: List[str]) -> bool:
        parser = faultforge.cmdparser.CmdParser("models")
        parser.add_cmd("list", "list built-in models", list_models, aliases=["ls"])
        parser.add_cmd("info", "show the injectable layers of a model", model_info)
        parser.add_cmd("export", "write a model to an ALFM file", export_model)

        try:
            return parser.dispatch(args)
        except faultforge.cmdparser.UnsupportedArgException:
            Console.log(parser.get_help())
            return False
