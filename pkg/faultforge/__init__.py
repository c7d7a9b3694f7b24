# Copyright (c), CommunityLogiq Software

import sys
import inspect
from loguru import logger
from types import ModuleType
from typing import NamedTuple, List, Dict, Optional, Sequence

import faultforge.commands
from faultforge.argparser import HelpRequested
from faultforge.errors import FaultForgeError
from faultforge.internal import Console, configure_logging

EXIT_OK = 0
EXIT_INTERNAL = 2

modules = []


class Command(NamedTuple):
    module: ModuleType
    ty: str
    help: str


def register_module(module):
    global modules
    if module not in modules:
        modules.append(module)


def _get_command_list() -> List[Command]:
    global modules

    module_commands = []
    for mod in modules:
        for element_name, target in inspect.getmembers(mod, inspect.isclass):
            if element_name == "FaultforgeCommand" or inspect.isabstract(target):
                continue
            module_commands.append(Command(mod, element_name, getattr(target, "__help__", "")))

    return module_commands


def _instantiate_module(command: Command):
    target = getattr(command.module, command.ty)
    return target()


def _get_command_to_module_mapping() -> Dict[str, Command]:
    return {str(_instantiate_module(command)): command for command in _get_command_list()}


def _print_help():
    print("usage:")
    print("    faultforge --help")
    print("    faultforge [command] --help")
    print("    faultforge [command] [parameters]")
    print("")
    print("Supported commands:")
    mapping = _get_command_to_module_mapping()

    for key in sorted(mapping.keys()):
        print("    {key: <20} {help}".format(key=key, help=mapping[key].help))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Runs one command and returns the process exit code"""
    args = list(sys.argv[1:] if argv is None else argv)
    configure_logging()
    register_module(faultforge.commands)

    if not args:
        _print_help()
        return 1

    command = args[0]
    if command in ("--help", "-h", "-help"):
        _print_help()
        return EXIT_OK

    mapping = _get_command_to_module_mapping()
    if command not in mapping:
        Console.error(f'ERROR: Command "{command}" not recognized. Try "faultforge --help".')
        return 1

    instance = _instantiate_module(mapping[command])
    try:
        return EXIT_OK if instance.run(args[1:]) else 1
    except HelpRequested:
        return EXIT_OK
    except FaultForgeError as e:
        logger.debug(f"{type(e).__name__} in {command}")
        Console.error(f"ERROR: {e}")
        return e.exit_code
    except Exception:
        logger.exception(f"{command} failed")
        return EXIT_INTERNAL


def run():
    sys.exit(main())
