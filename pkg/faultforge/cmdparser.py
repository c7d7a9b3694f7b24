# Copyright (c), CommunityLogiq Software

from typing import Callable, List, Optional


class UnsupportedArgException(Exception):
    pass


class ArgTuple:
    def __init__(
        self,
        arg: str,
        helpstr: str,
        fn: Callable[[List[str]], bool],
        aliases: List[str],
    ):
        self.arg = arg
        self.helpstr = helpstr
        self.fn = fn
        self.aliases = aliases


class CmdParser:
    """Second-level dispatch for grouped commands such as `faultforge models list`"""

    def __init__(self, module: str, module_help: Optional[str] = None):
        self.supported_cmds: List[ArgTuple] = []
        self.module = module
        self.module_help = module_help

    def add_cmd(
        self,
        arg: str,
        helpstr: str,
        fn: Callable[[List[str]], bool],
        aliases: Optional[List[str]] = None,
    ):
        self.supported_cmds.append(ArgTuple(arg, helpstr, fn, aliases or []))

    def get_help(self) -> str:
        names = [t.arg for t in self.supported_cmds] + [a for t in self.supported_cmds for a in t.aliases]
        width = max(map(len, names), default=0) + 1

        lines = [f"faultforge {self.module} commands:", ""]
        for arg_tuple in self.supported_cmds:
            lines.append("    " + arg_tuple.arg.ljust(width) + arg_tuple.helpstr)
            for alias in arg_tuple.aliases:
                lines.append("    " + alias.ljust(width) + f"alias for {arg_tuple.arg}")

        if self.module_help is not None:
            lines += ["", self.module_help]

        return "\n".join(lines) + "\n"

    def dispatch(self, args: List[str]) -> bool:
        command = args[0] if args else None
        for arg_tuple in self.supported_cmds:
            if command == arg_tuple.arg or command in arg_tuple.aliases:
                return arg_tuple.fn(args[1:])

        raise UnsupportedArgException(command)
