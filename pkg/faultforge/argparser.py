# Copyright (c), CommunityLogiq Software

"""
The ArgumentParser class subclasses the Python argparse.ArgumentParser class
in order to add the arguments every faultforge command shares (-log-level)
and to turn usage errors into CommandLineError instead of exiting.
"""

import argparse

from faultforge.errors import CommandLineError
from faultforge.internal.log import configure_logging

log_levels = ["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR"]


class ArgumentParser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.add_argument(
            "--log-level",
            "-log-level",
            type=str.upper,
            choices=log_levels,
            help="log level of the stderr sink, FAULTFORGE_LOG_LEVEL or INFO when omitted",
        )

    def parse_args(self, args=None, namespace=None):
        parsed = super().parse_args(args, namespace)
        if parsed.log_level is not None:
            configure_logging(parsed.log_level)
        return parsed

    def error(self, message: str):
        raise CommandLineError(f"{self.prog}: {message}")

    def exit(self, status: int = 0, message: str | None = None):
        if status != 0:
            raise CommandLineError(message or f"{self.prog}: invalid arguments")
        if message:
            print(message)
        raise HelpRequested()


class HelpRequested(Exception):
    """--help was given; the command should stop and succeed"""
