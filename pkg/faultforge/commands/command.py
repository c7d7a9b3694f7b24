# Copyright (c), CommunityLogiq Software

from abc import ABC, abstractmethod
from typing import List


class FaultforgeCommand(ABC):
    def __init__(self, name: str):
        self.name = name

    def __str__(self):
        return self.name

    @abstractmethod
    def run(self, args: List[str]) -> bool:
        """Run the command with the arguments following its name"""
