# Copyright (c), CommunityLogiq Software
# ignore flake8 errors for unused
# flake8: noqa: F401

from .command import FaultforgeCommand
from .generate import Generate
from .run import Run
from .sweep import Sweep
from .eval import Eval
from .replay import Replay
from .models import Models
from .dataset import Dataset
