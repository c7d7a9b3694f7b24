# Copyright (c), CommunityLogiq Software

# ignore flake8 errors for unused
# flake8: noqa: F401
from .console import Console
from .log import configure_logging
