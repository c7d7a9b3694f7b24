# Copyright (c), CommunityLogiq Software

import sys

from . import main

sys.exit(main())
