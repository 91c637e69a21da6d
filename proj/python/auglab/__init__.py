# SPDX-License-Identifier: Apache-2.0
"""Desk-scale pruning / augmentation-magnitude / distillation laboratory."""

from auglab._auglab import *  # noqa: F401,F403
from auglab._auglab import __version__  # noqa: F401
