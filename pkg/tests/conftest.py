import os
import sys

import numpy as np
import pytest

from robust_persuasion import apples_instance, direct_revelation_example, PersuasionInstance

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
INSTANCE_DIR = os.path.join(ROOT, "instances")


@pytest.fixture
def example32():
    return direct_revelation_example(0.01)


@pytest.fixture
def apples():
    return apples_instance(0.1)


@pytest.fixture
def twin_columns():
    """Two actions the receiver cannot tell apart."""
    return PersuasionInstance(
        ["x", "y"], ["a0", "a1"], [0.5, 0.5],
        [[0.2, 0.7], [0.9, 0.1]],
        [[0.3, 0.3], [0.6, 0.6]],
        0.5,
    )


@pytest.fixture
def single_action():
    return PersuasionInstance(["x", "y", "z"], ["only"], [0.2, 0.3, 0.5], [[0.1], [0.4], [0.9]], [[0.5], [0.2], [0.7]], 0.2)
