"""
Pytest configuration and fixtures for pipefuse tests.
"""
import os
import sys

import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.config import RunConfig
from core.scene_synth import generate_scene


# Bottom-up execution order: primitives before the modules built on them
MODULE_ORDER = [
    "test_geometry",
    "test_view_fusion",
    "test_signal_prep",
    "test_neural_kernels",
    "test_scene_synth",
    "test_formats",
    "test_config",
    "test_evaluation",
    "test_reporter",
    "test_footprint",
    "test_cli",
]


def pytest_collection_modifyitems(items):
    """Sort tests by module according to MODULE_ORDER, keeping order within a module."""
    def get_order(item):
        module = item.module.__name__.split(".")[-1] if item.module else ""
        try:
            return MODULE_ORDER.index(module)
        except ValueError:
            return len(MODULE_ORDER)  # Unknown modules go last

    items.sort(key=get_order)


def pytest_addoption(parser):
    """Add command line options for pytest."""
    parser.addoption(
        "--seed",
        action="store",
        type=int,
        default=0,
        help="Base seed for randomized and corpus tests",
    )
    parser.addoption(
        "--scenes",
        action="store",
        type=int,
        default=200,
        help="Number of synthetic scenes in the corpus fixture",
    )


@pytest.fixture(scope="session")
def base_seed(request) -> int:
    """Get the base seed from command line."""
    return request.config.getoption("--seed")


@pytest.fixture(scope="session")
def n_scenes(request) -> int:
    """Get the corpus size from command line."""
    return request.config.getoption("--scenes")


@pytest.fixture(scope="session")
def config() -> RunConfig:
    """Default run configuration (0.5 / 0.7 / 0.4)."""
    return RunConfig()


@pytest.fixture(scope="session")
def corpus(base_seed, n_scenes):
    """Seeded synthetic corpus: list of (SceneSpec, GroundTruth), two pipes per scene."""
    return [
        generate_scene(base_seed * 100_000 + k, 2, scene_id=f"scene_{k:04d}")
        for k in range(n_scenes)
    ]


@pytest.fixture(scope="session")
def corpus_truths(corpus):
    return [gt for _, gt in corpus]
