from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")

from audiofab import fixtures  # noqa: E402


@pytest.fixture(scope="session")
def registry36():
    """The canonical 36-technique registry."""
    return fixtures.fixture_registry()


@pytest.fixture(scope="session")
def registry_full():
    """Canonical registry plus demo extras and diagnostic stubs."""
    return fixtures.fixture_registry(extras=True, specials=True)


@pytest.fixture()
def workspace(tmp_path):
    ws = tmp_path / "ws"
    ws.mkdir()
    return ws
