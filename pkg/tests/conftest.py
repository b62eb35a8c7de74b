import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from presentcoach.providers import ProviderSet
from presentcoach.store import SessionStore


@pytest.fixture
def store(tmp_path):
    return SessionStore(tmp_path / "data")


@pytest.fixture
def stub_providers():
    return ProviderSet.all_stub()
