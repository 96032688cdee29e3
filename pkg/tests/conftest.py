import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from bhs_lab.core.graph import generate  # noqa: E402
from bhs_lab.data.config import LabConfig  # noqa: E402
from bhs_lab.data.database import Database  # noqa: E402


@pytest.fixture
def config(tmp_path, monkeypatch):
    monkeypatch.delenv("BHS_LAB_CACHE", raising=False)
    return LabConfig(
        cache_dir=str(tmp_path / "cache"),
        output_dir=str(tmp_path / "out"),
        _config_dir=str(tmp_path / "config"),
    )


@pytest.fixture
def database(config):
    return Database(config.database_path)


@pytest.fixture
def path3():
    return generate("path:3")


@pytest.fixture
def ring4():
    return generate("ring:4")
