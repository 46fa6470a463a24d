import os
import sys
from pathlib import Path

import pytest

# Ensure project root is on sys.path so `app` package is importable during tests
PROJECT_ROOT = Path(__file__).resolve().parents[1]
os.environ.setdefault("PYTHONPATH", str(PROJECT_ROOT))
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

AGE_TABLE_PATH = PROJECT_ROOT / "data" / "ageprobs.txt"


def pytest_collection_modifyitems(config, items):
    if os.getenv("MINRUIN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="long-tier run; set MINRUIN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def age_table():
    from app.model.hazard import load_age_table

    return load_age_table(AGE_TABLE_PATH)
