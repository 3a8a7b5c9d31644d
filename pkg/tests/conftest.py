import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # fdcheck / oracles helpers

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "datasets"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


def require_dataset(dataset_id: str) -> Path:
    """Skip (not fail) when a pinned dataset file is absent in this checkout;
    `dsaopt fetch-data` downloads it where the UCI archive is reachable."""
    from dsaopt.data import DATASETS

    path = DATA_DIR / DATASETS[dataset_id].filename
    if not path.exists():
        pytest.skip(f"dataset '{dataset_id}' not present; run: dsaopt fetch-data "
                    f"--datasets {dataset_id}")
    return path
