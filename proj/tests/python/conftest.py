import json
import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def report_schema():
    return json.loads((ROOT / "schemas" / "eval_report.schema.json").read_text())


@pytest.fixture
def tiny_config():
    return {
        "profile": "desk",
        "seed": 3,
        "model": {"d_model": 16, "n_heads": 2, "d_ffn": 32, "width": 2},
        "train": {"epochs": 2},
        "data": {"n_train": 2, "n_val": 0, "n_test": 1, "t_min": 40, "t_max": 60},
    }
