import json
import os
import subprocess
from pathlib import Path

import pytest

DATA = Path(__file__).resolve().parent.parent / "data"


def pytest_addoption(parser):
    parser.addoption("--cli", required=True, help="path to the keyframe executable")
    parser.addoption("--docs", required=True, help="path to the docs directory")


@pytest.fixture(scope="session")
def cli(request):
    exe = request.config.getoption("--cli")

    def run(*args, check=None):
        proc = subprocess.run([exe, *map(str, args)], capture_output=True, text=True, timeout=300)
        if check is not None:
            assert proc.returncode == check, proc.stderr
        return proc

    return run


@pytest.fixture(scope="session")
def schemas(request):
    docs = Path(request.config.getoption("--docs"))
    return {name: json.loads((docs / "schemas" / f"{name}.schema.json").read_text()) for name in ("record", "report")}


@pytest.fixture(scope="session")
def data_dir():
    return DATA


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
