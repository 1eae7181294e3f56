import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[2]
WORKER = ROOT / "python" / "dfqa" / "worker.py"


class WorkerProcess:
    """Reference worker driven over its stdin/stdout frames."""

    def __init__(self, argv):
        self.proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                     stderr=subprocess.DEVNULL, text=True)
        self.hello = json.loads(self.proc.stdout.readline())

    def run(self, table, query, request_id="r1", wall_seconds=5.0, memory_mb=512, max_result_cells=100000):
        frame = {"type": "exec", "request_id": request_id, "table": table, "query": query,
                 "limits": {"wall_seconds": wall_seconds, "memory_mb": memory_mb,
                            "max_result_cells": max_result_cells}}
        self.proc.stdin.write(json.dumps(frame) + "\n")
        self.proc.stdin.flush()
        return json.loads(self.proc.stdout.readline())

    def close(self):
        self.proc.stdin.close()
        self.proc.wait(timeout=10)


@pytest.fixture
def worker():
    w = WorkerProcess([sys.executable, str(WORKER)])
    yield w
    w.close()


@pytest.fixture
def dfqa_binary():
    path = os.environ.get("DFQA_BINARY")
    if not path or not Path(path).exists():
        pytest.skip("DFQA_BINARY not set; run through ctest")
    return path


@pytest.fixture
def cars():
    return {
        "columns": [{"name": "mpg", "dtype": "float"}, {"name": "cylinders", "dtype": "int"},
                    {"name": "car_name", "dtype": "string"}, {"name": "model_year", "dtype": "int"}],
        "rows": [[18.0, 8, "chevrolet chevelle malibu", 70], [31.0, 4, "datsun pl510", 71],
                 [25.0, 4, "ford pinto", 71], [None, 6, "amc hornet", 70]],
    }
