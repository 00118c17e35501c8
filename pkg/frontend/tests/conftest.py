import struct
import zlib
from pathlib import Path

import pandas as pd
import pytest

SAMPLE_DIR = Path(__file__).resolve().parents[1] / "sample_data"


def trace_frame(config, per_instance):
    """Build an in-memory trace: {instance: [(iter, cost, best, acc), ...]}."""
    rows = []
    for instance, seq in per_instance.items():
        for entry in seq:
            it, cost, best = entry[:3]
            row = {"instance": instance, "iter": it, "cost": cost,
                   "best_cost": best, "elapsed_ms": 0.1, "config": config}
            if len(entry) > 3:
                row["cell_accuracy"] = entry[3]
            rows.append(row)
    return pd.DataFrame(rows)


def write_trace_csv(path, df):
    df.drop(columns=["config"]).to_csv(path, index=False)


def strip_png_metadata(data: bytes) -> bytes:
    """Drop ancillary text/time chunks so only pixel content is compared."""
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    out = [data[:8]]
    pos = 8
    while pos < len(data):
        length = struct.unpack(">I", data[pos:pos + 4])[0]
        ctype = data[pos + 4:pos + 8]
        chunk = data[pos:pos + 12 + length]
        if ctype not in (b"tEXt", b"zTXt", b"iTXt", b"tIME"):
            out.append(chunk)
        pos += 12 + length
    return b"".join(out)


@pytest.fixture
def two_config_frames():
    a = trace_frame("sample", {
        "i0": [(0, 4, 4, 0.5), (1, 2, 2, 0.7), (2, 0, 0, 1.0)],
        "i1": [(0, 3, 3, 0.6), (1, 3, 3, 0.6), (2, 1, 1, 0.9)],
    })
    b = trace_frame("greedy", {
        "i0": [(0, 4, 4, 0.5), (1, 1, 1, 0.8), (2, 1, 1, 0.8)],
        "i1": [(0, 5, 5, 0.4), (1, 2, 2, 0.7), (2, 0, 0, 1.0)],
    })
    return pd.concat([a, b], ignore_index=True)


@pytest.fixture
def two_config_aggregate():
    return pd.DataFrame([
        {"config": "sample", "instance": "i0", "solved": 1, "n_constraints": 8},
        {"config": "sample", "instance": "i1", "solved": 0, "n_constraints": 8},
        {"config": "greedy", "instance": "i0", "solved": 0, "n_constraints": 8},
        {"config": "greedy", "instance": "i1", "solved": 1, "n_constraints": 8},
    ])
