#!/usr/bin/env python3
"""Smoke test for the nmpsim_py extension module.

Build first with `cargo build -p nmpsim-py`; this script locates the cdylib
in target/debug, exposes it as an importable module, and exercises the main
entry points with small, fast workloads.
"""

import json
import math
import shutil
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_module():
    lib = REPO / "target" / "debug" / "libnmpsim_py.so"
    if not lib.exists():
        sys.exit(f"missing {lib}; run `cargo build -p nmpsim-py` first")
    shim = lib.with_name("nmpsim_py.so")
    if not shim.exists() or shim.stat().st_mtime < lib.stat().st_mtime:
        shutil.copy2(lib, shim)
    sys.path.insert(0, str(shim.parent))
    import nmpsim_py

    return nmpsim_py


def main():
    m = import_module()

    # Bit expansion and vertex hashing.
    assert m.morton_expand(0b1011) == 0b1000001001
    assert m.morton_hash(1, 0, 0, 1 << 19) == 1
    assert m.morton_hash(0, 1, 0, 1 << 19) == 2
    assert m.xor_hash(0, 0, 0, 1 << 19) == 0
    assert m.xor_hash(1, 2, 3, 1 << 19) == (1 ^ (2 * 2654435761) ^ (3 * 805459861)) % (1 << 19)

    # Geometric level growth, base 16 up to 2048 over 16 levels.
    res = m.grid_resolutions()
    assert len(res) == 16 and res[0] == 16 and res[-1] == 2048
    assert all(a < b for a, b in zip(res, res[1:]))

    # Locality histogram: Z-order keeps most neighbor gaps small, the
    # XOR hash scatters most of them far away.
    near_m, _, far_m = m.neighbor_histogram("morton")
    near_x, _, far_x = m.neighbor_histogram("xor")
    assert near_m >= 0.75, near_m
    assert near_x <= 0.65, near_x
    assert far_x >= 0.10 > far_m, (far_x, far_m)

    # Byte accounting and the inter-bank movement ledger.
    bytes_by_step = m.step_spec_bytes(262144)
    assert bytes_by_step["Mlp"]["param_bytes"] == 18816
    totals = m.ledger_totals()
    assert totals["heterogeneous"] == 79_489_920
    assert (
        totals["heterogeneous"]
        < totals["pure_parameter_parallel"]
        < totals["pure_data_parallel"]
    )

    # Volume rendering: an ln(2)-opacity first sample passes half the light.
    c = m.volume_render([math.log(2.0), 1e9], [(1, 1, 1), (0, 0, 0)], [0.0, 1.0], 2.0)
    assert abs(c[0] - 0.5) < 1e-9, c

    # Trace generation and the full single-scenario simulation.
    cfg = "[workload]\nrays = 16\nsamples_per_ray = 32\nbatch_points = 512\n"
    summary = m.trace_summary(cfg)
    assert summary["points"] == 512
    assert summary["requests"] > 0 and summary["read_bytes"] > 0

    report = json.loads(m.run_sim(cfg))
    assert report["schema_version"] == 1
    assert report["scenarios"] and report["scenarios"][0]["total_cycles"] > 0
    assert len(report["histograms"]) == 2

    # Reference trainer: loss should drop substantially on a toy batch.
    losses = m.train_demo(steps=100, learning_rate=0.2)
    assert losses[-1] < 0.1 * losses[0], (losses[0], losses[-1])

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
