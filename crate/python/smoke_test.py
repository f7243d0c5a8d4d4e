#!/usr/bin/env python3
"""Smoke test for the qtis_py extension module.

Build it first (either profile), then run this script:

    cargo build -p qtis-py
    python3 python/smoke_test.py
"""
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_extension():
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libqtis_py.so", "qtis_py.so", "libqtis_py.dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("qtis_py is not built; run `cargo build -p qtis-py` first")
    stage = Path(tempfile.mkdtemp(prefix="qtis-py-"))
    shutil.copy2(built, stage / "qtis_py.so")
    sys.path.insert(0, str(stage))
    import qtis_py

    return qtis_py


def main():
    qtis = import_extension()

    inst = qtis.Instance.builtin(4)
    assert inst.n_tasks == 3 and inst.resources == 2 and inst.n_vars == 6
    assert inst.penalty == 7.0
    assert inst.overlaps() == [(0, 1, False), (0, 2, False), (1, 2, False)]
    round_tripped = qtis.Instance.from_json(inst.to_json())
    assert round_tripped.tasks() == inst.tasks()

    qubo = qtis.build_qubo(inst)
    assert qubo.n_vars == 6
    assert qubo.evaluate([1, 0, 1, 0, 1, 0]) == -3.0
    bits, minimum = qubo.brute_force()
    assert minimum == -3.0 and sum(bits) == 3
    assert qtis.bounds(inst) == (-3.0, 15.0)

    set1 = qtis.Instance.builtin(1)
    assert abs(qtis.pair_probability(set1, 0, 1) - 0.882373598740979) < 1e-12
    probs = qtis.conflict_probabilities(set1, variant="classical")
    assert [p > 0.5 for p in probs] == [True, False, False]

    uniform = qtis.objective(inst, gamma=[0.0], beta=[0.0], zeta=[0.0])
    assert abs(uniform - 10.5 / 18.0) < 1e-12

    dump = qtis.dump_circuit(set1, depth=1)
    assert dump.splitlines()[0].startswith("H ") or "qubits" in dump.splitlines()[0]

    result = qtis.solve(inst, strategy="standard", depth=3, seed=qtis.DEFAULT_BASE_SEED)
    assert result.e_norm < 0.05 and result.converged
    assert result.valid and result.conflicts == []
    assert all(slot is not None for slot in result.assignment)
    assert len(result.gamma) == 3 and len(result.beta) == 3 and len(result.zeta) == 3
    assert len(result.modal_bitstring) == 9
    repeat = qtis.solve(inst, strategy="standard", depth=3, seed=qtis.DEFAULT_BASE_SEED)
    assert repeat.e_norm == result.e_norm and repeat.gamma == result.gamma

    trace = qtis.solve(inst, strategy="tqaoa", depth=3, seed=11).depth_trace
    assert len(trace) == 3 and not math.isnan(trace[-1])

    checks = qtis.verify()
    assert len(checks) == 24 and all(passed for _, passed, _ in checks)

    print("smoke test passed")


if __name__ == "__main__":
    main()
