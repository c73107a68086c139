"""Smoke test for the cfal Python extension.

Build and install first:  pip install --no-build-isolation ./crates/py
"""
import json

import cfal


def main():
    world = cfal.World.fixture("table1")
    assert len(world) == 5
    assert abs(sum(world.mass) - 1.0) < 1e-12
    best, err = world.best_hypothesis()
    assert abs(err - 0.05) < 1e-12, err
    assert cfal.World.from_json(world.to_json()).q0 == world.q0

    assert cfal.doubling_schedule(14) == [2, 4, 8]

    # Uniform weight on {1, ..., 10}. Fewer samples make the left-hand side
    # steeper, so the threshold can only move down.
    atoms = [(float(v), 0.1) for v in range(1, 11)]
    m = cfal.choose_clip_threshold(atoms, 10_000, 1.0)
    assert 1.0 <= m <= 10.0
    assert cfal.choose_clip_threshold(atoms, 1, 1.0) <= m

    rec = cfal.run_active(cfal.World.fixture("consistency"), m=100, n=200, seed=7)
    again = cfal.run_active(cfal.World.fixture("consistency"), m=100, n=200, seed=7)
    assert rec.json == again.json
    assert rec.total_queries <= 200
    assert json.loads(rec.json)["output"] == rec.output

    try:
        cfal.run_active(world, m=10, n=10, seed=0, ablate=["warp"])
    except ValueError:
        pass
    else:
        raise AssertionError("unknown ablation accepted")

    config = json.dumps({
        "mode": "exact", "fixture": {"name": "table1"}, "algorithm": "vc_active",
        "gamma1": [1, 4], "m": 40, "n": 30, "trials": 2, "seed": 3,
    })
    csv = cfal.run_experiment(config)
    assert csv.startswith("algorithm,params,trial,labels_used,test_error")
    best, auc, table = cfal.sweep(config)
    assert best.startswith("gamma1=") and auc > 0 and table.count("true") == 1

    ok, report = cfal.verify("decomposability")
    assert ok, report
    print("python smoke test passed")


if __name__ == "__main__":
    main()
