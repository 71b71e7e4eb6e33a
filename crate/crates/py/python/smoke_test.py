"""Smoke test for the compiled `psofl` module.

Build the extension first, for example with `maturin develop` in crates/py,
or point PYTHONPATH at a directory holding the built `psofl` shared library.
"""

import json
import os
import tempfile

import psofl


def main():
    bounds = psofl.SearchBounds()
    assert bounds.size() == 5 * 200 * 50

    best = psofl.ModelConfig(3, 100, 25)
    assert psofl.quadratic_surrogate(best) == 0.0
    assert best.as_tuple() == (3, 100, 25)

    pso = psofl.pso_search(psofl.quadratic_surrogate, bounds, seed=1)
    again = psofl.pso_search(psofl.quadratic_surrogate, bounds, seed=1)
    assert pso.evaluations == again.evaluations
    assert pso.total_rounds == pso.distinct_configs * 15
    assert pso.distinct_configs <= 5 * 11
    print("pso ", pso)

    grid = psofl.grid_search(psofl.quadratic_surrogate, [1, 2, 3], [50, 100], [20, 25])
    assert grid.best_config == best
    assert grid.total_rounds == 12 * 15
    print("grid", grid)

    mean, lo, hi = psofl.confidence_interval_95([1.0, 2.0, 3.0, 4.0, 5.0])
    assert abs(mean - 3.0) < 1e-12 and lo < mean < hi

    def boom(cfg):
        raise KeyError(cfg.layers)

    try:
        psofl.pso_search(boom, seed=0)
    except KeyError:
        pass
    else:
        raise AssertionError("fitness exception was swallowed")

    data = psofl.Dataset.traffic(seed=0, n_clients=2, rows_per_client=80, lookback=6)
    rmse = psofl.run_fl(data, psofl.ModelConfig(1, 4, 1), comm_rounds=2)
    assert rmse >= 0.0
    print("data", data, "rmse", round(rmse, 4))

    config = """
use_case = "traffic"
method = "both"
surrogate = true
[fl]
comm_rounds = 3
[grid]
layers = [2, 3]
neurons = [100]
epochs = [25]
"""
    assert psofl.validate_config(config) == []
    assert psofl.validate_config("[pso]\npop = 0\n") == ["pso.pop: pop_size must be ≥ 1"]
    with tempfile.TemporaryDirectory() as out:
        lines = psofl.run_experiment(config, seed=2, out=out)
        assert len(lines) == 2, lines
        with open(os.path.join(out, "comparison.json")) as f:
            assert json.load(f)["grid_total_rounds"] == 6
    print("ok")


if __name__ == "__main__":
    main()
