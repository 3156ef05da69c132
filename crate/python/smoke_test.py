"""Smoke test for the pysampmodel extension module.

Build and run from the repository root:

    cargo build --release -p pysampmodel
    cp target/release/libpysampmodel.so python/pysampmodel.so
    python3 python/smoke_test.py
"""

import json
import math
import pathlib

import pysampmodel as sm

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    s = sm.Sample([2.0, 4.0], [[0.0], [1.0]], [1.0, 3.0])
    assert close(sm.hajek_mean(s)["value"][0], 3.5)
    assert close(sm.hajek_mean(s.rescaled(40.0))["value"][0], 3.5)
    assert close(sm.sample_mean(s)["value"][0], 3.0)

    try:
        sm.Sample([1.0], [[0.0]], [1.0, 2.0])
    except ValueError:
        pass
    else:
        raise AssertionError("mismatched columns accepted")

    exact = sm.exact_identities([0.0, 1.0], [[0.0]], [[0.5], [0.5]], [[0.2], [0.4]])
    assert close(exact["sample_pdf"]["p"][0][0], 1.0 / 3.0)
    assert close(exact["sample_pdf"]["p"][1][0], 2.0 / 3.0)
    assert not exact["ignorable"]

    cfg = json.loads((CONFIGS / "reference_discrete.json").read_text())
    pop = sm.generate_population(json.dumps(cfg["population"]), 5000, 1)
    assert len(pop) == 5000 and sum(pop.cell_sizes) == 5000
    design = {k: v for k, v in cfg["design"].items() if k != "kind"}
    design["target_n"] = 500
    sample = sm.draw_respondents(pop, json.dumps(design), 2)
    bw = sm.weighted_regression_bw(sample)
    bq = sm.q_weighted_regression_bq(sample, "log-linear", "saturated")
    assert len(bw["value"]) == 2 and len(bq["value"]) == 2
    total = sm.predict_total(pop, sample)["value"][0]
    assert abs(total - pop.total()) / abs(pop.total()) < 0.05

    cfg["replications"] = 20
    rows = sm.run_experiment(json.dumps(cfg))
    hajek = next(r for r in rows if r["estimator"] == "hajek")
    assert hajek["successes"] == 20 and math.isfinite(hajek["bias"])

    print("smoke test passed")


if __name__ == "__main__":
    main()
