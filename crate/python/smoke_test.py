"""Smoke test for the cosy_py extension: simulate, solve, evaluate."""

import json
import math

import cosy_py


def main():
    models = cosy_py.Models.builtin()
    assert len(models) == 10
    assert models.group_size("can") == 128
    assert models.group_size("mug") == 1

    r = cosy_py.rotation_from_6d([2.0, 0.0, 0.0], [1.0, 3.0, 0.0])
    assert r == [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], r
    assert cosy_py.add_s_auc([0.05]) == 0.5

    eye = [[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 1.0, 0], [0, 0, 0, 1.0]]
    half_turn = [[-1.0, 0, 0, 0], [0, -1.0, 0, 0], [0, 0, 1.0, 0], [0, 0, 0, 1.0]]
    # a half turn about the axis of a cylinder is invisible
    assert cosy_py.symmetric_distance(models, "can", half_turn, eye) < 1e-12
    assert cosy_py.symmetric_distance(models, "drill", half_turn, eye) > 0.01

    obs, gt_json = cosy_py.simulate(models, seed=3, rot_sigma=0.0, trans_sigma=0.0, miss_prob=0.0, outlier_prob=0.0)
    gt = json.loads(gt_json)
    assert len(obs) == len(gt["provenance"])
    again = cosy_py.Observations.from_json(obs.to_json(), models)
    assert again.to_json() == obs.to_json()

    sol = cosy_py.solve(models, obs, seed=3)
    assert sol.final_loss < 1e-6, sol.final_loss
    assert len(sol.cameras()) == len(gt["views"])
    metrics = cosy_py.evaluate(models, sol.to_json(), gt_json)
    assert metrics["adds"] < 1e-6 and math.isclose(metrics["recall_0p1d"], 1.0), metrics

    try:
        cosy_py.Models.from_json("{}")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed models accepted")

    print(f"ok: {len(sol.objects())} objects, loss {sol.initial_loss:.3g} -> {sol.final_loss:.3g}, metrics {metrics}")


if __name__ == "__main__":
    main()
