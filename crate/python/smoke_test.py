"""Smoke test for the graphgi extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import json
import math
import tempfile

import graphgi


def games():
    players = [0, 1, 2]
    and_game = lambda c: float(len(set(c) & {1, 2}) == 2)
    phi = dict(graphgi.exact_shapley(and_game, players))
    assert phi[0] == 0.0 and math.isclose(phi[1], 0.5) and math.isclose(phi[2], 0.5), phi
    assert math.isclose(graphgi.interaction_exact(and_game, [1, 2], players), 1.0)

    est = graphgi.mc_shapley(lambda c: float(len(c)), [2], players, samples=50, seed=1)
    assert math.isclose(est, 1.0), est
    s = graphgi.strength_mc(lambda c: 2.0 * len(c), [0, 1], players, samples=50)
    assert s["strength"] < 1e-12 and s["samples"] == 50, s
    p = graphgi.strength_partition_exact(and_game, [1, 2], players)
    assert p["positive_sum"] >= 0.0 >= p["negative_sum"]

    def broken(c):
        raise RuntimeError("boom")

    try:
        graphgi.exact_shapley(broken, players)
    except RuntimeError as e:
        assert "boom" in str(e)
    else:
        raise AssertionError("callback error was swallowed")


def pipeline():
    data = graphgi.Dataset.generate("tree-cycle", seed=0)
    assert data.num_nodes == 871, data
    with tempfile.TemporaryDirectory() as d:
        data.save(d)
        again = graphgi.Dataset.load(d)
        assert again.edges == data.edges and again.labels == data.labels

    model = graphgi.Model.train(data, arch="gcn", epochs=300, seed=0)
    train_acc, test_acc = model.accuracy(data)
    print(f"gcn on tree-cycle: train {train_acc:.3f}, test {test_acc:.3f}")

    targets = data.test_nodes()[:3]
    xs = graphgi.explain(model, data, targets, max_edges=6, shapley_samples=30, interaction_samples=30)
    rs = graphgi.explain(model, data, targets, method="random", budget=4)
    for x in xs:
        assert 1 <= len(x) <= 6 and x.method == "graphgi"
        assert len(x.trace) == len(x) and x.edges[0] == data.edges[x.edge_ids[0]]
        assert x.predicted_class == model.predict(data, x.target)[0]
        back = graphgi.Explanation.from_json(x.to_json(), data)
        assert back.to_json() == x.to_json()
        assert x.to_dot(data).startswith("graph explanation {")
        print(x)
    assert all(len(r) <= 4 for r in rs)

    report = graphgi.evaluate(model, data, xs + rs, sparsity_levels=[0.8, 0.9])
    rows = {m["method"]: m for m in report["methods"]}
    assert set(rows) == {"graphgi", "random"}
    assert len(rows["graphgi"]["curve"]) == 2
    print(json.dumps({k: round(v["fidelity"]["mean"], 4) for k, v in rows.items()}))

    try:
        graphgi.Dataset.generate("cora")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown dataset accepted")


if __name__ == "__main__":
    games()
    pipeline()
    print("smoke test passed")
