import json
import math

import pytest

import netpred


def test_formulas():
    r, degenerate = netpred.pearson_correlation([1, 2, 3, 4], [2, 4, 6, 8])
    assert r == pytest.approx(1.0) and not degenerate
    assert netpred.pearson_correlation([1, 1, 1], [1, 2, 3]) == (0.0, True)
    assert netpred.combine_edge_weight(0.5, 0.1, 0.7) == pytest.approx(0.22)
    assert netpred.influence_from_accuracies(0.5, 0.6, 0.6, 0.7) == pytest.approx(0.1)
    assert netpred.rbf_similarity([0, 0], [1, 1], 0.5) == pytest.approx(math.exp(-1.0))
    assert netpred.macro_f1([1, 1, -1, -1], [1, 1, -1, -1]) == pytest.approx(1.0)
    assert netpred.adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)


def test_bad_movement_rejected():
    with pytest.raises(netpred.InputError):
        netpred.macro_f1([0], [1])


@pytest.fixture(scope="module")
def market(tmp_path_factory):
    root = tmp_path_factory.mktemp("market")
    truth = netpred.synthesize(root / "data", n_indices=2, stocks_per_index=8, n_clusters=2, days=170, seed=9)
    config = {
        "bars": "data/bars.csv",
        "manifest": "data/manifest.json",
        "train_len": 100,
        "validation_len": 20,
        "k_clusters": 2,
        "k_neighbors": 3,
        "constituents_per_index": 0,
        "threads": 1,
        "include_timings": False,
        "forest": {"n_trees": 20},
        "test_days": 3,
    }
    path = root / "run.json"
    path.write_text(json.dumps(config))
    return path, truth


def test_pipeline(market):
    path, truth = market
    assert set(truth) >= {"stock_cluster"}
    graph = netpred.build_graph(path, "2020-08-12")
    assert graph["stock_stock_edges"]
    result = netpred.forecast(path, "2020-08-12")
    assert set(result["index_labels"]) == {"IDX0", "IDX1"}
    report = netpred.evaluate(path)
    assert report == netpred.evaluate(path)
    assert "macro_f1" in json.dumps(report)
    rows = netpred.sweep_lambda(path, [0.3, 0.7])
    assert [row["lambda"] for row in rows] == [0.3, 0.7]
    ablated = netpred.ablate(path, "random_seed_selection")
    assert "random_seed_selection" in json.dumps(ablated)


def test_errors(market):
    path, _ = market
    with pytest.raises(netpred.NetpredError):
        netpred.forecast(path, "2020-01-15")
    with pytest.raises(netpred.NetpredError):
        netpred.ablate(path, "graph_pooling")
