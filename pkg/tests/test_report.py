import random
from dataclasses import dataclass, field

import numpy as np
import pytest

from nectarml.classifier import Hyperparams, LearnerKind, ModelEnsemble, TreeNode
from nectarml.objectives import Objective
from nectarml.report import (
    ComparisonCell,
    RunManifest,
    compare_selectors,
    comparison_table,
    format_cell,
    render_compare_heatmap,
    render_ig_bars,
    threshold_pick,
    write_table,
)


@dataclass
class RRow:
    id: str
    features: np.ndarray
    label: Objective
    weight: float
    lfr: dict = field(default_factory=dict)


def f0_model():
    # feature 0 <= 0.5 picks the modularity objective, otherwise closure
    tree = [
        TreeNode(node_id=0, feature=0, threshold=0.5, left=1, right=2),
        TreeNode(node_id=1, p_qe=1.0, p_wocc=0.0),
        TreeNode(node_id=2, p_qe=0.0, p_wocc=1.0),
    ]
    return ModelEnsemble(
        metric="average",
        learner_kind=LearnerKind.EXTRA_TREES,
        hyperparams=Hyperparams(),
        trees=[list(tree) for _ in range(100)],
        train_fingerprint="0" * 64,
    )


TAGS = {"k": 10.0, "On": 0.1, "Om": 2.0, "mut": 0.1}


def test_manifest_header_lines_are_stable():
    m1 = RunManifest.build("detect", [("graph", "a.edges"), ("beta", 1.05), ("seed", 7)])
    m2 = RunManifest.build("detect", [("graph", "a.edges"), ("beta", 1.05), ("seed", 7)])
    assert m1.header_lines() == m2.header_lines()
    lines = m1.header_lines()
    assert lines[0].startswith("run nectarml ")
    assert lines[0].endswith(" detect")
    assert lines[1:] == ["arg graph=a.edges", "arg beta=1.05", "arg seed=7"]


def test_write_table_csv_and_tsv(tmp_path):
    rows = [["net1", 3, 0.123456789, True]]
    p = tmp_path / "t.csv"
    write_table(p, ("id", "n", "score", "flag"), rows, header_lines=["run x"])
    assert p.read_text() == "# run x\nid,n,score,flag\nnet1,3,0.123457,True\n"
    p2 = tmp_path / "t.tsv"
    write_table(p2, ("id", "n", "score", "flag"), rows, fmt="tsv")
    assert p2.read_text() == "id\tn\tscore\tflag\nnet1\t3\t0.123457\tTrue\n"


def test_write_table_rejects_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        write_table(tmp_path / "x", ("a",), [], fmt="psv")


def test_format_cell():
    assert format_cell(0.2 / 3) == "0.066667"
    assert format_cell(3) == "3"
    assert format_cell("x") == "x"
    assert format_cell(True) == "True"


def test_threshold_pick_boundary():
    feats = np.array([0, 0, 0, 0, 5.0])
    assert threshold_pick(feats, 5.0) is Objective.WOCC  # rate at threshold counts
    feats[4] = 4.999
    assert threshold_pick(feats, 5.0) is Objective.QE


def test_compare_fixture_value():
    rows = [
        # model right, rule wrong: counts +0.3
        RRow("a", np.array([0.9, 0, 0, 0, 1.0]), Objective.WOCC, 0.3, dict(TAGS)),
        # rule right, model wrong: counts -0.1
        RRow("b", np.array([0.9, 0, 0, 0, 1.0]), Objective.QE, 0.1, dict(TAGS)),
        # both right: counts zero regardless of weight
        RRow("c", np.array([0.1, 0, 0, 0, 1.0]), Objective.QE, 0.9, dict(TAGS)),
    ]
    cells = compare_selectors(rows, f0_model(), tr_rate=5.0)
    assert len(cells) == 1
    cell = cells[0]
    assert cell.key == (10.0, 0.1, 2.0, 0.1)
    assert cell.n_networks == 3
    assert cell.ml_only == 1 and cell.nectar_only == 1
    assert cell.value == pytest.approx(0.2 / 3, abs=1e-12)


def test_compare_both_wrong_counts_zero():
    rows = [
        # label closure, rate below threshold, feature 0 low: both pick QE
        RRow("a", np.array([0.1, 0, 0, 0, 1.0]), Objective.WOCC, 1.0, dict(TAGS)),
    ]
    (cell,) = compare_selectors(rows, f0_model())
    assert cell.value == 0.0 and cell.ml_only == 0 and cell.nectar_only == 0


def test_compare_catch_all_cell_last():
    rows = [
        RRow("a", np.array([0.9, 0, 0, 0, 1.0]), Objective.WOCC, 0.5, dict(TAGS)),
        RRow("b", np.array([0.9, 0, 0, 0, 1.0]), Objective.WOCC, 0.5, {"k": 10.0}),
        RRow("c", np.array([0.9, 0, 0, 0, 1.0]), Objective.WOCC, 0.5, {}),
    ]
    cells = compare_selectors(rows, f0_model())
    assert len(cells) == 2
    assert cells[0].key == (10.0, 0.1, 2.0, 0.1)
    assert cells[-1].key is None
    assert cells[-1].n_networks == 2  # partial tags pool with untagged


def test_compare_cells_grouped_and_sorted():
    tag_a = {"k": 10.0, "On": 0.1, "Om": 2.0, "mut": 0.1}
    tag_b = {"k": 10.0, "On": 0.1, "Om": 4.0, "mut": 0.1}
    rows = [
        RRow("b1", np.array([0.9, 0, 0, 0, 1.0]), Objective.WOCC, 0.4, tag_b),
        RRow("a1", np.array([0.9, 0, 0, 0, 1.0]), Objective.WOCC, 0.2, tag_a),
    ]
    cells = compare_selectors(rows, f0_model())
    assert [c.key[2] for c in cells] == [2.0, 4.0]
    assert cells[0].value == pytest.approx(0.2)
    assert cells[1].value == pytest.approx(0.4)


def test_compare_values_bounded():
    rng = random.Random(3)
    rows = []
    for i in range(120):
        tags = dict(TAGS) if rng.random() < 0.8 else {}
        if rng.random() < 0.5:
            tags = {"k": 10.0, "On": 0.1, "Om": float(rng.choice([2, 4])), "mut": 0.3} if tags else {}
        rows.append(RRow(
            f"r{i}",
            np.array([rng.random(), 0, 0, 0, rng.uniform(0, 10)]),
            rng.choice([Objective.QE, Objective.WOCC]),
            rng.random(),
            tags,
        ))
    for cell in compare_selectors(rows, f0_model()):
        assert -1.0 <= cell.value <= 1.0


def test_comparison_table_rows(tmp_path):
    cells = [
        ComparisonCell(key=(10.0, 0.1, 2.0, 0.1), n_networks=3, ml_only=1, nectar_only=1, value=0.2 / 3),
        ComparisonCell(key=None, n_networks=1, ml_only=0, nectar_only=0, value=0.0),
    ]
    columns, rows = comparison_table(cells)
    assert columns == ("k", "On", "Om", "mut", "networks", "ml_only", "nectar_only", "value")
    assert rows[0][:4] == ["10.000000", "0.100000", "2.000000", "0.100000"]
    assert rows[1][:4] == ["*", "*", "*", "*"]
    p = tmp_path / "cmp.csv"
    write_table(p, columns, rows)
    body = p.read_text().splitlines()
    assert body[1].endswith(",0.066667")
    assert body[2] == "*,*,*,*,1,0,0,0.000000"


def test_render_heatmap_deterministic(tmp_path):
    cells = [
        ComparisonCell(key=(10.0, 0.1, 2.0, 0.1), n_networks=3, ml_only=1, nectar_only=1, value=0.07),
        ComparisonCell(key=(10.0, 0.25, 4.0, 0.3), n_networks=2, ml_only=0, nectar_only=1, value=-0.4),
        ComparisonCell(key=None, n_networks=1, ml_only=0, nectar_only=0, value=0.0),
    ]
    p1, p2 = tmp_path / "h1.png", tmp_path / "h2.png"
    render_compare_heatmap(p1, cells)
    render_compare_heatmap(p2, cells)
    data = p1.read_bytes()
    assert data[:4] == b"\x89PNG"
    assert data == p2.read_bytes()


def test_render_ig_bars_deterministic(tmp_path):
    gains = {"gcc": 0.2, "acc": 0.05, "ratio_nodes_in_triangle": 0.4,
             "avg_degree": 0.01, "avg_triangles_rate": 0.33}
    p1, p2 = tmp_path / "g1.png", tmp_path / "g2.png"
    render_ig_bars(p1, gains)
    render_ig_bars(p2, gains)
    data = p1.read_bytes()
    assert data[:4] == b"\x89PNG"
    assert data == p2.read_bytes()
