import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfwidth.classify import (
    DEFAULT_RANGES,
    MODES,
    TABLE1,
    TABLE2_PERCENT,
    ConfusionMatrix,
    GroupRange,
    WidthRecord,
    assign_mode,
    cluster_widths,
    confusion_matrix,
    group_report,
    kmeans_1d,
    load_ranges,
    optimal_kmeans_1d,
    table1_records,
)


def brute_force_partition(values, k):
    """Minimum within-cluster sum of squares over every contiguous split of
    the sorted values. Returns the groups as sorted tuples."""
    xs = sorted(values)
    n = len(xs)
    best = None
    for cuts in itertools.combinations(range(1, n), k - 1):
        edges = (0, *cuts, n)
        parts = [xs[edges[i] : edges[i + 1]] for i in range(k)]
        cost = sum(sum((v - sum(p) / len(p)) ** 2 for v in p) for p in parts)
        if best is None or cost < best[0] - 1e-15:
            best = (cost, [tuple(p) for p in parts])
    return best


def _groups(values, labels):
    return sorted(tuple(sorted(np.asarray(values)[labels == g])) for g in np.unique(labels))


# -- clustering ---------------------------------------------------------------------


def test_single_cluster_is_the_mean():
    res = cluster_widths([WidthRecord("a", "plucked", w) for w in (0.2, 0.4, 0.9)], 1)
    assert res.centroids[0] == pytest.approx(0.5)
    assert set(res.labels) == {0}


@pytest.mark.parametrize("method", ["optimal", "lloyd"])
def test_k_equals_n_gives_singletons(method):
    recs = [WidthRecord(str(i), "unknown", w) for i, w in enumerate((0.9, 0.1, 0.5, 0.3))]
    res = cluster_widths(recs, 4, method)
    assert len(set(res.labels)) == 4
    np.testing.assert_allclose(res.centroids, [0.1, 0.3, 0.5, 0.9])


def test_fewer_distinct_values_than_k():
    with pytest.raises(ValueError, match="fewer distinct values than k"):
        optimal_kmeans_1d([0.5, 0.5, 0.7], 3)
    with pytest.raises(ValueError, match="fewer distinct values than k"):
        kmeans_1d([0.5, 0.5, 0.7], 3)


def test_table1_matches_brute_force_optimum():
    widths = [w for *_, w in TABLE1]
    res = optimal_kmeans_1d(widths, 5)
    cost, groups = brute_force_partition(widths, 5)
    assert res.inertia == pytest.approx(cost, rel=1e-9)
    assert _groups(widths, res.labels) == sorted(groups)


def test_lloyd_is_a_fixpoint_on_table1():
    # quantile-started Lloyd converges, but to a worse local optimum than the exact split
    widths = np.array([w for *_, w in TABLE1])
    lloyd = kmeans_1d(widths, 5)
    exact = optimal_kmeans_1d(widths, 5)
    assert lloyd.inertia >= exact.inertia
    again = np.argmin(np.abs(widths[:, None] - lloyd.centroids[None, :]), axis=1)
    np.testing.assert_array_equal(again, lloyd.labels)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 2.0), min_size=2, max_size=9, unique=True), st.integers(1, 4), st.randoms())
def test_exact_clustering_properties(values, k, rnd):
    k = min(k, len(values))
    res = optimal_kmeans_1d(values, k)
    cost, groups = brute_force_partition(values, k)
    assert res.inertia == pytest.approx(cost, rel=1e-9, abs=1e-12)

    # contiguous in sorted order
    order = np.argsort(values)
    lab = res.labels[order]
    assert np.all(np.diff(lab) >= 0)

    # permutation invariance
    perm = list(values)
    rnd.shuffle(perm)
    assert _groups(perm, optimal_kmeans_1d(perm, k).labels) == _groups(values, res.labels)

    # positive rescaling
    scaled = optimal_kmeans_1d([3.0 * v for v in values], k)
    np.testing.assert_array_equal(scaled.labels, res.labels)
    np.testing.assert_allclose(scaled.centroids, 3.0 * res.centroids, rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 2.0), min_size=2, max_size=12, unique=True), st.integers(1, 4), st.randoms())
def test_lloyd_properties(values, k, rnd):
    k = min(k, len(values))
    res = kmeans_1d(values, k)
    lab = res.labels[np.argsort(values)]
    assert np.all(np.diff(lab) >= 0)
    perm = list(values)
    rnd.shuffle(perm)
    assert _groups(perm, kmeans_1d(perm, k).labels) == _groups(values, res.labels)


# -- range lookup -------------------------------------------------------------------


def test_struck_range():
    cands = assign_mode(0.52)
    assert [(c.group, c.mode) for c in cands] == [(5, "struck")]


def test_plucked_sitar_range():
    assert [(c.group, c.mode) for c in assign_mode(0.43)] == [(2, "plucked")]


def test_overlap_gives_two_ranked_candidates():
    cands = assign_mode(0.82)
    assert [(c.group, c.mode) for c in cands] == [(3, "plucked"), (4, "bowed")]
    assert cands[0].distance < cands[1].distance


def test_out_of_range_flagged():
    cands = assign_mode(1.4)
    assert len(cands) == 1 and not cands[0].in_range and cands[0].group == 4


@settings(max_examples=100)
@given(st.floats(0.35, 0.90))
def test_inside_union_is_never_empty(w):
    cands = assign_mode(w)
    assert cands
    inside = any(g.lo <= w <= g.hi for g in DEFAULT_RANGES)
    assert all(c.in_range for c in cands) == inside


def test_range_validation_and_loading(tmp_path):
    with pytest.raises(ValueError):
        GroupRange(1, "plucked", 0.5, 0.5)
    p = tmp_path / "r.json"
    p.write_text(json.dumps({"groups": [{"group": 1, "mode": "Bowed", "lo": 0.1, "hi": 0.2}]}))
    assert load_ranges(p) == (GroupRange(1, "bowed", 0.1, 0.2),)


# -- confusion matrix -----------------------------------------------------------------


def _responses(counts):
    out = []
    for i, t in enumerate(MODES):
        for j, p in enumerate(MODES):
            out += [("L", "inst", t, p)] * counts[i][j]
    return out


def test_confusion_arithmetic():
    cm = confusion_matrix(_responses([[3, 1, 0], [0, 4, 0], [0, 0, 4]]))
    np.testing.assert_array_equal(cm.counts, [[3, 1, 0], [0, 4, 0], [0, 0, 4]])
    np.testing.assert_allclose(cm.percentages, [[75, 25, 0], [0, 100, 0], [0, 0, 100]])


def test_single_response():
    cm = confusion_matrix([("1", "Harp", "plucked", "struck")])
    assert cm.percentages[0, 1] == 100.0
    assert cm.empty_rows == ["struck", "bowed"]
    assert np.isnan(cm.percentages[1]).all()


def test_unknown_mode_rejected():
    with pytest.raises(ValueError, match="unknown mode"):
        confusion_matrix([("1", "Harp", "plucked", "blown")])


def test_table2_rendering():
    text = ConfusionMatrix.from_percentages(TABLE2_PERCENT).render()
    lines = text.splitlines()
    assert lines[0].split() == ["Plucked", "(%)", "Struck", "(%)", "Bowed", "(%)"]
    assert lines[1].split() == ["Plucked", "73.14", "23.14", "3.71"]
    assert lines[2].split() == ["Struck", "22", "78", "0"]
    assert lines[3].split() == ["Bowed", "4", "1", "95"]


@settings(max_examples=100)
@given(st.lists(st.lists(st.integers(0, 50), min_size=3, max_size=3), min_size=3, max_size=3))
def test_row_sums(counts):
    cm = confusion_matrix(_responses(counts))
    for row, c in zip(cm.percentages, counts):
        if sum(c):
            assert 99.95 <= row.sum() <= 100.05
        else:
            assert np.isnan(row).all()


# -- report -------------------------------------------------------------------------------


def test_empty_report():
    rep = group_report([], [])
    assert rep == {"groups": [], "records": [], "plot": []}


def test_single_record_report():
    rec = [WidthRecord("Piano", "struck", 0.531)]
    rep = group_report(rec, cluster_widths(rec, 1).labels)
    assert len(rep["groups"]) == 1 and rep["groups"][0]["instruments"] == ["Piano"]
    assert rep["plot"] == [("Piano", 0.531, 1)]
    assert rep["records"][0]["candidates"][0]["mode"] == "struck"


def test_table1_report_structure():
    recs = table1_records()
    rep = group_report(recs, cluster_widths(recs, 5).labels)
    assert len(rep["groups"]) == 5
    assert sum(len(g["instruments"]) for g in rep["groups"]) == 26
    los = [g["lo"] for g in rep["groups"]]
    assert los == sorted(los)
