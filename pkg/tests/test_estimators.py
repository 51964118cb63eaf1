import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from mfwidth import MFDFA, WidthKMeans, WidthRangeClassifier
from mfwidth.classify import TABLE1
from mfwidth.mfdfa import mfdfa
from mfwidth.synth import gen_white_noise


@pytest.fixture(scope="module")
def signals():
    return np.vstack([gen_white_noise(4096, s) for s in range(3)])


def test_params_round_trip():
    est = MFDFA(order=2, q=[-2, 0, 2], segmentation="forward-only")
    params = est.get_params()
    assert params["order"] == 2 and params["segmentation"] == "forward-only"
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(order=1)
    assert est.order == 1


def test_fit_transform_matches_function(signals):
    est = MFDFA().fit(signals)
    feats = est.transform(signals)
    assert feats.shape == (3, 4)
    direct = mfdfa(signals[0], est.config_)
    assert feats[0, 0] == direct.width
    np.testing.assert_array_equal(est.fit_transform(signals), feats)
    np.testing.assert_array_equal(est.width_, feats[:, 0])
    assert est.hurst_.shape == (3, 41)
    assert list(est.get_feature_names_out()) == ["width", "alpha0", "asymmetry", "hurst"]


def test_single_signal_and_ragged_input():
    x = gen_white_noise(3000, 1)
    est = MFDFA().fit(x)
    assert est.width_.shape == (1,)
    est.fit([x, gen_white_noise(5000, 2)])
    assert est.scales_[-1] <= 3000 // 4


def test_unfitted_transform_raises(signals):
    with pytest.raises(NotFittedError):
        MFDFA().transform(signals)


def test_pipeline_composition(signals):
    pipe = make_pipeline(MFDFA(), FunctionTransformer(lambda f: f[:, :1]), WidthKMeans(n_clusters=2))
    labels = pipe.fit_predict(signals)
    assert labels.shape == (3,)


def test_width_kmeans_on_table1():
    widths = np.array([w for *_, w in TABLE1])[:, None]
    km = WidthKMeans(n_clusters=5).fit(widths)
    assert km.cluster_centers_.shape == (5, 1)
    np.testing.assert_array_equal(km.predict(widths), km.labels_)
    assert np.all(np.diff(km.cluster_centers_[:, 0]) > 0)
    lloyd = WidthKMeans(n_clusters=5, method="lloyd").fit(widths)
    assert lloyd.inertia_ >= km.inertia_
    with pytest.raises(ValueError):
        WidthKMeans(method="bogus").fit(widths)


def test_range_classifier():
    clf = WidthRangeClassifier().fit([[0.5]])
    np.testing.assert_array_equal(clf.predict([0.43, 0.52, 0.88]), ["plucked", "struck", "bowed"])
    assert [c.group for c in clf.candidates([0.82])[0]] == [3, 4]
    assert clf.score([0.43, 0.52], ["plucked", "struck"]) == 1.0
