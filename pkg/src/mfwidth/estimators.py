"""scikit-learn compatible wrappers around the functional API."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_signals
from .classify import DEFAULT_RANGES, MODES, assign_mode, kmeans_1d, optimal_kmeans_1d
from .mfdfa import DEFAULT_Q, DEFAULT_VARIANCE_FLOOR, MfdfaConfig, default_scales, mfdfa

FEATURES = ("width", "alpha0", "asymmetry", "hurst")


class MFDFA(TransformerMixin, BaseEstimator):
    """Maps each signal to its singularity-spectrum summary.

    ``fit`` resolves the scale grid (from the shortest signal when
    ``scales`` is None) and analyzes the training signals; ``transform``
    reuses that grid on new signals and returns one row per signal with
    columns ``width, alpha0, asymmetry (B), hurst (h at q=2)``.

    X may be one 1-D signal, a 2-D array with one signal per row, or a
    list of 1-D arrays of different lengths.
    """

    def __init__(self, scales=None, q=None, order=1, segmentation="both-ends",
                 variance_floor=DEFAULT_VARIANCE_FLOOR, fit_threshold=None, n_jobs=1):
        self.scales = scales
        self.q = q
        self.order = order
        self.segmentation = segmentation
        self.variance_floor = variance_floor
        self.fit_threshold = fit_threshold
        self.n_jobs = n_jobs

    def _config(self, scales):
        return MfdfaConfig(
            scales=tuple(int(s) for s in scales),
            q_grid=tuple(DEFAULT_Q if self.q is None else self.q),
            detrend_order=self.order,
            segmentation=self.segmentation,
            variance_floor=self.variance_floor,
            fit_threshold=self.fit_threshold,
        )

    def fit(self, X, y=None):
        signals = check_signals(X)
        n_min = min(s.size for s in signals)
        scales = default_scales(n_min) if self.scales is None else self.scales
        self.config_ = self._config(scales)
        self.scales_ = np.asarray(self.config_.scales)
        self.q_ = np.asarray(self.config_.q_grid)
        self.results_ = [mfdfa(s, self.config_, n_jobs=self.n_jobs) for s in signals]
        self.hurst_ = np.vstack([r.hurst.h for r in self.results_])
        self.width_ = np.array([r.width for r in self.results_])
        self.n_features_in_ = 1
        return self

    def _summary(self, result):
        q2 = np.flatnonzero(np.isclose(self.q_, 2.0))
        h2 = result.hurst.h[q2[0]] if q2.size else np.nan
        sp = result.spectrum
        return [sp.width, sp.alpha0, sp.coeff_B, h2]

    def transform(self, X):
        check_is_fitted(self, "config_")
        return np.array([self._summary(mfdfa(s, self.config_, n_jobs=self.n_jobs)) for s in check_signals(X)])

    def fit_transform(self, X, y=None, **fit_params):
        self.fit(X, y)
        return np.array([self._summary(r) for r in self.results_])

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURES, dtype=object)


def _widths(X):
    x = np.asarray(X, dtype=np.float64)
    if x.ndim == 2 and x.shape[1] == 1:
        x = x[:, 0]
    if x.ndim != 1:
        raise ValueError("expected widths as a 1-D array or a single column")
    return x


class WidthKMeans(ClusterMixin, BaseEstimator):
    """Deterministic 1-D k-means on spectral widths.

    ``method="optimal"`` finds the exact minimum-inertia partition;
    ``"lloyd"`` iterates from quantile-placed centroids. Cluster labels
    follow ascending centroid order.
    """

    def __init__(self, n_clusters=5, method="optimal", max_iter=300):
        self.n_clusters = n_clusters
        self.method = method
        self.max_iter = max_iter

    def fit(self, X, y=None):
        if self.method == "optimal":
            res = optimal_kmeans_1d(_widths(X), self.n_clusters)
        elif self.method == "lloyd":
            res = kmeans_1d(_widths(X), self.n_clusters, self.max_iter)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.labels_ = res.labels
        self.cluster_centers_ = res.centroids[:, None]
        self.inertia_ = res.inertia
        self.n_iter_ = res.n_iter
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        x = _widths(X)
        return np.argmin(np.abs(x[:, None] - self.cluster_centers_[:, 0][None, :]), axis=1)


class WidthRangeClassifier(ClassifierMixin, BaseEstimator):
    """Predicts the playing mode whose width range best matches.

    Nothing is learned; ``fit`` only records the class labels so the object
    composes with pipelines and scoring helpers.
    """

    def __init__(self, ranges=DEFAULT_RANGES):
        self.ranges = ranges

    def fit(self, X, y=None):
        self.classes_ = np.asarray(MODES, dtype=object)
        return self

    def predict(self, X):
        check_is_fitted(self, "classes_")
        return np.array([assign_mode(w, self.ranges)[0].mode for w in _widths(X)], dtype=object)

    def candidates(self, X):
        return [assign_mode(w, self.ranges) for w in _widths(X)]
