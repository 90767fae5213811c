"""Scikit-learn estimator wrappers around the threshold classifier.

RandomnessFeaturizer turns byte payloads into the (chi statistic, chi
confidence, NIST fail count) feature matrix; EncryptedTrafficClassifier
fits the chi window on the encrypted training subset only, mirroring the
library-level train/classify pair, and predicts string labels.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import classifier as core
from .bitstream import from_bytes
from .classifier import COMPRESSED, ENCRYPTED, FeatureVector
from .randtests import TestConfig, run_all


def _payloads(X) -> list:
    if isinstance(X, (bytes, bytearray, memoryview)):
        raise TypeError("X must be a sequence of payloads, not a single byte string")
    return [from_bytes(x) for x in X]


class RandomnessFeaturizer(TransformerMixin, BaseEstimator):
    """Stateless transformer: payload bytes -> (n_samples, 3) float array of
    chi statistic, chi confidence percent, and NIST fail count."""

    def __init__(self, alpha: float = 0.01, block_frequency_m: int = 128, apen_m: int = 2):
        self.alpha = alpha
        self.block_frequency_m = block_frequency_m
        self.apen_m = apen_m

    def _config(self) -> TestConfig:
        return TestConfig(self.alpha, self.block_frequency_m, self.apen_m)

    def fit(self, X, y=None):
        self._config()
        self.n_features_in_ = 3
        return self

    def transform(self, X) -> np.ndarray:
        cfg = self._config()
        rows = []
        for s in _payloads(X):
            fv = core.extract_features(run_all(s, cfg))
            rows.append((fv.chi_abs, fv.chi_conf_pct, float(fv.nist_fails)))
        return np.array(rows, dtype=float).reshape(-1, 3)

    def get_feature_names_out(self, input_features=None):
        return np.array(["chi_abs", "chi_conf_pct", "nist_fails"], dtype=object)


class EncryptedTrafficClassifier(ClassifierMixin, BaseEstimator):
    """Binary encrypted-vs-compressed classifier over raw payloads.

    fit(X, y) learns the chi-square window from the samples labeled
    encrypted (at least 2 required); compressed samples only inform the
    class list. predict returns string labels matching y's vocabulary.
    """

    def __init__(
        self,
        gamma: float = 2.0,
        alpha: float = 0.01,
        block_frequency_m: int = 128,
        apen_m: int = 2,
    ):
        self.gamma = gamma
        self.alpha = alpha
        self.block_frequency_m = block_frequency_m
        self.apen_m = apen_m

    def _config(self) -> TestConfig:
        return TestConfig(self.alpha, self.block_frequency_m, self.apen_m)

    def fit(self, X, y):
        payloads = _payloads(X)
        y = np.asarray(y, dtype=object)
        if len(y) != len(payloads):
            raise ValueError(f"X has {len(payloads)} samples but y has {len(y)}")
        labels = set(str(v) for v in y)
        unknown = labels - {ENCRYPTED, COMPRESSED}
        if unknown:
            raise ValueError(f"y may only contain {ENCRYPTED!r} and {COMPRESSED!r}, got {sorted(unknown)}")
        cfg = self._config()
        encrypted = [s for s, label in zip(payloads, y) if str(label) == ENCRYPTED]
        reports = [run_all(s, cfg) for s in encrypted]
        self.model_ = core.train(reports, self.gamma)
        self.classes_ = np.array(sorted(labels), dtype=object)
        self.n_features_in_ = 3
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        cfg = self._config()
        out = [core.classify_stream(s, self.model_, cfg).label for s in _payloads(X)]
        return np.array(out, dtype=object)

    def decision_function(self, X) -> np.ndarray:
        """Signed margin of the chi window: positive values fall inside the
        encrypted window, more positive = deeper inside."""
        check_is_fitted(self, "model_")
        cfg = self._config()
        margins = []
        for s in _payloads(X):
            fv: FeatureVector = core.extract_features(run_all(s, cfg))
            margins.append(self.model_.chi_upper - fv.chi_abs)
        return np.asarray(margins, dtype=float)
