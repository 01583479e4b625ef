"""scikit-learn style wrappers.

Levels play the role of samples: ``fit`` takes an array of levels, and the
fitted state holds one passage law per level.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .levy_model import classify, predicted_passage_position
from .overshoot_measures import estimate_law, triviality_test
from .pathsim import SimConfig
from .validation import check_levels, check_triplet


class PassagePositionPredictor(BaseEstimator):
    """Analytic passage position from the classifier; NaN where it is random."""

    def __init__(self, triplet=None, tol=0.0):
        self.triplet = triplet
        self.tol = tol

    def fit(self, X=None, y=None):
        self.process_class_ = classify(check_triplet(self.triplet), self.tol)
        return self

    def predict(self, X):
        check_is_fitted(self, "process_class_")
        out = [predicted_passage_position(self.process_class_, x) for x in check_levels(X)]
        return np.array([np.nan if v is None else v for v in out])


class PassageLawEstimator(TransformerMixin, BaseEstimator):
    """Monte Carlo passage laws at a set of levels.

    ``transform`` returns, per level, the columns
    ``crossed_mass, censored_mass, median_position, support_diameter``.
    """

    def __init__(self, triplet=None, n_replicates=10_000, strict=False, seed=0, horizon=100.0,
                 dt=1e-2, bridge_correction=True, small_jump_eps=None,
                 gaussian_substitution=False, delta=None, min_crossed=1, workers=1):
        self.triplet = triplet
        self.n_replicates = n_replicates
        self.strict = strict
        self.seed = seed
        self.horizon = horizon
        self.dt = dt
        self.bridge_correction = bridge_correction
        self.small_jump_eps = small_jump_eps
        self.gaussian_substitution = gaussian_substitution
        self.delta = delta
        self.min_crossed = min_crossed
        self.workers = workers

    def _sim_config(self) -> SimConfig:
        return SimConfig(seed=self.seed, horizon=self.horizon, dt=self.dt,
                         bridge_correction=self.bridge_correction,
                         small_jump_eps=self.small_jump_eps,
                         gaussian_substitution=self.gaussian_substitution, workers=self.workers)

    def fit(self, X, y=None):
        from .zoo import default_delta

        t = check_triplet(self.triplet)
        levels = check_levels(X)
        cfg = self._sim_config()
        self.delta_ = self.delta if self.delta is not None else default_delta(t, cfg)
        self.levels_ = levels
        self.laws_ = [estimate_law(t, float(x), self.strict, self.n_replicates, cfg, (i,))
                      for i, x in enumerate(levels)]
        self.verdicts_ = [triviality_test(law, self.delta_, self.min_crossed) for law in self.laws_]
        self.process_class_ = classify(t)
        return self

    def _law_for(self, x):
        hits = np.flatnonzero(self.levels_ == x)
        if not hits.size:
            raise ValueError(f"level {x!r} was not fitted")
        return self.laws_[hits[0]]

    def predict(self, X):
        """Median passage position at each (fitted) level."""
        check_is_fitted(self, "laws_")
        return np.array([self._law_for(x).median() for x in check_levels(X)])

    def transform(self, X):
        check_is_fitted(self, "laws_")
        rows = []
        for x in check_levels(X):
            law = self._law_for(x)
            diam = float(np.ptp(law.positions)) if law.crossed_count else 0.0
            rows.append([law.crossed_mass, law.censored_mass, law.median(), diam])
        return np.array(rows, dtype=float).reshape(-1, 4)
