"""Scikit-learn style estimators wrapping the counting grid model.

``CountingGridModel`` learns the grid unsupervised from a documents-by-words
count matrix and exposes anchor posteriors through ``transform``. The
classifier and regressor add a label embedding on top of the unsupervised
fit, so they plug into pipelines, ``clone``, and grid search like any other
estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .corpus import matrix_to_bags
from .embedding import CONTINUOUS, DISCRETE, cell_occupancy, embed, loo_evaluate
from .trainer import TrainConfig, fit, infer_posteriors, mean_log_likelihood
from .validation import as_count_matrix, check_geometry, check_targets

__all__ = ["CountingGridModel", "CountingGridClassifier", "CountingGridRegressor"]


class CountingGridModel(TransformerMixin, BaseEstimator):
    """Unsupervised counting grid over a count matrix.

    Parameters
    ----------
    extent : sequence of int
        Grid size per dimension.
    window : sequence of int
        Window size per dimension; the ratio of volumes is the model
        capacity (equivalent number of topics).
    max_iter : int
        EM iteration cap.
    tol : float
        Relative bound-improvement stopping threshold.
    random_state : int
        Seed for the symmetry-breaking initialization.
    init_noise : float
        Relative amplitude of the initialization noise, in (0, 1].
    pseudocount : float
        Additive smoothing applied after each multiplicative update.

    Attributes
    ----------
    grid_ : CountingGrid
        The fitted per-cell word distributions.
    geometry_ : GridGeometry
    bound_trace_ : list of float
        Training objective per iteration (non-decreasing).
    n_iter_ : int
    converged_ : bool
    """

    def __init__(
        self,
        extent=(8, 8),
        window=(2, 2),
        max_iter=200,
        tol=1e-6,
        random_state=0,
        init_noise=0.1,
        pseudocount=1e-8,
    ):
        self.extent = extent
        self.window = window
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state
        self.init_noise = init_noise
        self.pseudocount = pseudocount

    def _config(self) -> TrainConfig:
        return TrainConfig(
            max_iters=self.max_iter,
            rel_tol=self.tol,
            seed=self.random_state,
            init_noise=self.init_noise,
            pseudocount=self.pseudocount,
        )

    def fit(self, X, y=None):
        counts = as_count_matrix(X)
        geometry = check_geometry(self.extent, self.window)
        bags = matrix_to_bags(counts)
        result = fit(bags, geometry, counts.shape[1], self._config())
        self.grid_ = result.grid
        self.geometry_ = geometry
        self.bound_trace_ = result.bound_trace
        self.n_iter_ = result.n_iter
        self.converged_ = result.converged
        return self

    def _check_fitted(self):
        if not hasattr(self, "grid_"):
            raise NotFittedError("estimator is not fitted; call fit first")

    def posteriors(self, X):
        """Per-row posterior maps over window anchor positions."""
        self._check_fitted()
        counts = as_count_matrix(X, self.grid_.vocab_size)
        return infer_posteriors(self.grid_, matrix_to_bags(counts))

    def transform(self, X):
        """Anchor posterior per row, flattened to (n_samples, n_cells)."""
        return np.stack([p.probs for p in self.posteriors(X)])

    def cell_occupancies(self, X):
        """Window-smoothed cell occupancy per row; rows sum to one."""
        return np.stack([cell_occupancy(p) for p in self.posteriors(X)])

    def score(self, X, y=None):
        """Mean per-word log-likelihood of X under the fitted grid."""
        self._check_fitted()
        counts = as_count_matrix(X, self.grid_.vocab_size)
        return mean_log_likelihood(self.grid_, matrix_to_bags(counts))


class _EmbeddingMixin:
    """Shared supervised layer: unsupervised grid fit plus target embedding."""

    _kind = DISCRETE

    def _fit_embedding(self, X, targets):
        counts = as_count_matrix(X)
        geometry = check_geometry(self.extent, self.window)
        bags = matrix_to_bags(counts)
        result = fit(bags, geometry, counts.shape[1], self._config())
        self.grid_ = result.grid
        self.geometry_ = geometry
        self.bound_trace_ = result.bound_trace
        self.n_iter_ = result.n_iter
        self.converged_ = result.converged
        self.train_posteriors_ = result.posteriors
        self.train_targets_ = np.asarray(targets)
        self.embedding_ = embed(
            result.posteriors, targets, kind=self._kind, alpha=self.alpha
        )
        return self

    def _occupancies(self, X):
        self._check_fitted()
        counts = as_count_matrix(X, self.grid_.vocab_size)
        posteriors = infer_posteriors(self.grid_, matrix_to_bags(counts))
        return np.stack([cell_occupancy(p) for p in posteriors])


class CountingGridClassifier(_EmbeddingMixin, ClassifierMixin, CountingGridModel):
    """Counting grid with a discrete label embedding readout.

    The grid is trained without labels; the labels are then embedded from
    the training posteriors and predictions average the embedded label
    distributions under each sample's cell occupancy.
    """

    _kind = DISCRETE

    def __init__(
        self,
        extent=(8, 8),
        window=(2, 2),
        max_iter=200,
        tol=1e-6,
        random_state=0,
        init_noise=0.1,
        pseudocount=1e-8,
        alpha=1e-6,
    ):
        super().__init__(
            extent=extent,
            window=window,
            max_iter=max_iter,
            tol=tol,
            random_state=random_state,
            init_noise=init_noise,
            pseudocount=pseudocount,
        )
        self.alpha = alpha

    def fit(self, X, y):
        y = np.asarray(y)
        counts = as_count_matrix(X)
        check_targets(y, DISCRETE, counts.shape[0])
        self.classes_, encoded = np.unique(y, return_inverse=True)
        return self._fit_embedding(counts, encoded)

    def predict_proba(self, X):
        """Occupancy-weighted class distributions, one row per sample."""
        occupancy = self._occupancies(X)
        flat = self.embedding_.values.reshape(-1, self.embedding_.n_classes)
        return occupancy @ flat

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def loo_score(self):
        """Leave-one-out accuracy over the training corpus (embedding only)."""
        self._check_fitted()
        report = loo_evaluate(
            self.grid_,
            self.train_posteriors_,
            self.train_targets_,
            kind=DISCRETE,
            alpha=self.alpha,
        )
        return report.value


class CountingGridRegressor(_EmbeddingMixin, RegressorMixin, CountingGridModel):
    """Counting grid with a continuous target embedding readout."""

    _kind = CONTINUOUS

    def __init__(
        self,
        extent=(8, 8),
        window=(2, 2),
        max_iter=200,
        tol=1e-6,
        random_state=0,
        init_noise=0.1,
        pseudocount=1e-8,
        alpha=1e-6,
    ):
        super().__init__(
            extent=extent,
            window=window,
            max_iter=max_iter,
            tol=tol,
            random_state=random_state,
            init_noise=init_noise,
            pseudocount=pseudocount,
        )
        self.alpha = alpha

    def fit(self, X, y):
        counts = as_count_matrix(X)
        y = check_targets(y, CONTINUOUS, counts.shape[0])
        return self._fit_embedding(counts, y)

    def predict(self, X):
        occupancy = self._occupancies(X)
        return occupancy @ self.embedding_.values.reshape(-1)

    def loo_score(self):
        """Leave-one-out Pearson correlation over the training corpus."""
        self._check_fitted()
        report = loo_evaluate(
            self.grid_,
            self.train_posteriors_,
            self.train_targets_,
            kind=CONTINUOUS,
            alpha=self.alpha,
        )
        return report.value
