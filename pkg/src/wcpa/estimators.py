"""scikit-learn compatible front end for the convex ridge fit."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .ballfit import convex_ridge_lp, ridge_to_monomial
from .poly import eval_poly, hessian_at


class ConvexPolynomialRegressor(RegressorMixin, BaseEstimator):
    """Polynomial of total degree ``degree`` that is convex on a ball around the origin.

    The fit minimizes the (sample-weighted) maximum absolute residual over a
    sum of ridge polynomials, each convex on the ball of radius ``radius``
    (default: the largest training norm).

    >>> import numpy as np
    >>> X = np.linspace(-2, 2, 201).reshape(-1, 1)
    >>> model = ConvexPolynomialRegressor(degree=6).fit(X, np.abs(X[:, 0]))
    >>> bool(model.score(X, np.abs(X[:, 0])) > 0.95)
    True
    """

    def __init__(self, degree: int = 4, radius: float | None = None):
        self.degree = degree
        self.radius = radius

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if not isinstance(self.degree, (int, np.integer)) or self.degree < 1:
            raise ValueError(f"degree must be a positive integer, got {self.degree!r}")
        r = float(np.max(np.linalg.norm(X, axis=1))) if self.radius is None else float(self.radius)
        if not r > 0:
            raise ValueError("radius must be positive (all training points at the origin?)")
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms > r * (1 + 1e-12)):
            raise ValueError("training points lie outside the ball of the given radius")
        w = None
        if sample_weight is not None:
            w = check_array(sample_weight, ensure_2d=False, dtype=np.float64)
            if w.shape != y.shape or np.any(w < 0):
                raise ValueError("sample_weight must be non-negative with one entry per sample")
        coef, dirs, level, repair = convex_ridge_lp(X / r, y, int(self.degree), w)
        self.poly_ = ridge_to_monomial(coef, dirs, r)
        self.radius_ = r
        self.level_ = level
        self.repair_ = repair
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "poly_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, but {type(self).__name__} "
                             f"is expecting {self.n_features_in_} features as input")
        return np.atleast_1d(eval_poly(self.poly_, X))

    def min_hessian_eigenvalue(self, X) -> float:
        """Smallest Hessian eigenvalue of the fitted polynomial over the rows of ``X``."""
        check_is_fitted(self, "poly_")
        X = check_array(X, dtype=np.float64)
        if self.poly_.degree < 2:
            return 0.0
        return float(np.linalg.eigvalsh(hessian_at(self.poly_, X))[:, 0].min())
