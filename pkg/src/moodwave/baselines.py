"""Classical baselines on frame-mean summaries: LR, ridge, LDA, Gaussian NB, k-NN and one-vs-rest."""

from __future__ import annotations

import io
import csv

import numpy as np
from scipy import linalg
from scipy.special import log_softmax, softmax

from .errors import DataError, NumericalError

STD_FLOOR = 1e-12


def summarize(fm) -> np.ndarray:
    """Mean of every feature row across frames (a 204-vector for a full FeatureMatrix)."""
    data = getattr(fm, "data", fm)
    return np.asarray(data, dtype=np.float64).mean(axis=1)


def summarize_many(x: np.ndarray) -> np.ndarray:
    """(N, D, T) stack -> (N, D) frame means."""
    return np.asarray(x, dtype=np.float64).mean(axis=2)


def _check_xy(x, y=None):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericalError("non-finite values in feature matrix")
    if y is None:
        return x
    y = np.asarray(y)
    if y.shape != (x.shape[0],):
        raise ValueError(f"labels shape {y.shape} does not match {x.shape[0]} rows")
    if x.shape[0] == 0:
        raise DataError("empty training set")
    if y.dtype.kind not in "iu" or y.min() < 0:
        raise ValueError("labels must be non-negative integers")
    return x, y.astype(np.int64)


class _Standardized:
    """Mixin storing train-set means and scales, re-applied at predict time."""

    standardize = True
    n_classes: int

    def _fit_scaler(self, x):
        if self.standardize:
            self.mean_ = x.mean(axis=0)
            sd = x.std(axis=0)
            self.scale_ = np.where(sd > STD_FLOOR, sd, 1.0)
        else:
            self.mean_ = np.zeros(x.shape[1])
            self.scale_ = np.ones(x.shape[1])
        return self._transform(x)

    def _transform(self, x):
        return (x - self.mean_) / self.scale_

    def _classes(self, y, n_classes):
        self.n_classes = int(n_classes if n_classes is not None else y.max() + 1)
        if y.max() >= self.n_classes:
            raise ValueError(f"label {y.max()} outside [0, {self.n_classes})")

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.decision_function(x), axis=1)

    def score(self, x, y) -> float:
        return float(np.mean(self.predict(x) == np.asarray(y)))


class LogisticRegression(_Standardized):
    """Multinomial softmax regression fitted by full-batch gradient descent.

    Objective: mean NLL + l2/2 * ||W||^2 (bias unpenalised). With ``lr=None``
    weights and bias each step by 1/L for their block of the curvature bound.
    """

    def __init__(self, l2: float = 1e-4, iters: int = 2000, lr: float | None = None, tol: float = 1e-7,
                 standardize: bool = True):
        self.l2, self.iters, self.lr, self.tol = l2, iters, lr, tol
        self.standardize = standardize

    def _objective_grad(self, z, onehot, w, b):
        n = z.shape[0]
        logits = z @ w + b
        logp = log_softmax(logits, axis=1)
        loss = -np.sum(onehot * logp) / n + 0.5 * self.l2 * np.sum(w * w)
        resid = (np.exp(logp) - onehot) / n
        return loss, z.T @ resid + self.l2 * w, resid.sum(axis=0)

    def fit(self, x, y, n_classes: int | None = None):
        x, y = _check_xy(x, y)
        self._classes(y, n_classes)
        z = self._fit_scaler(x)
        n, d = z.shape
        onehot = np.eye(self.n_classes)[y]
        # softmax NLL Hessian is bounded by 0.5 * ||[Z 1]||^2 / n; the penalty only touches W
        zb = np.hstack([z, np.ones((n, 1))])
        lip = 0.5 * np.linalg.norm(zb, 2) ** 2 / n
        step_w = self.lr if self.lr is not None else 1.0 / (lip + self.l2)
        step_b = self.lr if self.lr is not None else 1.0 / lip
        w = np.zeros((d, self.n_classes))
        b = np.zeros(self.n_classes)
        self.n_iter_ = 0
        for it in range(self.iters):
            _, gw, gb = self._objective_grad(z, onehot, w, b)
            gnorm = np.sqrt(np.sum(gw * gw) + np.sum(gb * gb))
            if gnorm < self.tol:
                break
            w -= step_w * gw
            b -= step_b * gb
            self.n_iter_ = it + 1
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NumericalError("logistic regression diverged; lower the learning rate")
        self.coef_, self.intercept_ = w, b
        self._z, self._onehot = z, onehot
        return self

    def gradient_norm(self) -> float:
        """Norm of the training-objective gradient at the fitted weights."""
        _, gw, gb = self._objective_grad(self._z, self._onehot, self.coef_, self.intercept_)
        return float(np.sqrt(np.sum(gw * gw) + np.sum(gb * gb)))

    def decision_function(self, x) -> np.ndarray:
        return self._transform(_check_xy(x)) @ self.coef_ + self.intercept_

    def predict_proba(self, x) -> np.ndarray:
        return softmax(self.decision_function(x), axis=1)


class RidgeClassifier(_Standardized):
    """Least-squares regression onto one-hot targets, (X^T X + alpha I) W = X^T Y, argmax decision."""

    def __init__(self, alpha: float = 1.0, fit_intercept: bool = True, standardize: bool = True):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.alpha, self.fit_intercept = alpha, fit_intercept
        self.standardize = standardize

    def fit(self, x, y, n_classes: int | None = None):
        x, y = _check_xy(x, y)
        self._classes(y, n_classes)
        z = self._fit_scaler(x)
        target = np.eye(self.n_classes)[y]
        if self.fit_intercept:
            z_mean, t_mean = z.mean(axis=0), target.mean(axis=0)
        else:
            z_mean, t_mean = np.zeros(z.shape[1]), np.zeros(self.n_classes)
        zc, tc = z - z_mean, target - t_mean
        gram = zc.T @ zc + self.alpha * np.eye(z.shape[1])
        try:
            factor = linalg.cho_factor(gram)
        except linalg.LinAlgError as exc:
            raise NumericalError(f"ridge normal equations are not positive definite ({exc})") from exc
        self.coef_ = linalg.cho_solve(factor, zc.T @ tc)
        self.intercept_ = t_mean - z_mean @ self.coef_
        self._zc, self._tc = zc, tc
        return self

    def normal_residual(self) -> float:
        """max |(Z^T Z + alpha I) W - Z^T Y| on the training data."""
        zc = self._zc
        lhs = zc.T @ zc @ self.coef_ + self.alpha * self.coef_
        return float(np.max(np.abs(lhs - zc.T @ self._tc)))

    def decision_function(self, x) -> np.ndarray:
        return self._transform(_check_xy(x)) @ self.coef_ + self.intercept_


class LDA(_Standardized):
    """Linear discriminant analysis with shrinkage of the pooled covariance.

    Sigma = (1 - g) * S + g * (trace(S) / d) * I, and
    delta_k(x) = x^T Sigma^-1 mu_k - mu_k^T Sigma^-1 mu_k / 2 + log pi_k.
    """

    def __init__(self, shrinkage: float = 0.1, standardize: bool = True):
        if not 0 <= shrinkage <= 1:
            raise ValueError("shrinkage must lie in [0, 1]")
        self.shrinkage = shrinkage
        self.standardize = standardize

    def fit(self, x, y, n_classes: int | None = None):
        x, y = _check_xy(x, y)
        self._classes(y, n_classes)
        z = self._fit_scaler(x)
        n, d = z.shape
        counts = np.bincount(y, minlength=self.n_classes)
        if np.any(counts < 2):
            raise DataError(f"LDA needs at least 2 samples per class, got counts {counts.tolist()}")
        means = np.stack([z[y == k].mean(axis=0) for k in range(self.n_classes)])
        resid = z - means[y]
        s = resid.T @ resid / (n - self.n_classes)
        g = self.shrinkage
        sigma = (1 - g) * s + g * (np.trace(s) / d) * np.eye(d)
        try:
            factor = linalg.cho_factor(sigma)
            if g == 0 and np.linalg.cond(sigma) > 1e12:
                raise linalg.LinAlgError("ill-conditioned")
        except linalg.LinAlgError:
            raise NumericalError("pooled covariance is singular; retry with shrinkage > 0") from None
        self.means_ = means
        self.priors_ = counts / n
        sol = linalg.cho_solve(factor, means.T)  # Sigma^-1 mu_k as columns
        self.coef_ = sol
        self.intercept_ = -0.5 * np.sum(means.T * sol, axis=0) + np.log(self.priors_)
        return self

    def decision_function(self, x) -> np.ndarray:
        return self._transform(_check_xy(x)) @ self.coef_ + self.intercept_

    def predict_proba(self, x) -> np.ndarray:
        return softmax(self.decision_function(x), axis=1)


class GaussianNB(_Standardized):
    """Per-class diagonal Gaussians; variances floored at var_floor * (largest feature variance)."""

    def __init__(self, var_floor: float = 1e-9, standardize: bool = True):
        self.var_floor = var_floor
        self.standardize = standardize

    def fit(self, x, y, n_classes: int | None = None):
        x, y = _check_xy(x, y)
        self._classes(y, n_classes)
        z = self._fit_scaler(x)
        counts = np.bincount(y, minlength=self.n_classes)
        if np.any(counts == 0):
            missing = np.flatnonzero(counts == 0).tolist()
            raise DataError(f"classes {missing} have no training samples")
        eps = self.var_floor * max(float(np.max(z.var(axis=0))), STD_FLOOR)
        self.theta_ = np.stack([z[y == k].mean(axis=0) for k in range(self.n_classes)])
        self.var_ = np.stack([z[y == k].var(axis=0) for k in range(self.n_classes)]) + eps
        self.priors_ = counts / len(y)
        return self

    def decision_function(self, x) -> np.ndarray:
        """Joint log-likelihood log p(x, k)."""
        z = self._transform(_check_xy(x))
        ll = -0.5 * np.sum(np.log(2 * np.pi * self.var_), axis=1)
        sq = ((z[:, None, :] - self.theta_[None]) ** 2 / self.var_[None]).sum(axis=2)
        return ll - 0.5 * sq + np.log(self.priors_)

    def predict_proba(self, x) -> np.ndarray:
        return softmax(self.decision_function(x), axis=1)


class KNeighbors(_Standardized):
    """Euclidean k-nearest-neighbour majority vote.

    Distance ties go to the smaller training index, vote ties to the smaller class.
    """

    def __init__(self, k: int = 5, standardize: bool = True):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.k = k
        self.standardize = standardize

    def fit(self, x, y, n_classes: int | None = None):
        x, y = _check_xy(x, y)
        if self.k > len(y):
            raise ValueError(f"k={self.k} exceeds the {len(y)} training samples")
        self._classes(y, n_classes)
        self._z = self._fit_scaler(x)
        self._y = y
        return self

    def neighbors(self, x) -> np.ndarray:
        q = self._transform(_check_xy(x))
        d2 = (np.sum(q * q, axis=1)[:, None] - 2 * q @ self._z.T + np.sum(self._z * self._z, axis=1)[None])
        return np.argsort(d2, axis=1, kind="stable")[:, : self.k]

    def decision_function(self, x) -> np.ndarray:
        """Neighbour vote counts per class."""
        labels = self._y[self.neighbors(x)]
        votes = np.zeros((labels.shape[0], self.n_classes))
        np.add.at(votes, (np.arange(labels.shape[0])[:, None], labels), 1.0)
        return votes


class BinaryLogisticRegression(LogisticRegression):
    """Two-class logistic regression exposing a single logit score."""

    def fit(self, x, y, n_classes: int | None = None):
        y = np.asarray(y)
        if set(np.unique(y).tolist()) - {0, 1}:
            raise ValueError("binary labels must be 0/1")
        return super().fit(x, y, n_classes=2)

    def logit(self, x) -> np.ndarray:
        s = self.decision_function(x)
        return s[:, 1] - s[:, 0]


class OneVsRest:
    """One binary logistic model per class; predict by the largest binary logit."""

    def __init__(self, l2: float = 1e-4, iters: int = 2000, standardize: bool = True):
        self.l2, self.iters, self.standardize = l2, iters, standardize

    def fit(self, x, y, n_classes: int | None = None):
        x, y = _check_xy(x, y)
        self.n_classes = int(n_classes if n_classes is not None else y.max() + 1)
        if self.n_classes < 2:
            raise ValueError("one-vs-rest needs at least 2 classes")
        counts = np.bincount(y, minlength=self.n_classes)
        for c in range(self.n_classes):
            if counts[c] == 0:
                raise DataError(f"class {c} is absent from the training data")
        self.models_ = [
            BinaryLogisticRegression(self.l2, self.iters, standardize=self.standardize).fit(x, (y == c).astype(np.int64))
            for c in range(self.n_classes)
        ]
        return self

    def decision_function(self, x) -> np.ndarray:
        return np.stack([m.logit(x) for m in self.models_], axis=1)

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.decision_function(x), axis=1)

    def score(self, x, y) -> float:
        return float(np.mean(self.predict(x) == np.asarray(y)))


BASELINE_NAMES = ("logreg", "ridge", "lda", "gnb", "knn", "ovr")


def make_baselines(cfg=None) -> dict[str, object]:
    """The six baselines with hyperparameters taken from an ExperimentConfig (or defaults)."""
    l2 = getattr(cfg, "logreg_l2", 1e-4)
    iters = getattr(cfg, "logreg_iters", 2000)
    return {
        "logreg": LogisticRegression(l2=l2, iters=iters),
        "ridge": RidgeClassifier(alpha=getattr(cfg, "ridge_alpha", 1.0)),
        "lda": LDA(shrinkage=getattr(cfg, "lda_shrinkage", 0.1)),
        "gnb": GaussianNB(),
        "knn": KNeighbors(k=getattr(cfg, "knn_k", 5)),
        "ovr": OneVsRest(l2=l2, iters=iters),
    }


def run_baselines(x_train, y_train, x_test, y_test, cfg=None, n_classes: int | None = None) -> dict[str, float]:
    """Fit every baseline on the training rows and return test accuracy by name."""
    out = {}
    for name, model in make_baselines(cfg).items():
        model.fit(x_train, y_train, n_classes=n_classes)
        out[name] = model.score(x_test, y_test)
    return out


def results_csv(results: dict[str, float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "accuracy"])
    for name, acc in results.items():
        w.writerow([name, repr(float(acc))])
    return buf.getvalue()
