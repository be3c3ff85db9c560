"""Empirical risks used by the solver.

Every loss is an average over the ``n`` rows of a per-example term evaluated at
the predictions ``t = Xw + b``.  The gradient with respect to ``w`` is
``X.T @ loss.dt(t, y) / n`` where ``dt`` is the derivative of the per-example
term times its weight.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

LOSS_KINDS = ("squared", "logistic", "balanced_logistic")


@dataclass(frozen=True)
class Loss:
    """Per-example loss with optional example weights.

    Parameters
    ----------
    kind : {"squared", "logistic", "balanced_logistic"}
        ``squared`` is ``(t - y)^2 / 2``; the logistic losses are
        ``log(1 + exp(-y t))`` with labels in {-1, +1}.  The balanced variant
        weights each positive example by the fraction of negatives and each
        negative one by the fraction of positives.
    """

    kind: str = "squared"

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}, got {self.kind!r}")

    @property
    def is_squared(self) -> bool:
        return self.kind == "squared"

    @property
    def curvature_cap(self) -> float:
        """Bound on the second derivative of the unweighted per-example term."""
        return 1.0 if self.is_squared else 0.25

    def check_targets(self, y):
        y = np.asarray(y, dtype=float)
        if y.ndim != 1:
            raise ValueError("y must be one-dimensional")
        if not np.all(np.isfinite(y)):
            raise ValueError("y must be finite")
        if not self.is_squared and not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("logistic losses need labels in {-1, +1}")
        return y

    def example_weights(self, y) -> np.ndarray:
        """Weights multiplying each per-example term (ones unless balanced)."""
        y = np.asarray(y, dtype=float)
        if self.kind != "balanced_logistic":
            return np.ones_like(y)
        n = y.size
        pos = y > 0
        n_pos = int(pos.sum())
        return np.where(pos, (n - n_pos) / n, n_pos / n)

    def value(self, t, y, weights=None) -> float:
        """Mean of the (weighted) per-example losses."""
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.is_squared:
            return 0.5 * float(np.mean((t - y) ** 2))
        if weights is None:
            weights = self.example_weights(y)
        return float(np.mean(weights * np.logaddexp(0.0, -y * t)))

    def dt(self, t, y, weights=None) -> np.ndarray:
        """Derivative of each weighted per-example term with respect to ``t``."""
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.is_squared:
            return t - y
        if weights is None:
            weights = self.example_weights(y)
        return -weights * y * expit(-y * t)

    def d2t(self, t, y, weights=None) -> np.ndarray:
        """Second derivative of each weighted per-example term."""
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.is_squared:
            return np.ones_like(t)
        if weights is None:
            weights = self.example_weights(y)
        s = expit(y * t)
        return weights * s * (1.0 - s)

    def risk(self, X, y, w, b=0.0) -> float:
        """``L(w)`` for design ``X`` and offset ``b``."""
        return self.value(np.asarray(X) @ np.asarray(w, dtype=float) + b, y)

    def gradient(self, X, y, w, b=0.0) -> np.ndarray:
        """``grad L(w) = X.T @ dt / n``."""
        X = np.asarray(X, dtype=float)
        t = X @ np.asarray(w, dtype=float) + b
        return X.T @ self.dt(t, y) / X.shape[0]


def make_loss(kind) -> Loss:
    return kind if isinstance(kind, Loss) else Loss(str(kind))
