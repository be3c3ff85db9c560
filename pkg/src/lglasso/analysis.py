"""Support-consistency diagnostics and support-recovery metrics."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import GridMismatch, SingularCovariance
from .groups import GroupSet
from .norm import DEFAULT_TOL_ALPHA, DEFAULT_TOL_V, canonical_alpha, group_support, omega

DEFAULT_STRICT_TOL = 1e-8


@dataclass
class ConsistencyReport:
    """Margins of the irrepresentability-type conditions at ``w_star``.

    ``margins[g] = ||Sigma_{g,J} Sigma_{J,J}^{-1} alpha_J|| - d_g`` for every
    group position ``g`` outside the weak group-support ``G_bar``, where ``J``
    is the set of covariates covered by ``G_bar`` and ``alpha`` the dual point
    of ``w_star``.  ``c1_holds`` means every margin is at most zero (the
    necessary condition), ``c2_holds`` that every margin is below
    ``-strict_tol`` (the sufficient one).
    """

    margins: dict
    c1_holds: bool
    c2_holds: bool
    J_bar: frozenset
    G_bar: frozenset
    alpha: np.ndarray
    support_matches_J: bool
    strict_tol: float
    gs: GroupSet

    def to_dict(self) -> dict:
        return {
            "margins": [
                {"group": list(self.gs.groups[g]), "margin": float(m)} for g, m in sorted(self.margins.items())
            ],
            "c1_holds": self.c1_holds,
            "c2_holds": self.c2_holds,
            "J_bar": sorted(self.J_bar),
            "G_bar": [list(self.gs.groups[g]) for g in sorted(self.G_bar)],
            "alpha": self.alpha.tolist(),
            "support_matches_J": self.support_matches_J,
            "strict_tol": self.strict_tol,
        }


def consistency_conditions(Sigma, w_star, gs: GroupSet, strict_tol=DEFAULT_STRICT_TOL, *, tol_v=DEFAULT_TOL_V,
                           tol_alpha=DEFAULT_TOL_ALPHA, is_design=False) -> ConsistencyReport:
    """Evaluate the consistency margins for the covariance ``Sigma`` at ``w_star``.

    Parameters
    ----------
    Sigma : array_like
        ``(p, p)`` covariance, or an ``(n, p)`` design when ``is_design`` is
        set, in which case ``Sigma = X.T @ X / n``.
    w_star : array_like of shape (p,)
    gs : GroupSet
    strict_tol : float
        Margin below which the strict condition counts as satisfied.

    Raises
    ------
    SingularCovariance
        If ``Sigma`` restricted to ``J`` is not positive definite.  No
        regularised inverse is attempted.
    NotConverged
        If the norm of ``w_star`` cannot be certified.
    """
    S = np.asarray(Sigma, dtype=float)
    if is_design:
        S = S.T @ S / S.shape[0]
    p = gs.p
    if S.shape != (p, p):
        raise ValueError(f"Sigma must be ({p}, {p}), got {S.shape}")
    if not np.allclose(S, S.T, rtol=1e-10, atol=1e-12):
        raise ValueError("Sigma must be symmetric")
    w_star = np.asarray(w_star, dtype=float)

    res = omega(w_star, gs)
    sup = group_support(res, gs, tol_v=tol_v, tol_alpha=tol_alpha, w=w_star)
    alpha = canonical_alpha(res, sup)
    J = np.asarray(sorted(sup.support_weak), dtype=int) - 1

    if np.linalg.eigvalsh(S)[0] <= 0:
        warnings.warn("Sigma is not positive definite on all covariates", RuntimeWarning, stacklevel=2)

    margins = {}
    outside = [g for g in range(gs.m) if g not in sup.weak]
    if J.size:
        try:
            chol = linalg.cho_factor(S[np.ix_(J, J)], lower=True)
        except linalg.LinAlgError as exc:
            raise SingularCovariance("Sigma restricted to J_bar is singular") from exc
        diag = np.diag(chol[0])
        if np.min(np.abs(diag)) <= 1e-12 * max(1.0, np.max(np.abs(diag))):
            raise SingularCovariance("Sigma restricted to J_bar is numerically singular")
        z = linalg.cho_solve(chol, alpha[J])
        for g in outside:
            gi = gs.index_arrays[g]
            margins[g] = float(np.linalg.norm(S[np.ix_(gi, J)] @ z) - gs.weights[g])
    else:
        margins = {g: -float(gs.weights[g]) for g in outside}

    vals = np.array(list(margins.values()))
    c1 = bool(np.all(vals <= 0)) if vals.size else True
    c2 = bool(np.all(vals < -strict_tol)) if vals.size else True
    supp = {int(i) + 1 for i in np.flatnonzero(w_star)}
    return ConsistencyReport(
        margins=margins,
        c1_holds=c1,
        c2_holds=c2,
        J_bar=frozenset(sup.support_weak),
        G_bar=frozenset(sup.weak),
        alpha=alpha,
        support_matches_J=supp == set(sup.support_weak),
        strict_tol=strict_tol,
        gs=gs,
    )


def identity_margins(alpha, J_bar, gs: GroupSet, groups) -> dict:
    """Margins when ``Sigma = I``: ``||alpha_{g & J}|| - d_g``."""
    alpha = np.asarray(alpha, dtype=float)
    J = np.zeros(gs.p, dtype=bool)
    J[np.asarray(sorted(J_bar), dtype=int) - 1] = True
    out = {}
    for g in groups:
        gi = gs.index_arrays[g]
        out[g] = float(np.linalg.norm(alpha[gi[J[gi]]]) - gs.weights[g])
    return out


def recovery_error(selected, true_support, p) -> float:
    """Mean of the missed-covariate rate and the false-selection rate.

    Covariates are 1-based.  A rate whose denominator is empty contributes 0.
    """
    sel = set(int(i) for i in selected)
    true = set(int(i) for i in true_support)
    for s in (sel, true):
        if s and (min(s) < 1 or max(s) > p):
            raise ValueError(f"covariates must lie in [1, {p}]")
    missed = len(true - sel) / len(true) if true else 0.0
    false = len(sel - true) / (p - len(true)) if p > len(true) else 0.0
    return 0.5 * (missed + false)


def selection_frequency(paths, p) -> np.ndarray:
    """Fraction of replicates selecting each covariate at each grid point.

    Parameters
    ----------
    paths : list of PathResult
        All paths must share the same grid.
    p : int

    Returns
    -------
    ndarray of shape (p, n_grid)
    """
    if not paths:
        raise ValueError("need at least one path")
    grid = np.asarray(paths[0].grid)
    supports = []
    for pr in paths:
        if np.asarray(pr.grid).shape != grid.shape or not np.array_equal(pr.grid, grid):
            raise GridMismatch("all paths must share one lambda grid")
        supports.append([f.support() for f in pr.fits])
    return frequency_from_supports(supports, p)


def frequency_from_supports(supports, p) -> np.ndarray:
    """Same as :func:`selection_frequency` from raw supports.

    ``supports[r][k]`` is the set of 1-based covariates selected by replicate
    ``r`` at grid point ``k``.
    """
    n_rep = len(supports)
    n_grid = len(supports[0])
    if any(len(s) != n_grid for s in supports):
        raise GridMismatch("replicates have different grid lengths")
    counts = np.zeros((p, n_grid))
    for rep in supports:
        for k, sel in enumerate(rep):
            if sel:
                counts[np.asarray(sorted(sel), dtype=int) - 1, k] += 1
    return counts / n_rep
