"""Penalised risk minimisation with the latent group Lasso.

The problem ``min_w L(w) + lam * Omega(w)`` is solved in the duplicated
covariate space, where it is an ordinary group Lasso over latent vectors
``v^g``: ``min_v L(sum_g v^g) + lam * sum_g d_g ||v^g||``.  The duplicated
design ``[X_g1, X_g2, ...]`` is never built; blocks are addressed through
the group index arrays.

The outer loop grows a working set of groups whose gradient violates the
zero-block optimality condition; the inner loop runs cyclic block coordinate
descent on the working set.  For the squared loss each block problem is solved
exactly from the eigen-decomposition of ``X_g' X_g / n``; for the logistic
losses it is solved by proximal gradient steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._audit import notify
from .exceptions import DegenerateDesign, NotConverged
from .groups import GroupSet
from .losses import Loss, make_loss
from .norm import canonical_decomposition

DEFAULT_KKT_TOL = 1e-6


# -- duplicated design ----------------------------------------------------------


@dataclass(frozen=True)
class DuplicatedDesign:
    """Index-map view of ``[X_g for g in groups]``.

    Column ``j`` of the duplicated design is column ``columns[j]`` of ``X``;
    block ``g`` spans ``offsets[g]:offsets[g+1]``.
    """

    X: np.ndarray
    columns: np.ndarray
    offsets: np.ndarray

    @property
    def shape(self):
        return (self.X.shape[0], self.columns.size)

    def block(self, g) -> np.ndarray:
        return self.columns[self.offsets[g] : self.offsets[g + 1]]

    def collapse(self, v_dup) -> np.ndarray:
        """Sum duplicated coordinates back into a length-p vector."""
        return np.bincount(self.columns, weights=np.asarray(v_dup, float), minlength=self.X.shape[1])

    def matvec(self, v_dup) -> np.ndarray:
        return self.X @ self.collapse(v_dup)

    def rmatvec(self, r) -> np.ndarray:
        return (self.X.T @ r)[self.columns]

    def materialize(self) -> np.ndarray:
        """Dense duplicated matrix; meant for tests on small problems."""
        return self.X[:, self.columns]


def duplicate_design(X, gs: GroupSet) -> DuplicatedDesign:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != gs.p:
        raise ValueError(f"X must have {gs.p} columns, got shape {X.shape}")
    return DuplicatedDesign(X, gs.dup_index.astype(np.int64), gs.dup_offsets.astype(np.int64))


# -- results ----------------------------------------------------------------------


@dataclass
class FitResult:
    """Solution of one penalised problem.

    ``latent`` maps group positions to their nonzero latent vectors; groups
    absent from it have ``v^g = 0``.  ``active`` is the final working set.
    """

    w: np.ndarray
    intercept: float
    latent: dict
    lam: float
    kkt_residual: float
    objective: float
    iterations: int
    active: tuple
    converged: bool
    gs: GroupSet = field(repr=False)
    history: list = field(default_factory=list, repr=False)
    dual: np.ndarray = field(default=None, repr=False)

    def canonical_groups(self, tol=1e-6) -> list[int]:
        """Strong group-support of ``w`` under the small-groups-first tie-break.

        Uses :func:`lglasso.norm.canonical_decomposition` with the dual point
        ``-grad L(w) / lam`` stored at the end of the fit.
        """
        if not np.any(self.w):
            return []
        V = canonical_decomposition(self.w, self.dual, self.gs)
        vn = np.linalg.norm(V, axis=1)
        return [int(g) for g in np.flatnonzero(vn > tol * np.linalg.norm(self.w))]

    @property
    def v_dup(self) -> np.ndarray:
        """Stacked latent vector of length ``sum_g |g|``."""
        out = np.zeros(int(self.gs.dup_offsets[-1]))
        off = self.gs.dup_offsets
        for g, vg in self.latent.items():
            out[off[g] : off[g + 1]] = vg
        return out

    @property
    def penalty(self) -> float:
        """``sum_g d_g ||v^g||`` for the stored decomposition."""
        return float(sum(self.gs.weights[g] * np.linalg.norm(vg) for g, vg in self.latent.items()))

    def selected_groups(self, tol=0.0) -> list[int]:
        """Groups whose latent vector is larger than ``tol * ||w||``."""
        wn = float(np.linalg.norm(self.w))
        return sorted(g for g, vg in self.latent.items() if np.linalg.norm(vg) > tol * wn)

    def support(self) -> set[int]:
        """Selected covariates (1-based)."""
        return {int(i) + 1 for i in np.flatnonzero(self.w)}

    def to_dict(self) -> dict:
        return {
            "w": self.w.tolist(),
            "intercept": self.intercept,
            "lambda": self.lam,
            "latent": {
                "+".join(map(str, self.gs.groups[g])): self.latent[g].tolist() for g in sorted(self.latent)
            },
            "active_groups": [list(self.gs.groups[g]) for g in self.active],
            "kkt_residual": self.kkt_residual,
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass
class KKTReport:
    """Per-group optimality violations.

    For groups with a nonzero latent vector the residual is
    ``||grad_g L + lam d_g v^g / ||v^g|| || / (lam d_g)``; for the others it is
    ``max(0, ||grad_g L|| / (lam d_g) - 1)``.
    """

    residuals: np.ndarray
    nonzero: np.ndarray
    grad_norms: np.ndarray

    @property
    def max(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0


# -- problem data -----------------------------------------------------------------


class _Problem:
    """Validated data plus per-group caches shared along a path."""

    def __init__(self, X, y, loss, gs: GroupSet, fit_intercept: bool):
        self.loss = make_loss(loss)
        X = np.asarray(X, dtype=float)
        y = self.loss.check_targets(y)
        if X.ndim != 2 or X.shape[1] != gs.p:
            raise ValueError(f"X must have {gs.p} columns, got shape {X.shape}")
        if X.shape[0] != y.size:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.size} entries")
        if X.shape[0] < 1:
            raise ValueError("need at least one example")
        if not np.all(np.isfinite(X)):
            raise ValueError("X must be finite")
        self.gs = gs
        self.n = X.shape[0]
        self.fit_intercept = fit_intercept
        self.X = X
        self.y = y
        self.weights = self.loss.example_weights(y)
        if self.loss.is_squared and fit_intercept:
            self.x_mean = X.mean(axis=0)
            self.y_mean = float(y.mean())
            self.Xw = X - self.x_mean
            self.yw = y - self.y_mean
        else:
            self.x_mean = np.zeros(gs.p)
            self.y_mean = 0.0
            self.Xw = X
            self.yw = y
        self.XT = np.ascontiguousarray(self.Xw.T)
        self._eig = {}
        self._lip = {}

    # squared loss: eigen-data of X_g' X_g / n on the (centred) design
    def eig(self, g):
        if g not in self._eig:
            Xg = self.Xw[:, self.gs.index_arrays[g]]
            ev, E = np.linalg.eigh(Xg.T @ Xg / self.n)
            ev = np.maximum(ev, 0.0)
            if ev[-1] <= 0.0:
                raise DegenerateDesign(f"group {self.gs.groups[g]} has an all-zero design block")
            self._eig[g] = (ev, np.ascontiguousarray(E))
        return self._eig[g]

    # logistic: Lipschitz constant of the block gradient
    def lipschitz(self, g):
        if g not in self._lip:
            Xg = self.X[:, self.gs.index_arrays[g]]
            top = float(np.linalg.eigvalsh(Xg.T @ Xg / self.n)[-1])
            if top <= 0.0:
                raise DegenerateDesign(f"group {self.gs.groups[g]} has an all-zero design block")
            self._lip[g] = top * self.loss.curvature_cap * float(self.weights.max())
        return self._lip[g]

    def predictions(self, w, b):
        return self.X @ w + b

    def optimal_intercept(self, t_no_b, b0=0.0, max_iter=50):
        """Best offset for fixed ``Xw`` (one-dimensional Newton)."""
        if not self.fit_intercept:
            return 0.0
        if self.loss.is_squared:
            return float(np.mean(self.y - t_no_b))
        if np.all(self.y == self.y[0]):
            raise DegenerateDesign("all labels are equal; the offset is unbounded")
        b = b0
        for _ in range(max_iter):
            t = t_no_b + b
            g = float(np.mean(self.loss.dt(t, self.y, self.weights)))
            h = float(np.mean(self.loss.d2t(t, self.y, self.weights)))
            step = g / max(h, 1e-12)
            b -= step
            if abs(step) <= 1e-12 * max(1.0, abs(b)):
                break
        return b

    def gradient(self, w, b):
        t = self.predictions(w, b)
        return self.X.T @ self.loss.dt(t, self.y, self.weights) / self.n

    def risk(self, w, b):
        return self.loss.value(self.predictions(w, b), self.y, self.weights)


# -- public operations ------------------------------------------------------------


def lambda_max(X, y, loss, gs: GroupSet, fit_intercept=False) -> float:
    """Smallest ``lam`` for which ``w = 0`` is optimal: ``Omega^*(grad L(0))``.

    With ``fit_intercept`` the gradient is taken at the best offset for
    ``w = 0``.
    """
    prob = _Problem(X, y, loss, gs, fit_intercept)
    return _lambda_max(prob)


def _lambda_max(prob: _Problem) -> float:
    w0 = np.zeros(prob.gs.p)
    b0 = prob.optimal_intercept(np.zeros(prob.n))
    grad = prob.gradient(w0, b0)
    if prob.gs.m == 0:
        return 0.0
    return float(np.max(prob.gs.group_norms(grad) / prob.gs.weights))


def _kkt(prob: _Problem, grad, latent, lam) -> KKTReport:
    gs = prob.gs
    gn = gs.group_norms(grad)
    thr = lam * gs.weights
    res = np.maximum(0.0, gn / thr - 1.0)
    nonzero = np.zeros(gs.m, dtype=bool)
    for g, vg in latent.items():
        vn = np.linalg.norm(vg)
        if vn > 0:
            nonzero[g] = True
            gi = gs.index_arrays[g]
            res[g] = np.linalg.norm(grad[gi] + thr[g] * vg / vn) / thr[g]
    return KKTReport(res, nonzero, gn)


def kkt_check(fit: FitResult, X, y, loss, gs: GroupSet, lam=None, fit_intercept=None) -> KKTReport:
    """Recompute the per-group optimality residuals of ``fit``.

    The gradient is evaluated at ``fit.w`` and ``fit.intercept``.
    ``fit_intercept`` only affects input handling and defaults to whether the
    fit carries a nonzero offset.
    """
    if lam is None:
        lam = fit.lam
    if fit_intercept is None:
        fit_intercept = fit.intercept != 0.0
    prob = _Problem(X, y, loss, gs, fit_intercept)
    grad = prob.gradient(fit.w, fit.intercept)
    return _kkt(prob, grad, fit.latent, lam)


def fit(X, y, loss, gs: GroupSet, lam, *, kkt_tol=DEFAULT_KKT_TOL, max_outer=100, max_inner=10_000,
        warm_start=None, fit_intercept=False, record_history=False, max_block_steps=200,
        raise_on_failure=True) -> FitResult:
    """Minimise ``L(w) + lam * Omega(w)``.

    Parameters
    ----------
    X : array_like of shape (n, p)
    y : array_like of shape (n,)
        Real targets for the squared loss, labels in {-1, +1} otherwise.
    loss : str or Loss
        ``"squared"`` (``||y - Xw - b||^2 / 2n``), ``"logistic"`` or
        ``"balanced_logistic"``.
    gs : GroupSet
    lam : float
        Regularisation level, positive.
    kkt_tol : float
        Relative tolerance on every block optimality condition.
    max_outer : int
        Budget of working-set expansions.
    max_inner : int
        Budget of block-coordinate sweeps per working set.
    warm_start : FitResult, optional
        Starting latent vectors and offset.
    fit_intercept : bool
        Estimate an unpenalised offset ``b``.
    record_history : bool
        Store the objective after every sweep in ``result.history``.

    Returns
    -------
    FitResult

    Raises
    ------
    NotConverged
        When a budget runs out; ``exc.result`` holds the last iterate.
    DegenerateDesign
        When a working-set group has an all-zero design block.
    """
    prob = _Problem(X, y, loss, gs, fit_intercept)
    return _fit(prob, lam, kkt_tol, max_outer, max_inner, warm_start, record_history, max_block_steps,
                raise_on_failure)


def _fit(prob, lam, kkt_tol, max_outer, max_inner, warm_start, record_history, max_block_steps,
         raise_on_failure):
    gs = prob.gs
    lam = float(lam)
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam!r}")
    latent = {}
    b = 0.0
    if warm_start is not None:
        latent = {g: np.array(vg, dtype=float) for g, vg in warm_start.latent.items() if np.any(vg)}
        b = float(warm_start.intercept) if prob.fit_intercept else 0.0
    working = sorted(latent)
    history = []
    sweeps_total = 0
    w = _collapse(gs, latent)
    if not prob.loss.is_squared or not prob.fit_intercept:
        b = prob.optimal_intercept(prob.X @ w, b)

    converged = False
    for _outer in range(max_outer):
        if working:
            if prob.loss.is_squared:
                latent, sweeps = _inner_squared(prob, lam, working, latent, kkt_tol, max_inner, history,
                                                record_history)
            else:
                latent, b, sweeps = _inner_logistic(prob, lam, working, latent, b, kkt_tol, max_inner,
                                                    max_block_steps, history, record_history)
            sweeps_total += sweeps
        w = _collapse(gs, latent)
        if prob.loss.is_squared and prob.fit_intercept:
            b = prob.y_mean - float(prob.x_mean @ w)
        grad = prob.gradient(w, b)
        report = _kkt(prob, grad, latent, lam)
        in_ws = np.zeros(gs.m, dtype=bool)
        in_ws[working] = True
        violators = np.flatnonzero(~in_ws & (report.grad_norms > lam * gs.weights * (1.0 + kkt_tol)))
        if violators.size:
            working = sorted(set(working) | set(int(g) for g in violators))
            continue
        if report.max <= kkt_tol:
            converged = True
            break
    else:
        report = _kkt(prob, prob.gradient(w, b), latent, lam)

    result = FitResult(
        w=w,
        intercept=float(b),
        latent=latent,
        lam=lam,
        kkt_residual=report.max,
        objective=prob.risk(w, b) + lam * sum(gs.weights[g] * np.linalg.norm(v) for g, v in latent.items()),
        iterations=sweeps_total,
        active=tuple(working),
        converged=converged,
        gs=gs,
        history=history,
        dual=-prob.gradient(w, b) / lam,
    )
    notify("fit", result, kkt_tol=kkt_tol)
    if not converged and raise_on_failure:
        raise NotConverged(f"KKT residual {report.max:.3e} > {kkt_tol:.1e} after {max_outer} outer scans", result)
    return result


def _collapse(gs, latent):
    w = np.zeros(gs.p)
    for g, vg in latent.items():
        w[gs.index_arrays[g]] += vg
    return w


def _objective_centered(prob, w, lam, latent):
    if prob.loss.is_squared and prob.fit_intercept:
        r = prob.yw - prob.Xw @ w
        risk = 0.5 * float(r @ r) / prob.n
    else:
        risk = prob.risk(w, 0.0)
    return risk + lam * sum(prob.gs.weights[g] * np.linalg.norm(v) for g, v in latent.items())


def _inner_squared(prob, lam, working, latent, kkt_tol, max_inner, history, record_history, redecompose_every=20):
    gs = prob.gs
    sizes = np.array([gs.sizes[g] for g in working], dtype=np.int64)
    goff = np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)
    gidx = np.concatenate([gs.index_arrays[g] for g in working]).astype(np.int64)
    evals = np.empty(goff[-1])
    vecs = []
    for k, g in enumerate(working):
        ev, E = prob.eig(g)
        evals[goff[k] : goff[k + 1]] = ev
        vecs.append(E.ravel())
    eoff = np.concatenate(([0], np.cumsum(sizes * sizes))).astype(np.int64)
    evecs = np.concatenate(vecs)
    v = np.zeros(goff[-1])
    for k, g in enumerate(working):
        if g in latent:
            v[goff[k] : goff[k + 1]] = latent[g]
    w = _collapse(gs, latent)
    r = prob.yw - prob.Xw @ w
    thresh = lam * gs.weights[working]
    block_tol = kkt_tol / 10.0
    if record_history:
        history.append(_objective_centered(prob, w, lam, latent))
        sweeps = 0
        for _ in range(max_inner):
            s, worst = _kernels.bcd_squared_sweeps(prob.XT, r, gidx, goff, evecs, eoff, evals, v, thresh, 1,
                                                   block_tol, 1e-14, 200)
            sweeps += 1
            lat = _unstack(working, goff, v)
            history.append(_objective_centered(prob, _collapse(gs, lat), lam, lat))
            if worst <= block_tol:
                break
    else:
        sweeps = 0
        while sweeps < max_inner:
            chunk = min(redecompose_every, max_inner - sweeps)
            s, worst = _kernels.bcd_squared_sweeps(prob.XT, r, gidx, goff, evecs, eoff, evals, v, thresh,
                                                   chunk, block_tol, 1e-14, 200)
            sweeps += s
            if worst <= block_tol:
                break
            _redecompose(gs, working, goff, v)
            if _newton_joint(prob, lam, working, goff, v):
                r[:] = prob.yw - prob.Xw @ _collapse(gs, _unstack(working, goff, v))
    return _unstack(working, goff, v), int(sweeps)


def _joint_value(prob, lam, Xc, yc, d2, B, x, lv):
    zeta = B @ lv
    nz = x != 0
    if np.any(zeta[nz] <= 0):
        return np.inf
    res = yc - Xc @ x
    return 0.5 * float(res @ res) / prob.n + 0.5 * lam * float(np.sum(x[nz] ** 2 / zeta[nz]) + d2 @ lv)


def _newton_joint(prob, lam, working, goff, v, max_steps=30):
    """Newton steps on the joint program over ``w`` and group multipliers.

    With ``zeta = B l`` over the groups currently carrying mass,
    ``G(w, l) = L(w) + lam/2 (sum_i w_i^2 / zeta_i + sum_g d_g^2 l_g)`` is
    jointly convex and, once minimised over ``l``, equals the penalised
    objective restricted to those groups.  Started from
    ``l_g = ||v^g|| / d_g`` it is no larger than the current objective, and
    the decomposition read off at the end costs at most ``G``.  Cyclic
    descent is slow when overlapping blocks are nearly collinear; these
    steps converge quickly once the set of nonzero groups has settled.
    Returns True when ``v`` was changed.
    """
    gs = prob.gs
    lat = _unstack(working, goff, v)
    if len(lat) < 2:
        return False
    A = sorted(lat)
    cov = np.unique(np.concatenate([gs.index_arrays[g] for g in A]))
    pos = np.full(gs.p, -1)
    pos[cov] = np.arange(cov.size)
    B = np.zeros((cov.size, len(A)))
    for j, g in enumerate(A):
        B[pos[gs.index_arrays[g]], j] = 1.0
    d2 = gs.weights[A] ** 2
    Xc = prob.Xw[:, cov]
    yc = prob.yw
    XtX = Xc.T @ Xc / prob.n
    Xty = Xc.T @ yc / prob.n
    x = _collapse(gs, lat)[cov]
    lv = np.array([np.linalg.norm(lat[g]) for g in A]) / gs.weights[A]
    k = cov.size
    f = _joint_value(prob, lam, Xc, yc, d2, B, x, lv)
    f0 = f
    for _ in range(max_steps):
        zeta = B @ lv
        if np.any(zeta <= 0):
            break
        gx = XtX @ x - Xty + lam * x / zeta
        q = x * x / zeta**2
        gl = 0.5 * lam * (d2 - B.T @ q)
        free_l = (lv > 0) | (gl < 0)
        Hxx = XtX + lam * np.diag(1.0 / zeta)
        Hxl = -lam * (x / zeta**2)[:, None] * B
        Hll = lam * B.T @ ((x * x / zeta**3)[:, None] * B)
        fl = np.flatnonzero(free_l)
        H = np.block([[Hxx, Hxl[:, fl]], [Hxl[:, fl].T, Hll[np.ix_(fl, fl)]]])
        grad = np.concatenate([gx, gl[fl]])
        gnorm = np.linalg.norm(grad)
        if gnorm <= 1e-13 * max(1.0, abs(f)):
            break
        step = np.linalg.lstsq(H, -grad, rcond=1e-13)[0]
        t = 1.0
        accepted = False
        for _ls in range(40):
            xn = x + t * step[:k]
            ln = lv.copy()
            ln[fl] = np.maximum(lv[fl] + t * step[k:], 0.0)
            fn = _joint_value(prob, lam, Xc, yc, d2, B, xn, ln)
            if fn < f:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        x, lv, f = xn, ln, fn
    if not f < f0:
        return False
    zeta = B @ lv
    ratio = np.zeros(k)
    nz = x != 0
    ratio[nz] = x[nz] / zeta[nz]
    new = {g: lv[j] * ratio[pos[gs.index_arrays[g]]] for j, g in enumerate(A)}
    for kk, g in enumerate(working):
        v[goff[kk] : goff[kk + 1]] = new.get(g, 0.0)
    return True


def _redecompose(gs, working, goff, v, n_sweeps=10):
    """Replace the stacked latent vectors by a cheaper decomposition of the same ``w``.

    Block coordinate descent moves mass between overlapping groups slowly.
    A few sweeps of the multiplier program restricted to the working set,
    started from ``lam_g = ||v^g|| / d_g``, give a decomposition whose
    penalty is no larger, so the objective cannot increase.
    """
    lat = _unstack(working, goff, v)
    if len(lat) < 2:
        return
    w = _collapse(gs, lat)
    idx = gs.dup_index.astype(np.int64)
    off = gs.dup_offsets.astype(np.int64)
    lam = np.zeros(gs.m)
    for g, vg in lat.items():
        lam[g] = np.linalg.norm(vg) / gs.weights[g]
    frozen = np.ones(gs.m, dtype=bool)
    frozen[working] = False
    frozen |= _kernels.group_sq_norms(w, idx, off) == 0.0
    lam[frozen] = 0.0
    zeta = gs.incidence_sparse @ lam
    _kernels.lambda_cd_sweeps(w * w, idx, off, gs.weights**2, lam, zeta, frozen, n_sweeps, 1e-12, 100)
    zeta = gs.incidence_sparse @ lam
    ratio = np.zeros_like(w)
    nz = w != 0
    ratio[nz] = w[nz] / zeta[nz]
    old_pen = sum(gs.weights[g] * np.linalg.norm(vg) for g, vg in lat.items())
    new = {g: lam[g] * ratio[gs.index_arrays[g]] for g in working}
    new_pen = sum(gs.weights[g] * np.linalg.norm(vg) for g, vg in new.items())
    if new_pen < old_pen:
        for k, g in enumerate(working):
            v[goff[k] : goff[k + 1]] = new[g]


def _unstack(working, goff, v):
    out = {}
    for k, g in enumerate(working):
        vg = v[goff[k] : goff[k + 1]]
        if np.any(vg):
            out[g] = vg.copy()
    return out


def _group_prox(u, thresh):
    nu = np.linalg.norm(u)
    if nu <= thresh:
        return np.zeros_like(u)
    return (1.0 - thresh / nu) * u


def _inner_logistic(prob, lam, working, latent, b, kkt_tol, max_inner, max_block_steps, history,
                    record_history):
    gs = prob.gs
    loss, y, wts, n = prob.loss, prob.y, prob.weights, prob.n
    latent = dict(latent)
    w = _collapse(gs, latent)
    t = prob.X @ w + b
    block_tol = kkt_tol / 10.0
    if record_history:
        history.append(prob.risk(w, b) + lam * sum(gs.weights[g] * np.linalg.norm(v) for g, v in latent.items()))
    sweeps = 0
    for _ in range(max_inner):
        sweeps += 1
        worst = 0.0
        for g in working:
            gi = gs.index_arrays[g]
            Xg = prob.X[:, gi]
            thr = lam * gs.weights[g]
            L = prob.lipschitz(g)
            vg = latent.get(g, np.zeros(gi.size))
            for step in range(max_block_steps):
                grad = Xg.T @ loss.dt(t, y, wts) / n
                vn = np.linalg.norm(vg)
                if vn > 0:
                    res = np.linalg.norm(grad + thr * vg / vn) / thr
                else:
                    res = max(0.0, np.linalg.norm(grad) / thr - 1.0)
                if step == 0:
                    worst = max(worst, res)
                if res <= block_tol:
                    break
                u = _group_prox(vg - grad / L, thr / L)
                t = t + Xg @ (u - vg)
                vg = u
            if np.any(vg):
                latent[g] = vg
            else:
                latent.pop(g, None)
        if prob.fit_intercept:
            b_new = prob.optimal_intercept(t - b, b)
            t = t + (b_new - b)
            b = b_new
        if record_history:
            w = _collapse(gs, latent)
            history.append(prob.risk(w, b) + lam * sum(gs.weights[g] * np.linalg.norm(v) for g, v in latent.items()))
        if worst <= block_tol:
            break
    return latent, b, sweeps


def prox(y, gs: GroupSet, lam, **opts) -> FitResult:
    """Proximal operator ``argmin_w ||w - y||^2 / 2 + lam * Omega(w)``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (gs.p,):
        raise ValueError(f"y must have shape ({gs.p},), got {y.shape}")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if lam == 0:
        latent = {}
        return FitResult(y.copy(), 0.0, latent, 0.0, 0.0, 0.0, 0, (), True, gs)
    # identity design scaled so that the mean squared loss equals ||w - y||^2 / 2
    scale = math.sqrt(gs.p)
    X = scale * np.eye(gs.p)
    return fit(X, scale * y, "squared", gs, lam, fit_intercept=False, **opts)


# -- paths ----------------------------------------------------------------------


@dataclass
class PathResult:
    grid: np.ndarray
    fits: list
    lambda_max: float

    def table(self, tol=0.0):
        """Rows of (lambda, objective, n_groups, n_covariates, kkt_residual)."""
        return [
            (f.lam, f.objective, len(f.selected_groups(tol)), len(f.support()), f.kkt_residual) for f in self.fits
        ]


def geometric_grid(lmax, n_points, ratio_min) -> np.ndarray:
    if n_points < 2:
        raise ValueError("a path needs at least two points")
    if not 0 < ratio_min <= 1:
        raise ValueError("ratio_min must lie in (0, 1]")
    return lmax * np.geomspace(1.0, ratio_min, n_points)


def parse_grid(text: str):
    """Parse ``geometric:N:RATIO`` or ``absolute:N:LO:HI`` (log-spaced, decreasing)."""
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == "geometric" and len(parts) == 3:
            return {"kind": "geometric", "n_points": int(parts[1]), "ratio_min": float(parts[2])}
        if kind == "absolute" and len(parts) == 4:
            return {"kind": "absolute", "n_points": int(parts[1]), "lo": float(parts[2]), "hi": float(parts[3])}
    except ValueError:
        pass
    raise ValueError(f"grid must look like geometric:N:RATIO or absolute:N:LO:HI, got {text!r}")


def absolute_grid(lo, hi, n_points) -> np.ndarray:
    if n_points < 2 or not 0 < lo < hi:
        raise ValueError("absolute grid needs 0 < lo < hi and at least two points")
    return np.geomspace(hi, lo, n_points)


def path(X, y, loss, gs: GroupSet, n_points=50, ratio_min=1e-3, *, grid=None, fit_intercept=False,
         **opts) -> PathResult:
    """Solutions along a decreasing grid of ``lam`` with warm starts.

    By default the grid is geometric from ``lambda_max`` down to
    ``ratio_min * lambda_max``.  An explicit decreasing ``grid`` may be passed
    instead.
    """
    prob = _Problem(X, y, loss, gs, fit_intercept)
    lmax = _lambda_max(prob)
    if grid is None:
        if lmax == 0:
            raise ValueError("lambda_max is zero; pass an explicit grid")
        grid = geometric_grid(lmax, n_points, ratio_min)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) > 0) or np.any(grid <= 0):
        raise ValueError("grid must be a positive, non-increasing sequence")
    fits = []
    prev = None
    kw = dict(kkt_tol=DEFAULT_KKT_TOL, max_outer=100, max_inner=10_000, record_history=False,
              max_block_steps=200, raise_on_failure=True)
    kw.update(opts)
    for lam in grid:
        res = _fit(prob, lam, kw["kkt_tol"], kw["max_outer"], kw["max_inner"], prev, kw["record_history"],
                   kw["max_block_steps"], kw["raise_on_failure"])
        fits.append(res)
        prev = res
    return PathResult(grid, fits, lmax)
