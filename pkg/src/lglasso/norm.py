"""Evaluation of the latent group Lasso norm and its duality certificates.

The norm of ``w`` is the smallest weighted sum ``sum_g d_g ||v^g||`` over
decompositions ``w = sum_g v^g`` with each ``v^g`` supported on group ``g``.
It is computed here through the equivalent program over nonnegative group
multipliers

    Omega(w) = 1/2 min_{lam >= 0} sum_i w_i^2 / zeta_i + sum_g d_g^2 lam_g,
    zeta_i = sum_{g containing i} lam_g,

from which the decomposition ``v^g_i = lam_g w_i / zeta_i`` and the dual
point ``alpha_i = w_i / zeta_i`` follow.  The dual norm is
``max_g ||alpha_g|| / d_g``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._audit import notify
from .exceptions import NotConverged, TopologyMismatch, UncoveredMass
from .groups import GroupSet

DEFAULT_TOL = 1e-9
DEFAULT_TOL_V = 1e-6
DEFAULT_TOL_ALPHA = 1e-4


@dataclass
class NormResult:
    """Outcome of :func:`omega`.

    ``decomposition`` is an ``(m, p)`` array whose row ``g`` is ``v^g``.
    ``alpha`` is the dual point scaled to be feasible, so that
    ``value - alpha @ w`` equals ``gap``.
    """

    value: float
    lam: np.ndarray
    decomposition: np.ndarray
    alpha: np.ndarray
    gap: float
    iterations: int
    converged: bool = True

    @property
    def primal(self) -> float:
        """Weighted sum of latent norms; an upper bound on the norm."""
        return self.value


def omega_dual(alpha, gs: GroupSet) -> float:
    """Dual norm: the largest ``||alpha_g|| / d_g`` over groups."""
    alpha = np.asarray(alpha, dtype=float)
    if gs.m == 0:
        return 0.0
    return float(np.max(gs.group_norms(alpha) / gs.weights))


def _flat(gs: GroupSet):
    return gs.dup_index.astype(np.int64), gs.dup_offsets.astype(np.int64)


def _certificate(w, lam, gs, idx, off):
    """Primal value, scaled dual point and gap for a multiplier vector."""
    zeta = gs.incidence_sparse @ lam
    nz = w != 0
    alpha = np.zeros_like(w)
    alpha[nz] = w[nz] / zeta[nz]
    anorm = np.sqrt(_kernels.group_sq_norms(alpha, idx, off))
    primal = float(np.sum(gs.weights * lam * anorm))
    dual_norm = float(np.max(anorm / gs.weights)) if gs.m else 0.0
    alpha = alpha / max(1.0, dual_norm)
    dual = float(alpha @ w)
    return primal, alpha, primal - dual, zeta


def omega(w, gs: GroupSet, tol=DEFAULT_TOL, max_iter=10_000, lambda0=None, check_every=5,
          raise_on_failure=True, newton_after=20) -> NormResult:
    """Evaluate the norm of ``w`` with a duality-gap certificate.

    Parameters
    ----------
    w : array_like of shape (p,)
    gs : GroupSet
    tol : float
        Target duality gap (absolute).
    max_iter : int
        Maximum number of cyclic sweeps over the groups.
    lambda0 : array_like of shape (m,), optional
        Starting multipliers.  Defaults to ``||w_g|| / d_g`` for every group.
        Groups not touching ``supp(w)`` always start (and stay) at zero.
    raise_on_failure : bool
        If False, return the best result with ``converged=False`` instead of
        raising :class:`NotConverged`.
    newton_after : int
        Cyclic sweeps can crawl when groups are strongly coupled; after this
        many sweeps each check is preceded by a few projected Newton steps on
        the positive multipliers.

    Returns
    -------
    NormResult
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (gs.p,):
        raise ValueError(f"w must have shape ({gs.p},), got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("w must be finite")
    m = gs.m
    if not np.any(w):
        result = NormResult(0.0, np.zeros(m), np.zeros((m, gs.p)), np.zeros(gs.p), 0.0, 0)
        notify("omega", result, w=w, gs=gs, tol=tol)
        return result

    idx, off = _flat(gs)
    w2 = w * w
    gnorm2 = _kernels.group_sq_norms(w, idx, off)
    frozen = gnorm2 == 0.0
    if lambda0 is None:
        lam = np.sqrt(gnorm2) / gs.weights
    else:
        lam = np.array(lambda0, dtype=float)
        if lam.shape != (m,) or np.any(lam < 0):
            raise ValueError("lambda0 must be a nonnegative vector with one entry per group")
        lam[frozen] = 0.0
    d2 = gs.weights**2

    best = None
    sweeps = 0
    while sweeps < max_iter:
        n = min(check_every, max_iter - sweeps)
        zeta = gs.incidence_sparse @ lam
        _kernels.lambda_cd_sweeps(w2, idx, off, d2, lam, zeta, frozen, n, 1e-12, 100)
        sweeps += n
        if sweeps >= newton_after:
            _newton_polish(w2, lam, d2, gs, frozen)
        primal, alpha, gap, _ = _certificate(w, lam, gs, idx, off)
        if best is None or gap < best[1]:
            best = (lam.copy(), gap)
        if gap <= tol:
            break

    lam_best = best[0]
    primal, alpha, gap, zeta = _certificate(w, lam_best, gs, idx, off)
    result = NormResult(
        value=primal,
        lam=lam_best,
        decomposition=decomposition_from_lambda(w, lam_best, gs),
        alpha=alpha,
        gap=max(gap, 0.0),
        iterations=sweeps,
        converged=gap <= tol,
    )
    notify("omega", result, w=w, gs=gs, tol=tol)
    if not result.converged and raise_on_failure:
        raise NotConverged(f"duality gap {gap:.3e} > {tol:.1e} after {sweeps} sweeps", result)
    return result


def _objective(w2, lam, d2, gs):
    zeta = gs.incidence_sparse @ lam
    nz = w2 > 0
    if np.any(zeta[nz] <= 0):
        return np.inf
    return 0.5 * float(np.sum(w2[nz] / zeta[nz]) + d2 @ lam)


def _newton_polish(w2, lam, d2, gs, frozen, steps=10):
    """Projected Newton steps on the multiplier program, updating ``lam`` in place.

    The Hessian ``B' diag(w^2 / zeta^3) B`` is singular whenever the
    decomposition is not unique, so the step is a least-squares solve.
    """
    B = gs.incidence_sparse
    nz = w2 > 0
    f = _objective(w2, lam, d2, gs)
    for _ in range(steps):
        zeta = B @ lam
        q = np.zeros_like(w2)
        q[nz] = w2[nz] / zeta[nz] ** 2
        grad = 0.5 * (d2 - B.T @ q)
        free = ~frozen & ((lam > 0) | (grad < 0))
        if not np.any(free):
            return
        Bf = B[:, np.flatnonzero(free)].toarray()
        c = np.zeros_like(w2)
        c[nz] = w2[nz] / zeta[nz] ** 3
        H = Bf.T @ (c[:, None] * Bf)
        step = np.linalg.lstsq(H, -grad[free], rcond=1e-12)[0]
        t = 1.0
        improved = False
        for _ls in range(30):
            cand = lam.copy()
            cand[free] = np.maximum(lam[free] + t * step, 0.0)
            fc = _objective(w2, cand, d2, gs)
            if fc < f:
                lam[:] = cand
                f = fc
                improved = True
                break
            t *= 0.5
        if not improved:
            return


def decomposition_from_lambda(w, lam, gs: GroupSet) -> np.ndarray:
    """Latent vectors ``v^g_i = lam_g w_i / zeta_i`` as an ``(m, p)`` array."""
    w = np.asarray(w, dtype=float)
    lam = np.asarray(lam, dtype=float)
    zeta = gs.incidence_sparse @ lam
    bad = (w != 0) & (zeta <= 0)
    if np.any(bad):
        raise UncoveredMass(f"covariates {list(np.flatnonzero(bad) + 1)} have zero coverage")
    ratio = np.zeros_like(w)
    nz = w != 0
    ratio[nz] = w[nz] / zeta[nz]
    V = np.zeros((gs.m, gs.p))
    for g, gi in enumerate(gs.index_arrays):
        if lam[g] > 0:
            V[g, gi] = lam[g] * ratio[gi]
    return V


# -- closed forms for small topologies ---------------------------------------

TOPOLOGY_SIZES = {"two_overlapping": 3, "cycle3": 3, "cycle4": 4}


def in_balanced_region(w) -> bool:
    """Whether no |w_i| exceeds the l1 norm of the other two coordinates."""
    a = np.abs(np.asarray(w, dtype=float))
    total = a.sum()
    return bool(np.all(a <= total - a))


def omega_oracle(w, topology: str) -> float:
    """Closed-form norm for three small unit-weight group structures.

    ``two_overlapping``: {1,2},{2,3}; ``cycle3``: {1,2},{1,3},{2,3};
    ``cycle4``: {1,2},{1,3},{2,4},{3,4}.
    """
    if topology not in TOPOLOGY_SIZES:
        raise TopologyMismatch(f"unknown topology {topology!r}")
    w = np.asarray(w, dtype=float)
    if w.shape != (TOPOLOGY_SIZES[topology],):
        raise TopologyMismatch(
            f"{topology} needs a vector of length {TOPOLOGY_SIZES[topology]}, got shape {w.shape}"
        )
    a = np.abs(w)
    if topology == "two_overlapping":
        return float(np.hypot(a[1], a[0] + a[2]))
    if topology == "cycle4":
        return float(np.hypot(a[0] + a[3], a[1] + a[2]))
    if in_balanced_region(w):
        return float(a.sum() / np.sqrt(2.0))
    total = a.sum()
    return float(min(np.hypot(a[i], total - a[i]) for i in range(3)))


# -- group support ------------------------------------------------------------


@dataclass(frozen=True)
class GroupSupport:
    """Estimated strong and weak group-supports and the covariates they cover.

    Group entries are positions in ``GroupSet.groups``; covariates are 1-based.
    """

    strong: frozenset
    weak: frozenset
    support_strong: frozenset
    support_weak: frozenset


def group_support(res: NormResult, gs: GroupSet, tol_v=DEFAULT_TOL_V, tol_alpha=DEFAULT_TOL_ALPHA,
                  w=None) -> GroupSupport:
    """Threshold a converged :class:`NormResult` into strong and weak group-supports.

    A group is strong when its latent vector is larger than ``tol_v * ||w||``
    and weak when its dual block saturates, ``||alpha_g|| >= d_g (1 - tol_alpha)``.
    The dual point used is the one carried by ``res``; it vanishes outside the
    support of ``w``, which on the weak support is the uniquely determined dual.
    Only a thresholded estimate of the weak group-support is available from a
    single dual point.
    """
    if not res.converged:
        raise NotConverged("group support requires a converged norm evaluation", res)
    if w is None:
        w = res.decomposition.sum(axis=0)
    wn = float(np.linalg.norm(w))
    vnorm = np.linalg.norm(res.decomposition, axis=1)
    strong = {g for g in range(gs.m) if wn > 0 and vnorm[g] > tol_v * wn}
    anorm = gs.group_norms(res.alpha)
    weak = {g for g in range(gs.m) if wn > 0 and anorm[g] >= gs.weights[g] * (1.0 - tol_alpha)}
    weak |= strong
    return GroupSupport(
        strong=frozenset(strong),
        weak=frozenset(weak),
        support_strong=frozenset(gs.covariates(strong)),
        support_weak=frozenset(gs.covariates(weak)),
    )


def is_decomposition_unique(w_support, strong, gs: GroupSet, rank="column", pivot_tol=1e-10) -> bool:
    """Whether the optimal decomposition is unique.

    Builds the incidence sub-matrix with rows ``w_support`` (1-based
    covariates) and columns ``strong`` (group positions).  The multipliers are
    determined only through ``zeta = B lam``, so the decomposition is unique
    exactly when this sub-matrix has a trivial kernel, i.e. full column rank
    (``rank="column"``, the default).  ``rank="row"`` tests full row rank
    instead; it disagrees with the column test whenever the sub-matrix is not
    square, e.g. for the groups {1,2},{2,3} and w = (1,1,1), where the
    decomposition is known to be unique.
    """
    rows = sorted(w_support)
    cols = sorted(strong)
    if not rows:
        return True
    if not cols:
        return False
    sub = gs.incidence[np.asarray(rows) - 1][:, cols].astype(float)
    r = _elimination_rank(sub, pivot_tol)
    if rank == "column":
        return r == len(cols)
    if rank == "row":
        return r == len(rows)
    raise ValueError("rank must be 'column' or 'row'")


def _elimination_rank(A, pivot_tol):
    """Rank by Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=float)
    nr, nc = A.shape
    r = 0
    for c in range(nc):
        if r == nr:
            break
        piv = r + int(np.argmax(np.abs(A[r:, c])))
        if abs(A[piv, c]) <= pivot_tol:
            continue
        A[[r, piv]] = A[[piv, r]]
        A[r + 1 :] -= np.outer(A[r + 1 :, c] / A[r, c], A[r])
        r += 1
    return r


def canonical_alpha(res: NormResult, support: GroupSupport) -> np.ndarray:
    """Dual point restricted to the weak support (zero elsewhere)."""
    out = np.zeros_like(res.alpha)
    J = np.asarray(sorted(support.support_weak), dtype=int) - 1
    out[J] = res.alpha[J]
    return out



def canonical_decomposition(w, alpha, gs: GroupSet, sat_tol=1e-3, penalty_slack=1e-8, slack_price=1e3):
    """Optimal decomposition of ``w`` that favours small groups.

    At the optimum every latent vector points along the dual point,
    ``v^g = t_g alpha_g / ||alpha_g||`` with ``t_g >= 0``, and only groups
    saturated by ``alpha`` (``||alpha_g|| = d_g``) carry mass.  When the
    weights make several groups equally cheap, e.g. ``d = sqrt(|g|)`` with
    coefficients of equal magnitude, many choices of ``t`` are optimal.
    Two linear programs over the nearly saturated groups pick one:

    1. minimise the penalty ``sum_g d_g t_g`` subject to reproducing ``w``;
    2. among choices within ``penalty_slack`` (relative) of that minimum,
       minimise ``sum_g |g| t_g``.

    The first stage prices in how far each group is from saturation, so the
    loose candidate threshold ``sat_tol`` does not let in groups that are
    merely close.  ``alpha`` is only known to solver accuracy, so ``w`` is
    matched up to slack variables costing ``slack_price * max d_g`` per unit.

    Returns
    -------
    ndarray of shape (m, p)
        Row ``g`` is ``v^g``.
    """
    from scipy.optimize import linprog

    w = np.asarray(w, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    V = np.zeros((gs.m, gs.p))
    if not np.any(w):
        return V
    anorm = gs.group_norms(alpha)
    cand = [g for g in range(gs.m) if anorm[g] > 0 and anorm[g] >= gs.weights[g] * (1.0 - sat_tol)]
    if not cand:
        raise UncoveredMass("no group is saturated by the dual point")
    rows = np.unique(np.concatenate([gs.index_arrays[g] for g in cand]))
    if np.any(w[np.setdiff1d(np.arange(gs.p), rows)] != 0):
        raise UncoveredMass("w is nonzero outside the groups saturated by the dual point")
    pos = np.full(gs.p, -1)
    pos[rows] = np.arange(rows.size)
    A = np.zeros((rows.size, len(cand)))
    for j, g in enumerate(cand):
        gi = gs.index_arrays[g]
        A[pos[gi], j] = alpha[gi] / anorm[g]
    # reproduce w up to slack variables priced far above any group
    nr, nc = A.shape
    A_eq = np.hstack([A, np.eye(nr), -np.eye(nr)])
    big = slack_price * float(gs.weights[cand].max())
    cost1 = np.concatenate([gs.weights[cand], np.full(2 * nr, big)])
    first = linprog(cost1, A_eq=A_eq, b_eq=w[rows], bounds=(0, None), method="highs")
    if first.status != 0:
        raise UncoveredMass(f"linear program failed: {first.message}")
    cost2 = np.concatenate([gs.sizes[cand].astype(float), np.zeros(2 * nr)])
    second = linprog(cost2, A_ub=cost1[None, :], b_ub=[first.fun * (1.0 + penalty_slack)], A_eq=A_eq,
                     b_eq=w[rows], bounds=(0, None), method="highs")
    t = (second.x if second.status == 0 else first.x)[:nc]
    tmax = t.max()
    for j, g in enumerate(cand):
        if t[j] > 1e-9 * tmax:
            gi = gs.index_arrays[g]
            V[g, gi] = t[j] * alpha[gi] / anorm[g]
    return V
