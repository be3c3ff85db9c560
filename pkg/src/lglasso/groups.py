"""Group collections, weight schemes and weight-design diagnostics.

Covariates are numbered from 1 to ``p`` everywhere in the public interface.
Groups are referred to by their position in :attr:`GroupSet.groups`, which is
always the canonical order (by size, then lexicographically).
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy import linalg, sparse

from .exceptions import (
    CoverViolation,
    DuplicateGroup,
    GroupSetError,
    Infeasible,
    NonpositiveWeight,
    UncoveredCovariate,
)

WEIGHT_KINDS = ("uniform", "sqrt_size", "quartic_root", "c_scheme")


@dataclass(frozen=True, eq=False)
class GroupSet:
    """A validated collection of covariate groups with positive weights.

    Use :func:`build_group_set` rather than the constructor; it validates the
    input and puts groups in canonical order.
    """

    p: int
    groups: tuple[tuple[int, ...], ...]
    weights: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.groups)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([len(g) for g in self.groups], dtype=int)

    @cached_property
    def index_arrays(self) -> tuple[np.ndarray, ...]:
        """Zero-based column indices of each group, for numpy indexing."""
        arrays = tuple(np.asarray(g, dtype=np.intp) - 1 for g in self.groups)
        for a in arrays:
            a.setflags(write=False)
        return arrays

    @cached_property
    def incidence(self) -> np.ndarray:
        """Dense p x m binary matrix, ``B[i, g] = 1`` iff covariate i+1 is in g."""
        return incidence_matrix(self)

    @cached_property
    def incidence_sparse(self) -> sparse.csr_matrix:
        rows = np.concatenate(self.index_arrays)
        cols = np.repeat(np.arange(self.m), self.sizes)
        data = np.ones(rows.size)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.p, self.m))

    @cached_property
    def dup_offsets(self) -> np.ndarray:
        """Start of each group's block in the duplicated space (length m+1)."""
        return np.concatenate([[0], np.cumsum(self.sizes)])

    @cached_property
    def dup_index(self) -> np.ndarray:
        """Zero-based original covariate of every duplicated coordinate."""
        return np.concatenate(self.index_arrays) if self.m else np.zeros(0, dtype=np.intp)

    def group_norms(self, x: np.ndarray) -> np.ndarray:
        """Euclidean norm of ``x`` restricted to each group."""
        x = np.asarray(x, dtype=float)
        return np.sqrt(self.incidence_sparse.T @ (x * x))

    def covariates(self, group_ids: Iterable[int]) -> set[int]:
        """Union of the (1-based) covariates of the given groups."""
        out: set[int] = set()
        for k in group_ids:
            out.update(self.groups[k])
        return out

    def index_of(self, group: Iterable[int]) -> int:
        """Position of ``group`` (given as covariates) in canonical order."""
        key = tuple(sorted(group))
        try:
            return self._positions[key]
        except KeyError:
            raise KeyError(f"group {list(key)} is not in this GroupSet") from None

    @cached_property
    def _positions(self) -> dict:
        return {g: k for k, g in enumerate(self.groups)}

    def with_weights(self, weights: Sequence[float]) -> "GroupSet":
        return build_group_set(self.p, self.groups, weights)

    def is_partition(self) -> bool:
        return int(self.sizes.sum()) == self.p

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "groups": [list(g) for g in self.groups],
            "weights": [float(d) for d in self.weights],
        }

    def __eq__(self, other):
        if not isinstance(other, GroupSet):
            return NotImplemented
        return (
            self.p == other.p
            and self.groups == other.groups
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.p, self.groups, self.weights.tobytes()))


def build_group_set(p, groups, weights=None) -> GroupSet:
    """Validate groups and weights and return them in canonical order.

    Parameters
    ----------
    p : int
        Number of covariates.
    groups : sequence of iterables of int
        Covariate indices in ``[1, p]``.
    weights : sequence of float, optional
        One positive weight per group; defaults to all ones.

    Raises
    ------
    UncoveredCovariate, NonpositiveWeight, DuplicateGroup, GroupSetError
    """
    if isinstance(p, bool) or int(p) != p or p < 1:
        raise GroupSetError(f"p must be a positive integer, got {p!r}")
    p = int(p)
    groups = [list(g) for g in groups]
    if weights is None:
        weights = [1.0] * len(groups)
    weights = [float(d) for d in weights]
    if len(weights) != len(groups):
        raise GroupSetError(
            f"{len(groups)} groups but {len(weights)} weights"
        )
    canon = []
    seen = set()
    for g, d in zip(groups, weights):
        if len(g) == 0:
            raise GroupSetError("empty group")
        if any(isinstance(i, bool) or int(i) != i for i in g):
            raise GroupSetError(f"non-integer covariate index in {g}")
        key = tuple(sorted({int(i) for i in g}))
        if len(key) != len(g):
            raise GroupSetError(f"repeated covariate inside group {g}")
        if key[0] < 1 or key[-1] > p:
            raise GroupSetError(f"group {list(key)} has indices outside [1, {p}]")
        if not (d > 0) or not math.isfinite(d):
            raise NonpositiveWeight(list(key), d)
        if key in seen:
            raise DuplicateGroup(key)
        seen.add(key)
        canon.append((key, d))
    covered = set().union(*(k for k, _ in canon)) if canon else set()
    for i in range(1, p + 1):
        if i not in covered:
            raise UncoveredCovariate(i)
    canon.sort(key=lambda kd: (len(kd[0]), kd[0]))
    w = np.array([d for _, d in canon], dtype=float)
    w.setflags(write=False)
    return GroupSet(p=p, groups=tuple(k for k, _ in canon), weights=w)


def incidence_matrix(gs: GroupSet) -> np.ndarray:
    B = np.zeros((gs.p, gs.m), dtype=np.int8)
    for k, idx in enumerate(gs.index_arrays):
        B[idx, k] = 1
    return B


def group_set_from_dict(data: Mapping) -> GroupSet:
    """Inverse of :meth:`GroupSet.to_dict`; rejects unknown keys."""
    if not isinstance(data, Mapping):
        raise GroupSetError("group file must hold a JSON object")
    unknown = set(data) - {"p", "groups", "weights"}
    if unknown:
        raise GroupSetError(f"unknown keys {sorted(unknown)}")
    for key in ("p", "groups"):
        if key not in data:
            raise GroupSetError(f"missing key {key!r}")
    if not isinstance(data["groups"], list) or not all(
        isinstance(g, list) for g in data["groups"]
    ):
        raise GroupSetError("'groups' must be a list of lists of integers")
    return build_group_set(data["p"], data["groups"], data.get("weights"))


def load_group_set(path) -> GroupSet:
    with open(path) as fh:
        return group_set_from_dict(json.load(fh))


def save_group_set(gs: GroupSet, path) -> None:
    with open(path, "w") as fh:
        json.dump(gs.to_dict(), fh)
        fh.write("\n")


# -- weight schemes -----------------------------------------------------------


@dataclass(frozen=True)
class WeightScheme:
    """Weight as a function of group size.

    ``uniform`` gives 1, ``sqrt_size`` gives sqrt(k), ``quartic_root`` gives
    k**(1/4) and ``c_scheme`` gives sqrt(k + c*sqrt(k)).
    """

    kind: str
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight scheme {self.kind!r}")
        if not (self.c >= 0):
            raise ValueError("c must be nonnegative")

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        if self.kind == "uniform":
            out = np.ones_like(k)
        elif self.kind == "sqrt_size":
            out = np.sqrt(k)
        elif self.kind == "quartic_root":
            out = k**0.25
        else:
            out = np.sqrt(k + self.c * np.sqrt(k))
        return out if out.ndim else float(out)

    @property
    def label(self) -> str:
        return f"c={self.c:g}" if self.kind == "c_scheme" else self.kind

    @classmethod
    def parse(cls, text: str) -> "WeightScheme":
        """Parse ``uniform``, ``sqrt_size``, ``quartic_root`` or ``c=<value>``."""
        text = text.strip()
        if text.startswith("c="):
            return cls("c_scheme", float(text[2:]))
        return cls(text)


def apply_weight_scheme(gs: GroupSet, scheme: WeightScheme) -> GroupSet:
    return build_group_set(gs.p, gs.groups, scheme(gs.sizes))


# -- group generators ---------------------------------------------------------


def groups_from_edges(p: int, edges) -> GroupSet:
    """One unit-weight group of size two per edge of a graph on ``[1, p]``."""
    groups = []
    for e in edges:
        a, b = e
        if a == b:
            raise GroupSetError(f"self-loop on vertex {a}")
        groups.append((a, b))
    return build_group_set(p, groups)


def groups_from_chain_windows(p: int, k: int) -> GroupSet:
    """All windows ``{i, ..., i+k-1}`` of length ``k`` along the chain 1..p."""
    if not 1 <= k <= p:
        raise GroupSetError(f"window length {k} outside [1, {p}]")
    return build_group_set(p, [range(i, i + k) for i in range(1, p - k + 2)])


def groups_from_chain_windows_upto(p: int, kmax: int) -> GroupSet:
    """All windows of length 1 through ``kmax`` along the chain 1..p."""
    if not 1 <= kmax <= p:
        raise GroupSetError(f"maximal window length {kmax} outside [1, {p}]")
    groups = [
        range(i, i + k) for k in range(1, kmax + 1) for i in range(1, p - k + 2)
    ]
    return build_group_set(p, groups)


def groups_from_overlapping_chain(group_size: int, overlap: int, n_groups: int) -> GroupSet:
    """Consecutive blocks of ``group_size`` covariates sharing ``overlap`` with the next.

    With (10, 2, 10) this gives {1..10}, {9..18}, ..., {73..82} on p = 82.
    """
    if group_size < 1 or n_groups < 1 or not 0 <= overlap < group_size:
        raise GroupSetError("need group_size >= 1, n_groups >= 1, 0 <= overlap < group_size")
    step = group_size - overlap
    p = step * (n_groups - 1) + group_size
    groups = [range(k * step + 1, k * step + group_size + 1) for k in range(n_groups)]
    return build_group_set(p, groups)


def restrict_group_size(gs: GroupSet, max_size: int | None) -> GroupSet:
    """Drop groups larger than ``max_size`` (``None`` keeps everything)."""
    if max_size is None:
        return gs
    keep = [k for k in range(gs.m) if gs.sizes[k] <= max_size]
    return build_group_set(gs.p, [gs.groups[k] for k in keep], gs.weights[keep])


# -- weight design diagnostics -----------------------------------------------


class SizeCheck(NamedTuple):
    lower: bool  # d_{k-1} < d_k
    upper: bool  # d_k < sqrt(k/(k-1)) d_{k-1}

    @property
    def holds(self) -> bool:
        return self.lower and self.upper


def check_condition_C(d_by_size: Mapping[int, float], rel_tol: float = 1e-12) -> dict[int, SizeCheck]:
    """Check d_{k-1} < d_k < sqrt(k/(k-1)) d_{k-1} for every size k > 1.

    Sizes must be contiguous from 1 to K.  The upper comparison is done on
    squares, ``(k-1) d_k^2 < k d_{k-1}^2``, with a relative margin of
    ``rel_tol`` so that the equality case ``d_k = sqrt(k)`` is reported as a
    failure despite rounding in the square roots.
    """
    if not d_by_size:
        raise ValueError("no sizes given")
    K = max(d_by_size)
    missing = [k for k in range(1, K + 1) if k not in d_by_size]
    if missing:
        raise ValueError(f"missing sizes {missing}")
    report = {}
    for k in range(2, K + 1):
        prev, cur = float(d_by_size[k - 1]), float(d_by_size[k])
        report[k] = SizeCheck(prev < cur, (k - 1) * cur * cur < k * prev * prev * (1 - rel_tol))
    return report


def is_redundant_sufficient(gs: GroupSet, g: int, H: Iterable[int]) -> bool:
    """Sufficient test for redundancy of group ``g`` given a cover ``H``.

    Returns True when d_g^2 exceeds the sum of d_h^2 over the cover.
    """
    H = list(H)
    if not set(gs.groups[g]) <= gs.covariates(H):
        raise CoverViolation(f"groups {H} do not cover group {g}")
    return float(gs.weights[g]) ** 2 > float(np.sum(gs.weights[H] ** 2))


def domination_threshold_singletons(g_size: int, d1: float) -> float:
    """Weight below which a group dominates any |g|-1 of its singletons."""
    if g_size < 2:
        raise ValueError("group size must be at least 2")
    if not d1 > 0:
        raise ValueError("d1 must be positive")
    return d1 * math.sqrt(g_size - 1)


def domination_value_P(gs: GroupSet, g: int, H: Iterable[int], *, max_vertex_bases=200_000) -> float:
    """Smallest ||alpha_g|| subject to ||alpha_h|| = d_h for every h in H.

    Solved as the linear program in x_i = alpha_i^2 >= 0:
    minimise sum_{i in g} x_i subject to sum_{i in h} x_i = d_h^2.
    Small programs are solved by enumerating basic solutions; larger ones
    with a dense two-phase simplex using Bland's rule.
    """
    H = sorted(set(H))
    gset = gs.groups[g]
    pos = {c: j for j, c in enumerate(gset)}
    for h in H:
        if not set(gs.groups[h]) <= set(gset):
            raise ValueError(f"group {h} is not contained in group {g}")
    A = np.zeros((len(H), len(gset)))
    for r, h in enumerate(H):
        for c in gs.groups[h]:
            A[r, pos[c]] = 1.0
    b = gs.weights[H] ** 2
    if not H:
        return 0.0
    if len(H) <= 12 and math.comb(len(gset), min(len(H), len(gset))) <= max_vertex_bases:
        value = _lp_vertex_enumeration(A, b)
    else:
        value = _lp_simplex_bland(A, b, np.ones(len(gset)))
    return math.sqrt(max(value, 0.0))


def _independent_rows(A, b, tol=1e-10):
    """Drop linearly dependent equality rows; raise if they are inconsistent."""
    if A.shape[0] == 0:
        return A, b
    _, R, piv = linalg.qr(A.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R)) if R.size else np.zeros(0)
    rank = int(np.sum(diag > tol * max(1.0, diag.max() if diag.size else 1.0)))
    keep = np.sort(piv[:rank])
    A_r, b_r = A[keep], b[keep]
    # every dropped row must be implied by the kept ones
    coef, *_ = linalg.lstsq(A_r.T, A.T)
    if not np.allclose(coef.T @ b_r, b, atol=1e-9 * max(1.0, np.abs(b).max())):
        raise Infeasible("equality constraints are inconsistent")
    return A_r, b_r


def _lp_vertex_enumeration(A, b, tol=1e-10):
    A, b = _independent_rows(A, b)
    r, n = A.shape
    best = math.inf
    for cols in itertools.combinations(range(n), r):
        sub = A[:, cols]
        if abs(np.linalg.det(sub)) < tol:
            continue
        xs = np.linalg.solve(sub, b)
        if np.all(xs >= -1e-12):
            val = float(np.sum(np.clip(xs, 0.0, None)))
            if val < best - 1e-15:
                best = val
    if not math.isfinite(best):
        raise Infeasible("no nonnegative solution to the equality system")
    return best


def _lp_simplex_bland(A, b, c, tol=1e-10, max_iter=10_000):
    """min c.x s.t. A x = b, x >= 0, by two-phase tableau simplex with Bland's rule."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    r, n = A.shape
    # phase 1: artificial variables n..n+r-1
    T = np.zeros((r + 1, n + r + 1))
    T[:r, :n] = A
    T[:r, n : n + r] = np.eye(r)
    T[:r, -1] = b
    basis = list(range(n, n + r))
    cost1 = np.concatenate([np.zeros(n), np.ones(r)])
    _simplex_run(T, basis, cost1, tol, max_iter)
    if _objective(T, basis, cost1) > 1e-9 * max(1.0, b.sum()):
        raise Infeasible("no nonnegative solution to the equality system")
    # drive artificial variables out of the basis where possible
    for row, var in enumerate(list(basis)):
        if var >= n:
            cand = [j for j in range(n) if abs(T[row, j]) > tol]
            if cand:
                _pivot(T, basis, row, cand[0])
    keep_rows = [i for i, var in enumerate(basis) if var < n]
    T2 = np.zeros((len(keep_rows) + 1, n + 1))
    T2[:-1, :n] = T[keep_rows, :n]
    T2[:-1, -1] = T[keep_rows, -1]
    basis2 = [basis[i] for i in keep_rows]
    _simplex_run(T2, basis2, np.asarray(c, dtype=float), tol, max_iter)
    return _objective(T2, basis2, np.asarray(c, dtype=float))


def _objective(T, basis, cost):
    return float(sum(cost[v] * T[i, -1] for i, v in enumerate(basis)))


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _simplex_run(T, basis, cost, tol, max_iter):
    nvar = T.shape[1] - 1
    rows = T.shape[0] - 1
    for _ in range(max_iter):
        cb = np.array([cost[v] for v in basis])
        reduced = cost[:nvar] - cb @ T[:rows, :nvar]
        entering = next((j for j in range(nvar) if reduced[j] < -tol), None)
        if entering is None:
            return
        col = T[:rows, entering]
        ratios = [
            (T[i, -1] / col[i], basis[i], i) for i in range(rows) if col[i] > tol
        ]
        if not ratios:
            raise Infeasible("linear program is unbounded")
        best = min(q for q, _, _ in ratios)
        # Bland: among ties leave the basic variable with the lowest index
        leave = min((v, i) for q, v, i in ratios if q <= best + tol)[1]
        _pivot(T, basis, leave, entering)
    raise RuntimeError("simplex iteration budget exhausted")
