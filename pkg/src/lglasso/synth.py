"""Synthetic support-recovery experiments.

A :class:`SynthSpec` fixes a group layout, a true support, the sample size
and the noise rule.  Each replicate draws its own design, coefficients and
noise from a random stream keyed by ``(seed, replicate)``, fits a full
regularisation path on a shared absolute grid and records which covariates
were selected along it.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis import frequency_from_supports, recovery_error
from .groups import (
    GroupSet,
    WeightScheme,
    apply_weight_scheme,
    groups_from_chain_windows,
    groups_from_chain_windows_upto,
    groups_from_overlapping_chain,
)
from .solver import _Problem, _fit, absolute_grid

LAYOUT_KINDS = ("overlap_chain", "windows", "windows_upto", "singletons")


@dataclass(frozen=True)
class SynthSpec:
    """Design of a synthetic regression experiment.

    Parameters
    ----------
    p : int
        Number of covariates.  For ``overlap_chain`` it must match the layout.
    layout : dict
        ``{"kind": "overlap_chain", "group_size", "overlap", "n_groups"}``,
        ``{"kind": "windows", "k"}``, ``{"kind": "windows_upto", "kmax"}`` or
        ``{"kind": "singletons"}``.
    support : dict
        ``{"groups": [...]}`` (1-based positions in the layout order of an
        ``overlap_chain``) or ``{"intervals": [[a, b], ...]}`` (inclusive,
        1-based covariates).
    n : int
        Training sample size.
    noise : str or float
        ``"abs_mean_signal"`` sets the noise level to the absolute empirical
        mean of the noiseless training responses; a number is used as is.
    seed : int
        Master seed.
    n_test : int
        Size of the held-out test sample.
    weights : str
        Weight scheme, parsed by :meth:`WeightScheme.parse`.
    """

    p: int
    layout: dict
    support: dict
    n: int
    noise: object = "abs_mean_signal"
    seed: int = 0
    n_test: int = 100
    weights: str = "uniform"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.layout.get("kind") not in LAYOUT_KINDS:
            raise ValueError(f"layout.kind must be one of {LAYOUT_KINDS}")
        if set(self.support) - {"groups", "intervals"} or len(self.support) != 1:
            raise ValueError("support must have exactly one of the keys 'groups' or 'intervals'")
        if not (self.noise == "abs_mean_signal" or isinstance(self.noise, (int, float))):
            raise ValueError("noise must be 'abs_mean_signal' or a number")
        WeightScheme.parse(self.weights)
        self.true_support()

    def group_set(self) -> GroupSet:
        kind = self.layout["kind"]
        if kind == "overlap_chain":
            gs = groups_from_overlapping_chain(
                self.layout["group_size"], self.layout["overlap"], self.layout["n_groups"]
            )
            if gs.p != self.p:
                raise ValueError(f"overlap_chain layout spans {gs.p} covariates but p = {self.p}")
        elif kind == "windows":
            gs = groups_from_chain_windows(self.p, self.layout["k"])
        elif kind == "windows_upto":
            gs = groups_from_chain_windows_upto(self.p, self.layout["kmax"])
        else:
            gs = groups_from_chain_windows(self.p, 1)
        return apply_weight_scheme(gs, WeightScheme.parse(self.weights))

    def true_support(self) -> frozenset:
        """True support as 1-based covariates."""
        if "intervals" in self.support:
            cov = set()
            for a, b in self.support["intervals"]:
                if not 1 <= a <= b <= self.p:
                    raise ValueError(f"support interval [{a}, {b}] outside [1, {self.p}]")
                cov.update(range(a, b + 1))
            return frozenset(cov)
        if self.layout["kind"] != "overlap_chain":
            raise ValueError("support by group index needs an overlap_chain layout")
        size, ov, ng = self.layout["group_size"], self.layout["overlap"], self.layout["n_groups"]
        step = size - ov
        cov = set()
        for k in self.support["groups"]:
            if not 1 <= k <= ng:
                raise ValueError(f"support group {k} outside [1, {ng}]")
            cov.update(range((k - 1) * step + 1, (k - 1) * step + size + 1))
        return frozenset(cov)

    def with_(self, **changes) -> "SynthSpec":
        d = asdict(self)
        d.update(changes)
        return SynthSpec(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    w_true: np.ndarray
    b_true: float
    sigma: float
    X_test: np.ndarray
    y_test: np.ndarray
    support: frozenset


def replicate_rng(seed, replicate) -> np.random.Generator:
    """Independent stream for one replicate; unaffected by the replicate count."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(replicate)]))


def generate(spec: SynthSpec, replicate=0) -> Dataset:
    """Draw one dataset.

    Design entries, support coefficients and the offset are i.i.d. standard
    normal; the response is ``Xw + b`` plus Gaussian noise of level ``sigma``.
    """
    rng = replicate_rng(spec.seed, replicate)
    p, n = spec.p, spec.n
    support = spec.true_support()
    idx = np.asarray(sorted(support), dtype=int) - 1
    X = rng.standard_normal((n, p))
    w = np.zeros(p)
    w[idx] = rng.standard_normal(idx.size)
    b = float(rng.standard_normal())
    signal = X @ w + b
    sigma = abs(float(signal.mean())) if spec.noise == "abs_mean_signal" else float(spec.noise)
    y = signal + sigma * rng.standard_normal(n)
    X_test = rng.standard_normal((spec.n_test, p))
    y_test = X_test @ w + b + sigma * rng.standard_normal(spec.n_test)
    return Dataset(X, y, w, b, sigma, X_test, y_test, support)


def cv_folds(n, n_folds, rng) -> list[np.ndarray]:
    """Random partition of ``range(n)`` into ``n_folds`` nearly equal folds."""
    if not 2 <= n_folds <= n:
        raise ValueError(f"need 2 <= n_folds <= n, got {n_folds} folds for n = {n}")
    perm = rng.permutation(n)
    return [np.sort(f) for f in np.array_split(perm, n_folds)]


def grid_from_spec(grid) -> np.ndarray:
    """Decreasing lambda grid from an array or ``{"lo", "hi", "n_points"}``."""
    if isinstance(grid, dict):
        extra = set(grid) - {"kind", "lo", "hi", "n_points"}
        if extra or grid.get("kind", "absolute") != "absolute":
            raise ValueError("grid must be {'lo', 'hi', 'n_points'} (absolute, log-spaced)")
        return absolute_grid(float(grid["lo"]), float(grid["hi"]), int(grid["n_points"]))
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 1 or np.any(g <= 0) or np.any(np.diff(g) > 0):
        raise ValueError("grid must be a positive non-increasing sequence")
    return g


def _path_fits(X, y, gs, grid, opts):
    prob = _Problem(X, y, "squared", gs, True)
    fits = []
    prev = None
    for lam in grid:
        res = _fit(prob, lam, opts.get("kkt_tol", 1e-6), opts.get("max_outer", 100),
                   opts.get("max_inner", 10_000), prev, False, 200, True)
        fits.append(res)
        prev = res
    return fits


@dataclass
class ReplicateRecord:
    """Everything measured on one replicate; aggregates are recomputed from these."""

    replicate: int
    sigma: float
    supports: list
    group_supports: list
    recovery_errors: list
    test_mse: list
    cv_mse: list
    max_kkt_residual: float

    @property
    def best_index(self) -> int | None:
        if not self.cv_mse:
            return None
        return int(np.argmin(self.cv_mse))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["supports"] = [sorted(s) for s in self.supports]
        d["group_supports"] = [sorted(s) for s in self.group_supports]
        return d

    @classmethod
    def from_dict(cls, d) -> "ReplicateRecord":
        d = dict(d)
        d["supports"] = [set(s) for s in d["supports"]]
        d["group_supports"] = [[tuple(g) for g in s] for s in d["group_supports"]]
        return cls(**d)


def _run_replicate(args):
    spec, gs, grid, r, cv, opts = args
    data = generate(spec, r)
    fits = _path_fits(data.X, data.y, gs, grid, opts)
    supports = [f.support() for f in fits]
    group_supports = [[gs.groups[g] for g in f.selected_groups()] for f in fits]
    errs = [recovery_error(s, data.support, spec.p) for s in supports]
    test_mse = [float(np.mean((data.y_test - data.X_test @ f.w - f.intercept) ** 2)) for f in fits]
    kkt = max(f.kkt_residual for f in fits)
    cv_mse = []
    if cv:
        rng = replicate_rng(spec.seed, r).spawn(1)[0]
        folds = cv_folds(spec.n, cv, rng)
        total = np.zeros(grid.size)
        for fold in folds:
            train = np.setdiff1d(np.arange(spec.n), fold)
            ffits = _path_fits(data.X[train], data.y[train], gs, grid, opts)
            kkt = max(kkt, max(f.kkt_residual for f in ffits))
            total += [float(np.sum((data.y[fold] - data.X[fold] @ f.w - f.intercept) ** 2)) for f in ffits]
        cv_mse = (total / spec.n).tolist()
    return ReplicateRecord(r, data.sigma, supports, group_supports, errs, test_mse, cv_mse, kkt)


@dataclass
class ExperimentReport:
    """Per-replicate records plus aggregates over them."""

    spec: SynthSpec
    grid: np.ndarray
    replicates: list
    label: str = ""
    _freq: np.ndarray = field(default=None, repr=False)

    @property
    def true_support(self) -> frozenset:
        return self.spec.true_support()

    def selection_frequency(self) -> np.ndarray:
        """``(p, n_grid)`` fraction of replicates selecting each covariate."""
        if self._freq is None:
            self._freq = frequency_from_supports([r.supports for r in self.replicates], self.spec.p)
        return self._freq

    def exact_pattern_frequency(self) -> np.ndarray:
        """Fraction of replicates whose selected support equals the true one, per grid point."""
        T = set(self.true_support)
        hits = np.array([[s == T for s in r.supports] for r in self.replicates], dtype=float)
        return hits.mean(axis=0)

    def best_exact_pattern_frequency(self) -> float:
        return float(self.exact_pattern_frequency().max())

    def summary(self) -> dict:
        """Means (and standard deviations) of the statistics at the cross-validated lambda."""
        rec_min = [min(r.recovery_errors) for r in self.replicates]
        out = {"label": self.label, "n_replicates": len(self.replicates),
               "rec_err_min": float(np.mean(rec_min)), "rec_err_min_std": float(np.std(rec_min)),
               "best_exact_pattern_frequency": self.best_exact_pattern_frequency()}
        if all(r.cv_mse for r in self.replicates):
            k = [r.best_index for r in self.replicates]
            stats = {
                "mse": [r.test_mse[i] for r, i in zip(self.replicates, k)],
                "lambda": [float(self.grid[i]) for i in k],
                "model_size": [len(r.supports[i]) for r, i in zip(self.replicates, k)],
                "rec_err": [r.recovery_errors[i] for r, i in zip(self.replicates, k)],
            }
            for name, vals in stats.items():
                out[name] = float(np.mean(vals))
                out[name + "_std"] = float(np.std(vals))
        return out


def run_recovery_experiment(spec: SynthSpec, grid, n_replicates, *, cv=5, jobs=1, label="",
                            gs: GroupSet | None = None, **solver_opts) -> ExperimentReport:
    """Fit a path per replicate on a shared grid and collect supports and errors.

    Parameters
    ----------
    spec : SynthSpec
    grid : array_like or dict
        Shared decreasing lambda grid (see :func:`grid_from_spec`).
    n_replicates : int
    cv : int
        Number of cross-validation folds used to pick lambda; 0 disables it.
    jobs : int
        Worker processes.  Results do not depend on this value.
    gs : GroupSet, optional
        Overrides the group set built from ``spec``.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be at least 1")
    grid = grid_from_spec(grid)
    if gs is None:
        gs = spec.group_set()
    tasks = [(spec, gs, grid, r, cv, solver_opts) for r in range(n_replicates)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_run_replicate, tasks))
    else:
        records = [_run_replicate(t) for t in tasks]
    return ExperimentReport(spec, grid, records, label=label)


def run_weight_experiment(spec: SynthSpec, schemes, grid, n_replicates, **kw) -> dict:
    """One :func:`run_recovery_experiment` per weight scheme, keyed by scheme label."""
    schemes = [WeightScheme.parse(s) if isinstance(s, str) else s for s in schemes]
    if not schemes:
        raise ValueError("need at least one weight scheme")
    out = {}
    for s in schemes:
        sub = spec.with_(weights=s.label if s.kind == "c_scheme" else s.kind)
        out[s.label] = run_recovery_experiment(sub, grid, n_replicates, label=s.label, **kw)
    return out


def abs_sum_event(eps) -> np.ndarray:
    """Rows of ``eps`` (shape (N, 3)) with ``|e1| + |e2| < |e3|``."""
    a = np.abs(np.asarray(eps, dtype=float))
    return a[:, 0] + a[:, 1] < a[:, 2]


def abs_sum_event_probability(n_samples, seed=0, chunk=1_000_000) -> float:
    """Monte Carlo estimate of ``P(|e1| + |e2| < |e3|)`` for i.i.d. standard normals."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    hits = 0
    left = int(n_samples)
    while left:
        k = min(chunk, left)
        hits += int(abs_sum_event(rng.standard_normal((k, 3))).sum())
        left -= k
    return hits / n_samples

