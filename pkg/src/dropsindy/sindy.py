"""Sequentially thresholded least squares and its group-sparse variant.

A fit regresses one target derivative onto the columns of a candidate
library.  Plain STLSQ alternates least squares with hard thresholding of small
coefficients.  The group variant fits several trajectories at once and prunes
a library term for *all* of them when the salience of its coefficient row
(by default the l1 norm across trajectories) falls below the threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from .data_model import Trajectory
from .diffsmooth import DerivativeSet, SmootherConfig, compute_derivatives
from .errors import ConfigurationError, ValidationError
from .integrate import rk4
from .library import (
    DEFAULT_STATE_NAMES,
    LibraryMatrix,
    TermDescriptor,
    evaluate_library,
    polynomial_terms,
)

EMPTY_MODEL = "empty model"
ILL_CONDITIONED = "ill-conditioned least squares (minimum-norm solution used)"
NOT_CONVERGED = "support did not stabilise within max_iterations"
DIVERGED = "forecast diverged"

COND_LIMIT = 1e10
DIVERGENCE_LIMIT = 1e9

SALIENCE: dict[str, Callable[[np.ndarray], float]] = {
    "l1": lambda row: float(np.sum(np.abs(row))),
    "l2": lambda row: float(np.linalg.norm(row)),
    "mean-abs": lambda row: float(np.mean(np.abs(row))),
    "median-abs": lambda row: float(np.median(np.abs(row))),
    "quantile-25": lambda row: float(np.quantile(np.abs(row), 0.25)),
}


@dataclass(frozen=True)
class FitConfig:
    threshold: float = 0.1
    max_iterations: int = 20
    salience: Literal["l1", "l2", "mean-abs", "median-abs", "quantile-25"] = "l1"
    # Solve on unit-norm columns and rescale before thresholding.  Changes
    # conditioning only; thresholds still apply to physical coefficients.
    normalize: bool = True

    def __post_init__(self):
        if not self.threshold >= 0:
            raise ConfigurationError(f"threshold must be >= 0, got {self.threshold}")
        if self.max_iterations < 1:
            raise ConfigurationError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.salience not in SALIENCE:
            raise ConfigurationError(
                f"salience must be one of {sorted(SALIENCE)}, got {self.salience!r}"
            )


@dataclass(frozen=True, eq=False)
class SparseModel:
    """One governing equation ``target = sum_j coefficients[j] * terms[j]``."""

    coefficients: np.ndarray
    terms: tuple[TermDescriptor, ...]
    state_names: tuple[str, ...] = DEFAULT_STATE_NAMES
    target_name: str = "v'"
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        coefs = np.array(self.coefficients, dtype=float)
        coefs.setflags(write=False)
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "state_names", tuple(self.state_names))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        if coefs.shape != (len(self.terms),):
            raise ValidationError(
                f"{coefs.size} coefficients for {len(self.terms)} terms"
            )

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.coefficients))

    @property
    def n_active(self) -> int:
        return len(self.support)

    @property
    def is_empty(self) -> bool:
        return self.n_active == 0

    def coefficient(self, name: str) -> float:
        for t, c in zip(self.terms, self.coefficients):
            if t.name == name:
                return float(c)
        raise KeyError(name)

    def with_warnings(self, *extra: str) -> "SparseModel":
        merged = tuple(dict.fromkeys(self.warnings + extra))
        return SparseModel(self.coefficients, self.terms, self.state_names, self.target_name, merged)

    def equation(self, precision: int = 2, order: Sequence[int] | None = None) -> str:
        """Readable form, e.g. ``v' = -9.79 - 0.48 v``."""
        idx = [i for i in (order if order is not None else range(len(self.terms))) if self.coefficients[i] != 0]
        if not idx:
            return f"{self.target_name} = 0"
        parts = []
        for k, i in enumerate(idx):
            c = float(self.coefficients[i])
            mag = f"{abs(c):.{precision}f}"
            body = mag if self.terms[i].is_constant else f"{mag} {self.terms[i].name}"
            if k == 0:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append(("- " if c < 0 else "+ ") + body)
        return f"{self.target_name} = " + " ".join(parts)

    def __str__(self) -> str:
        return self.equation()

    def to_dict(self) -> dict:
        return {
            "target": self.target_name,
            "state_names": list(self.state_names),
            "terms": [
                {"name": t.name, "exponents": list(t.exponents), "coefficient": float(c)}
                for t, c in zip(self.terms, self.coefficients)
            ],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SparseModel":
        terms = [TermDescriptor(tuple(t["exponents"]), t["name"]) for t in data["terms"]]
        coefs = [t["coefficient"] for t in data["terms"]]
        return cls(
            coefs,
            terms,
            tuple(data.get("state_names", DEFAULT_STATE_NAMES)),
            data.get("target", "v'"),
            tuple(data.get("warnings", ())),
        )


@dataclass(frozen=True, eq=False)
class GroupFitResult:
    models: tuple[SparseModel, ...]
    shared_support: frozenset[int]
    iterations: int = 0

    @property
    def terms(self) -> tuple[TermDescriptor, ...]:
        return self.models[0].terms

    def coefficient_matrix(self) -> np.ndarray:
        """Coefficients as (n_terms, n_models)."""
        return np.column_stack([m.coefficients for m in self.models])


def least_squares(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, tuple[str, ...]]:
    """QR solve of ``min ||A x - b||``; minimum-norm SVD fallback when the
    matrix is rank deficient or its condition number exceeds ``COND_LIMIT``."""
    m, n = A.shape
    if n == 0:
        return np.zeros(0), ()
    s = np.linalg.svd(A, compute_uv=False)
    if m >= n and s[-1] > 0 and s[0] / s[-1] <= COND_LIMIT:
        q, r = np.linalg.qr(A)
        return np.linalg.solve(r, q.T @ b), ()
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    return x, (ILL_CONDITIONED,)


def _solve_active(A: np.ndarray, b: np.ndarray, normalize: bool):
    if not normalize:
        return least_squares(A, b)
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0] = 1.0
    x, notes = least_squares(A / scale, b)
    return x / scale, notes


def _check_system(library: LibraryMatrix, targets: np.ndarray) -> np.ndarray:
    targets = np.asarray(targets, dtype=float).ravel()
    if targets.size != library.n_samples:
        raise ValidationError(
            f"library has {library.n_samples} rows but targets have {targets.size}"
        )
    if not (np.all(np.isfinite(library.values)) and np.all(np.isfinite(targets))):
        raise ValidationError("library or targets contain non-finite values")
    return targets


def stlsq(
    library: LibraryMatrix,
    targets,
    cfg: FitConfig = FitConfig(),
    state_names: Sequence[str] = DEFAULT_STATE_NAMES,
    target_name: str = "v'",
) -> SparseModel:
    """Sequentially thresholded least squares for a single target."""
    b = _check_system(library, targets)
    A = library.values
    p = A.shape[1]
    active = np.ones(p, dtype=bool)
    xi = np.zeros(p)
    notes: set[str] = set()

    sol, w = _solve_active(A, b, cfg.normalize)
    xi[:] = sol
    notes.update(w)
    converged = False
    for _ in range(cfg.max_iterations):
        keep = active & (np.abs(xi) >= cfg.threshold)
        if np.array_equal(keep, active):
            converged = True
            break
        active = keep
        xi[:] = 0.0
        if not active.any():
            converged = True
            break
        sol, w = _solve_active(A[:, active], b, cfg.normalize)
        xi[active] = sol
        notes.update(w)
    xi[~active] = 0.0

    warn = [n for n in (ILL_CONDITIONED,) if n in notes]
    if not converged:
        warn.append(NOT_CONVERGED)
    if not np.any(xi):
        warn.append(EMPTY_MODEL)
    return SparseModel(xi, library.terms, tuple(state_names), target_name, tuple(warn))


def group_stlsq(
    libraries: Sequence[LibraryMatrix],
    targets: Sequence,
    cfg: FitConfig = FitConfig(threshold=1.5),
    state_names: Sequence[str] = DEFAULT_STATE_NAMES,
    target_name: str = "v'",
) -> GroupFitResult:
    """Jointly sparse STLSQ over several trajectories.

    Every trajectory gets its own coefficients, but all share one active term
    set.  Each pass solves unregularised least squares per trajectory on the
    active terms, then removes every term whose coefficient row has salience
    below ``cfg.threshold``; iteration stops when nothing is removed.
    """
    libraries = list(libraries)
    targets = list(targets)
    if not libraries:
        raise ValueError("need at least one trajectory")
    if len(libraries) != len(targets):
        raise ValueError(f"{len(libraries)} libraries but {len(targets)} target vectors")
    terms = libraries[0].terms
    for lib in libraries[1:]:
        if lib.terms != terms:
            raise ValueError("all libraries must share the same term list")
    bs = [_check_system(lib, t) for lib, t in zip(libraries, targets)]
    salience = SALIENCE[cfg.salience]

    p = len(terms)
    active = np.ones(p, dtype=bool)
    xi = np.zeros((p, len(libraries)))
    notes: list[set[str]] = [set() for _ in libraries]
    converged = False
    iterations = 0
    while iterations < cfg.max_iterations:
        iterations += 1
        xi[:] = 0.0
        if active.any():
            for j, (lib, b) in enumerate(zip(libraries, bs)):
                sol, w = _solve_active(lib.values[:, active], b, cfg.normalize)
                xi[active, j] = sol
                notes[j].update(w)
        keep = active.copy()
        for i in np.flatnonzero(active):
            if salience(xi[i]) < cfg.threshold:
                keep[i] = False
        if np.array_equal(keep, active):
            converged = True
            break
        active = keep
    if not converged:
        # Final solve so the reported coefficients belong to the final support.
        xi[:] = 0.0
        if active.any():
            for j, (lib, b) in enumerate(zip(libraries, bs)):
                xi[active, j], _ = _solve_active(lib.values[:, active], b, cfg.normalize)
    xi[~active] = 0.0

    models = []
    for j in range(len(libraries)):
        warn = [n for n in (ILL_CONDITIONED,) if n in notes[j]]
        if not converged:
            warn.append(NOT_CONVERGED)
        if not np.any(xi[:, j]):
            warn.append(EMPTY_MODEL)
        models.append(SparseModel(xi[:, j], terms, tuple(state_names), target_name, tuple(warn)))
    return GroupFitResult(tuple(models), frozenset(int(i) for i in np.flatnonzero(active)), iterations)


def fit_first_order(
    states,
    derivatives,
    degree: int,
    cfg: FitConfig = FitConfig(),
    state_names: Sequence[str] | None = None,
) -> list[SparseModel]:
    """STLSQ on each column of a first-order system ``X' = Phi(X) Xi``."""
    states = np.asarray(states, dtype=float)
    derivatives = np.asarray(derivatives, dtype=float)
    n = states.shape[1]
    if state_names is None:
        state_names = tuple(f"x{k + 1}" for k in range(n))
    lib = evaluate_library(states, polynomial_terms(n, degree, state_names))
    return [
        stlsq(lib, derivatives[:, k], cfg, state_names, f"{state_names[k]}'")
        for k in range(n)
    ]


def second_order_terms(degree: int = 3, use_height: bool = True) -> list[TermDescriptor]:
    """Monomials in ``(x, v)``; with ``use_height=False`` only powers of ``v``."""
    terms = polynomial_terms(2, degree, DEFAULT_STATE_NAMES)
    if not use_height:
        terms = [t for t in terms if t.exponents[0] == 0]
    return terms


def second_order_system(
    traj: Trajectory,
    cfg_smooth: SmootherConfig = SmootherConfig(),
    degree: int = 3,
    smooth: bool = True,
    use_height: bool = True,
) -> tuple[LibraryMatrix, np.ndarray, DerivativeSet]:
    """Library on ``(x, v)`` and acceleration targets for one drop."""
    ds = compute_derivatives(traj, cfg_smooth, smooth=smooth)
    lib = evaluate_library(ds.states, second_order_terms(degree, use_height))
    return lib, ds.accelerations, ds


def fit_second_order(
    traj: Trajectory,
    cfg_smooth: SmootherConfig = SmootherConfig(),
    cfg_fit: FitConfig = FitConfig(),
    degree: int = 3,
    smooth: bool = True,
    use_height: bool = True,
) -> SparseModel:
    """Learn ``v' = g(x, v)`` for one drop; ``x' = v`` holds by construction.

    ``use_height=False`` restricts the library to powers of ``v``, i.e. the
    fit sees only the velocity profile.
    """
    lib, acc, _ = second_order_system(traj, cfg_smooth, degree, smooth, use_height)
    return stlsq(lib, acc, cfg_fit)


def fit_group_second_order(
    trajectories: Sequence[Trajectory],
    cfg_smooth: SmootherConfig = SmootherConfig(),
    cfg_fit: FitConfig = FitConfig(threshold=1.5),
    degree: int = 3,
    smooth: bool = True,
    use_height: bool = True,
) -> GroupFitResult:
    systems = [second_order_system(t, cfg_smooth, degree, smooth, use_height) for t in trajectories]
    return group_stlsq([s[0] for s in systems], [s[1] for s in systems], cfg_fit)


def predict_derivative(model: SparseModel, state) -> float:
    state = np.asarray(state, dtype=float)
    total = 0.0
    for c, term in zip(model.coefficients, model.terms):
        if c != 0.0:
            total += c * float(np.prod(state ** np.asarray(term.exponents)))
    return float(total)


@dataclass(frozen=True, eq=False)
class ModelForecast:
    times: np.ndarray
    heights: np.ndarray
    velocities: np.ndarray
    diverged: bool = False
    diverged_at: float | None = None

    def to_trajectory(self, ball_id: str = "forecast", drop_id: int = 1) -> Trajectory:
        return Trajectory(self.times, self.heights, ball_id, drop_id)


def simulate_model(
    model: SparseModel,
    x0: float,
    v0: float,
    dt: float,
    n_steps: int,
    substeps: int = 10,
) -> ModelForecast:
    """Integrate ``x' = v, v' = model(x, v)`` with RK4 (``dt / substeps`` steps).

    If the state becomes non-finite or exceeds 1e9 in magnitude the forecast
    is truncated at the last good sample and flagged as diverged.
    """
    # Plain-float evaluation: this runs ~10^4 times per forecast.
    active = [(float(model.coefficients[i]), model.terms[i].exponents) for i in model.support]

    def rhs(y):
        x, v = float(y[0]), float(y[1])
        acc = 0.0
        try:
            for c, (ex, ev) in active:
                acc += c * x**ex * v**ev
        except OverflowError:
            acc = math.nan
        return np.array([v, acc])

    res = rk4(rhs, [x0, v0], dt, n_steps, substeps, blowup=DIVERGENCE_LIMIT)
    at = float(res.diverged_step * dt) if res.diverged else None
    return ModelForecast(res.times, res.states[:, 0], res.states[:, 1], res.diverged, at)


@dataclass(frozen=True, eq=False)
class SweepEntry:
    delta: float
    models: tuple[SparseModel, ...] = ()
    term_count: int | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def sparsity_sweep(
    trajectories: Trajectory | Sequence[Trajectory],
    delta_grid: Sequence[float],
    pipeline: Literal["plain", "group"] = "plain",
    cfg_smooth: SmootherConfig = SmootherConfig(),
    degree: int = 3,
    base: FitConfig = FitConfig(),
    smooth: bool = True,
    use_height: bool = True,
) -> list[SweepEntry]:
    """Fit once per threshold.

    ``term_count`` is the number of distinct active terms over all models
    (the shared support size for group fits).  A failure at one threshold is
    recorded in that entry and the sweep continues.
    """
    if isinstance(trajectories, Trajectory):
        trajectories = [trajectories]
    deltas = [float(d) for d in delta_grid]
    if not deltas:
        raise ConfigurationError("delta grid is empty")
    if any(not d > 0 for d in deltas):
        raise ConfigurationError("sparsity thresholds must be positive")
    if pipeline not in ("plain", "group"):
        raise ConfigurationError(f"unknown pipeline {pipeline!r}")

    systems = [second_order_system(t, cfg_smooth, degree, smooth, use_height) for t in trajectories]
    out = []
    for d in deltas:
        cfg = FitConfig(d, base.max_iterations, base.salience, base.normalize)
        try:
            if pipeline == "group":
                res = group_stlsq([s[0] for s in systems], [s[1] for s in systems], cfg)
                models, count = res.models, len(res.shared_support)
            else:
                models = tuple(stlsq(s[0], s[1], cfg) for s in systems)
                count = len(set().union(*(m.support for m in models)))
            out.append(SweepEntry(d, tuple(models), count))
        except Exception as exc:  # recorded per threshold; the sweep goes on
            out.append(SweepEntry(d, error=f"{type(exc).__name__}: {exc}"))
    return out
