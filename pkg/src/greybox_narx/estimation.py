"""Least-squares estimation and the three structure-selection objectives.

For a candidate structure the objectives are its term count, the mean squared
free-run error on the validation record, and the summed squared deviation of
its static curve from a reference curve.  Any numerical failure (rank
deficiency, divergence, degenerate static gain) maps to :data:`PENALTY` so
that the search can always rank a candidate.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular

from .errors import (
    DataError,
    DegenerateStaticGain,
    Diverged,
    NotStaticPolynomial,
    RankDeficient,
    SeriesTooShort,
)
from .model import (
    DEGENERATE_GAIN_TOL,
    ModelStructure,
    StaticPolynomial,
    TermPool,
    TermSpec,
    eval_static,
    is_static_admissible,
    static_polynomial,
)

PENALTY = 1e12
RANK_TOL = 1e-9
DIVERGENCE_FACTOR = 100.0


@dataclass(frozen=True, eq=False)
class IOSeries:
    """Sampled input/output record."""

    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        y = np.array(self.y, dtype=float)
        if u.ndim != 1 or u.shape != y.shape:
            raise DataError(f"u and y must be 1-d of equal length, got {u.shape} and {y.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise DataError("series contains non-finite samples")
        u.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return len(self.u)

    def __getitem__(self, sl: slice) -> "IOSeries":
        return IOSeries(self.u[sl], self.y[sl])


@dataclass(frozen=True, eq=False)
class StaticCurve:
    """Reference steady-state samples ``(u_bar, y_bar)``."""

    u_bar: np.ndarray
    y_bar: np.ndarray

    def __post_init__(self):
        u = np.array(self.u_bar, dtype=float)
        y = np.array(self.y_bar, dtype=float)
        if u.ndim != 1 or u.shape != y.shape:
            raise DataError("static curve arrays must be 1-d of equal length")
        if len(u) < 2:
            raise DataError("static curve needs at least 2 samples")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise DataError("static curve contains non-finite samples")
        u.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "u_bar", u)
        object.__setattr__(self, "y_bar", y)

    def __len__(self) -> int:
        return len(self.u_bar)


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    estimation: IOSeries
    validation: IOSeries
    static_curve: StaticCurve

    def check(self, max_lag: int, n_terms: int = 0) -> None:
        if len(self.estimation) <= max_lag + n_terms:
            raise SeriesTooShort(
                f"estimation record has {len(self.estimation)} samples, "
                f"needs more than {max_lag + n_terms}")
        if len(self.validation) <= max_lag:
            raise SeriesTooShort(
                f"validation record has {len(self.validation)} samples, needs more than {max_lag}")


@dataclass(frozen=True)
class ObjectiveVector:
    """``(xi, e_dyn, e_static)``; compare with :func:`greybox_narx.moea.dominates`."""

    xi: int
    e_dyn: float
    e_static: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (float(self.xi), self.e_dyn, self.e_static)

    @property
    def is_penalized(self) -> bool:
        return self.e_dyn >= PENALTY or self.e_static >= PENALTY

    @classmethod
    def penalized(cls, xi: int) -> "ObjectiveVector":
        return cls(int(xi), PENALTY, PENALTY)


def regressor_matrix(terms, u: np.ndarray, y: np.ndarray, start: int) -> np.ndarray:
    """Evaluate each term at samples ``start..N-1`` from measured data."""
    n = len(u)
    if n <= start:
        raise SeriesTooShort(f"series of length {n} too short for lag {start}")
    out = np.ones((n - start, len(terms)))
    for j, t in enumerate(terms):
        for lag in t.output_lags:
            out[:, j] *= y[start - lag:n - lag]
        for lag in t.input_lags:
            out[:, j] *= u[start - lag:n - lag]
    return out


def build_regression(structure: ModelStructure, series: IOSeries):
    """One-step-ahead regression ``Y = Phi theta``, starting at the pool's max lag."""
    start = structure.pool.config.max_lag
    phi = regressor_matrix(structure.terms, series.u, series.y, start)
    return phi, np.array(series.y[start:])


def solve_least_squares(phi: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Least squares by column-pivoted QR on unit-norm columns.

    Raises :class:`RankDeficient` if the numerical rank is below the number of
    columns.
    """
    rows, cols = phi.shape
    if cols == 0:
        return np.zeros(0)
    if rows < cols:
        raise RankDeficient(f"{rows} equations for {cols} unknowns")
    norms = np.linalg.norm(phi, axis=0)
    if not np.all(norms > 0) or not np.all(np.isfinite(norms)):
        raise RankDeficient("zero or non-finite regressor column")
    q, r, piv = qr(phi / norms, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag[-1] <= RANK_TOL * diag[0]:
        raise RankDeficient(f"numerical rank below {cols}")
    z = solve_triangular(r, q.T @ target)
    theta = np.empty(cols)
    theta[piv] = z
    return theta / norms


def estimate(structure: ModelStructure, series: IOSeries) -> ModelStructure:
    phi, target = build_regression(structure, series)
    return structure.with_theta(solve_least_squares(phi, target))


def _simulate(y_seed, u_parts: np.ndarray, y_lags, theta: np.ndarray, bound: float) -> np.ndarray:
    """Recursive prediction feeding back its own outputs.

    ``u_parts[k, j]`` is the input-only factor of term ``j`` at step ``k``;
    ``y_lags[j]`` lists the output lags multiplying it.
    """
    start = len(y_seed)
    steps = u_parts.shape[0]
    exo = [j for j, lags in enumerate(y_lags) if not lags]
    dyn = [j for j, lags in enumerate(y_lags) if lags]
    base = (u_parts[:, exo] @ theta[exo]).tolist() if exo else [0.0] * steps
    feedback = [((theta[j] * u_parts[:, j]).tolist(), y_lags[j]) for j in dyn]
    y_hat = list(map(float, y_seed)) + [0.0] * steps
    for k in range(steps):
        t = start + k
        acc = base[k]
        for coef, lags in feedback:
            prod = coef[k]
            for lag in lags:
                prod *= y_hat[t - lag]
            acc += prod
        if not abs(acc) <= bound:
            raise Diverged(f"|y_hat| exceeded {bound:.3g} at step {t}")
        y_hat[t] = acc
    return np.array(y_hat)


def _bound(y: np.ndarray) -> float:
    return DIVERGENCE_FACTOR * max(float(np.max(np.abs(y))), 1e-12)


def free_run(structure: ModelStructure, series: IOSeries, horizon: int | None = None) -> np.ndarray:
    """Simulated output using measured inputs and fed-back predictions.

    The first ``max_lag`` samples are the measured outputs.
    """
    if structure.theta is None:
        raise ValueError("structure has no estimated coefficients")
    horizon = len(series) if horizon is None else int(horizon)
    if horizon > len(series):
        raise SeriesTooShort("horizon exceeds series length")
    start = structure.pool.config.max_lag
    u_terms = [TermSpec((), t.input_lags) for t in structure.terms]
    u_parts = regressor_matrix(u_terms, series.u[:horizon], series.y[:horizon], start)
    return _simulate(series.y[:start], u_parts, [t.output_lags for t in structure.terms],
                     structure.theta, _bound(series.y))


def mean_squared_error(y, y_hat) -> float:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    return float(np.mean((y - y_hat) ** 2))


def error_percent(y, y_hat) -> float:
    """Free-run error relative to the output's variation, in percent."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    return float(100.0 * np.sqrt(np.sum((y - y_hat) ** 2) / np.sum((y - y.mean()) ** 2)))


def dynamic_error(structure: ModelStructure, series: IOSeries) -> float:
    """Mean squared free-run error over the simulated (non-seed) samples."""
    start = structure.pool.config.max_lag
    try:
        y_hat = free_run(structure, series)
    except Diverged:
        return PENALTY
    err = mean_squared_error(series.y[start:], y_hat[start:])
    return err if np.isfinite(err) and err < PENALTY else PENALTY


def static_error(structure: ModelStructure, curve: StaticCurve) -> float:
    """Summed squared deviation of the model's static curve from ``curve``."""
    try:
        poly = static_polynomial(structure)
    except (DegenerateStaticGain, NotStaticPolynomial):
        return PENALTY
    err = float(np.sum((curve.y_bar - eval_static(poly, curve.u_bar)) ** 2))
    return err if np.isfinite(err) and err < PENALTY else PENALTY


def evaluate(structure: ModelStructure, bundle: DatasetBundle) -> ObjectiveVector:
    """Estimate on the estimation record and score ``(xi, e_dyn, e_static)``."""
    return Evaluator(structure.pool, bundle, memoize=False).evaluate_indices(structure.selected)


class Evaluator:
    """Objective function over genomes of a fixed pool and dataset.

    Regressors for every pool term are computed once.  Results are memoized
    by genome; every call counts toward :attr:`calls`, only fresh genomes
    toward :attr:`unique`.
    """

    def __init__(self, pool: TermPool, bundle: DatasetBundle, memoize: bool = True):
        self.pool = pool
        self.bundle = bundle
        start = pool.config.max_lag
        bundle.check(start)
        est, val = bundle.estimation, bundle.validation
        self._start = start
        self._phi = regressor_matrix(pool.terms, est.u, est.y, start)
        self._target = np.array(est.y[start:])
        u_terms = [TermSpec((), t.input_lags) for t in pool.terms]
        self._u_parts = regressor_matrix(u_terms, val.u, val.y, start)
        self._y_lags = [t.output_lags for t in pool.terms]
        self._val_seed = np.array(val.y[:start])
        self._val_target = np.array(val.y[start:])
        self._bound = _bound(val.y)
        labels = pool.labels()
        self._admissible = np.array([is_static_admissible(l) for l in labels])
        # cluster slot of each term: 0..n_l for input powers, n_l+1 for linear output
        n_l = pool.config.n_l
        self._slot = np.array([l.m if l.p == 0 else n_l + 1 for l in labels])
        self._memo: dict[bytes, ObjectiveVector] | None = {} if memoize else None
        self._lock = threading.Lock()
        self.calls = 0
        self.unique = 0

    @property
    def n_bits(self) -> int:
        return len(self.pool)

    def estimate_indices(self, selected) -> ModelStructure:
        sel = list(selected)
        theta = solve_least_squares(self._phi[:, sel], self._target)
        return ModelStructure(self.pool, tuple(sel), theta)

    def evaluate_indices(self, selected) -> ObjectiveVector:
        sel = list(selected)
        xi = len(sel)
        if xi == 0:
            return ObjectiveVector.penalized(0)
        try:
            theta = solve_least_squares(self._phi[:, sel], self._target)
        except RankDeficient:
            return ObjectiveVector.penalized(xi)
        if not np.all(np.isfinite(theta)):
            return ObjectiveVector.penalized(xi)
        try:
            y_hat = _simulate(self._val_seed, self._u_parts[:, sel],
                              [self._y_lags[i] for i in sel], theta, self._bound)
            e_dyn = mean_squared_error(self._val_target, y_hat[self._start:])
            if not (np.isfinite(e_dyn) and e_dyn < PENALTY):
                e_dyn = PENALTY
        except Diverged:
            e_dyn = PENALTY
        return ObjectiveVector(xi, e_dyn, self._static_error(sel, theta))

    def _static_error(self, sel, theta) -> float:
        # same result as static_error() without building a ModelStructure
        if not self._admissible[sel].all():
            return PENALTY
        n_l = self.pool.config.n_l
        sums = [0.0] * (n_l + 2)
        for slot, c in zip(self._slot[sel].tolist(), theta.tolist()):
            sums[slot] += c
        denom = 1.0 - sums[n_l + 1]
        if abs(denom) < DEGENERATE_GAIN_TOL:
            return PENALTY
        coeffs = [c / denom for c in sums[:n_l + 1]]
        if not np.all(np.isfinite(coeffs)):
            return PENALTY
        curve = self.bundle.static_curve
        err = float(np.sum((curve.y_bar - eval_static(StaticPolynomial(tuple(coeffs)), curve.u_bar)) ** 2))
        return err if np.isfinite(err) and err < PENALTY else PENALTY

    def __call__(self, genome) -> ObjectiveVector:
        bits = np.asarray(genome, dtype=bool)
        if bits.shape != (self.n_bits,):
            raise ValueError(f"genome must have {self.n_bits} bits")
        self.calls += 1
        if self._memo is None:
            return self.evaluate_indices(np.flatnonzero(bits))
        key = np.packbits(bits).tobytes()
        with self._lock:
            hit = self._memo.get(key)
        if hit is not None:
            return hit
        result = self.evaluate_indices(np.flatnonzero(bits))
        with self._lock:
            if key not in self._memo:
                self._memo[key] = result
                self.unique += 1
        return result
