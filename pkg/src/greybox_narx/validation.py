"""Correlation-based validity tests on model residuals.

Five normalised correlation functions are checked against a confidence band:
residual autocorrelation, input/residual cross-correlation and three
higher-order variants built from mean-centred squared signals.  A model
passes when every tested lag stays inside the band.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .errors import SeriesTooShort
from .estimation import IOSeries, build_regression, free_run
from .model import ModelStructure

MIN_SAMPLES = 40
MAX_LAG = 20
TEST_NAMES = ("phi_ee", "phi_ue", "phi_u2e", "phi_u2e2", "phi_e2u")
BANDS = ("simultaneous", "per_lag")


def residuals(structure: ModelStructure, series: IOSeries, kind: str = "one_step") -> np.ndarray:
    """Residuals ``y - y_hat`` over the samples after the pool's max lag.

    ``kind="one_step"`` predicts from measured past outputs; ``kind="free_run"``
    uses the model's own simulated outputs.
    """
    if structure.theta is None:
        raise ValueError("structure has no estimated coefficients")
    start = structure.pool.config.max_lag
    if kind == "one_step":
        phi, target = build_regression(structure, series)
        return target - phi @ structure.theta
    if kind == "free_run":
        return np.asarray(series.y[start:]) - free_run(structure, series)[start:]
    raise ValueError(f"unknown residual kind {kind!r}")


def cross_correlation(a, b, max_lag: int = MAX_LAG) -> np.ndarray:
    """``r[tau + max_lag] = sum_k a(k) b(k + tau) / sqrt(sum a^2 sum b^2)`` on centred signals.

    Uses the biased (full-length) normalisation, so every value lies in [-1, 1].
    A constant signal gives an all-zero correlation.
    """
    auto = a is b
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("signals must be 1-d of equal length")
    a = a - a.mean()
    b = b - b.mean()
    n = len(a)
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    out = np.zeros(2 * max_lag + 1)
    if denom == 0:
        return out
    for i, tau in enumerate(range(-max_lag, max_lag + 1)):
        if abs(tau) >= n:
            continue
        if tau >= 0:
            out[i] = np.dot(a[:n - tau], b[tau:])
        else:
            out[i] = np.dot(a[-tau:], b[:n + tau])
    out = np.clip(out / denom, -1.0, 1.0)
    if auto:
        out[max_lag] = 1.0
    return out


def band_halfwidth(n: int, band: str = "simultaneous", alpha: float = 0.05,
                   n_tests: int | None = None) -> float:
    """Half-width of the confidence band for ``n`` samples.

    ``per_lag`` is the pointwise ``z_{1-alpha/2}/sqrt(n)`` band.  The
    ``simultaneous`` band widens ``z`` so that ``n_tests`` independent
    lags all stay inside with probability ``1 - alpha`` (Sidak correction).
    """
    if band == "per_lag":
        level = alpha
    elif band == "simultaneous":
        level = 1.0 - (1.0 - alpha) ** (1.0 / (n_tests or 1))
    else:
        raise ValueError(f"band must be one of {BANDS}")
    return NormalDist().inv_cdf(1.0 - level / 2.0) / np.sqrt(n)


@dataclass(frozen=True)
class CorrelationTest:
    name: str
    lags: np.ndarray
    values: np.ndarray
    band: float
    exempt: tuple[int, ...] = ()

    @property
    def tested(self) -> np.ndarray:
        return ~np.isin(self.lags, self.exempt)

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.values[self.tested]) <= self.band))

    @property
    def worst(self) -> float:
        return float(np.max(np.abs(self.values[self.tested])))


@dataclass(frozen=True)
class CorrelationReport:
    tests: dict
    n_samples: int
    band: float

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.tests.values())

    def __getitem__(self, name: str) -> CorrelationTest:
        return self.tests[name]

    def summary(self) -> dict:
        return {name: "pass" if t.passed else "fail" for name, t in self.tests.items()}

    def to_json(self, path, meta: dict | None = None) -> None:
        doc = {**(meta or {}), "n_samples": self.n_samples, "band": self.band, "tests": self.summary()}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)

    def to_csv(self, directory, meta: dict | None = None) -> list:
        """One ``tau,value,band`` file per test; returns the written paths."""
        paths = []
        for name, t in self.tests.items():
            p = Path(directory) / f"{name}.csv"
            with open(p, "w", newline="") as fh:
                for k, v in (meta or {}).items():
                    fh.write(f"# {k}: {v}\n")
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["tau", "value", "band"])
                for tau, val in zip(t.lags, t.values):
                    w.writerow([int(tau), format(val, ".17g"), format(t.band, ".17g")])
            paths.append(p)
        return paths


def validity_tests(eps, u, max_lag: int = MAX_LAG, band: str = "simultaneous",
                   alpha: float = 0.05) -> CorrelationReport:
    """Run the five correlation tests on residuals ``eps`` against input ``u``."""
    eps = np.asarray(eps, dtype=float)
    u = np.asarray(u, dtype=float)
    if eps.shape != u.shape:
        raise ValueError("residual and input series differ in length")
    n = len(eps)
    if n < MIN_SAMPLES:
        raise SeriesTooShort(f"validity tests need at least {MIN_SAMPLES} samples, got {n}")
    u2 = u ** 2 - np.mean(u ** 2)
    e2 = eps ** 2 - np.mean(eps ** 2)
    pairs = {
        "phi_ee": (eps, eps, (0,)),
        "phi_ue": (u, eps, ()),
        "phi_u2e": (u2, eps, ()),
        "phi_u2e2": (u2, e2, ()),
        "phi_e2u": (e2, u, ()),
    }
    lags = np.arange(-max_lag, max_lag + 1)
    n_tested = sum(len(lags) - len(ex) for _, _, ex in pairs.values())
    half = band_halfwidth(n, band, alpha, n_tested)
    tests = {name: CorrelationTest(name, lags, cross_correlation(a, b, max_lag), half, ex)
             for name, (a, b, ex) in pairs.items()}
    return CorrelationReport(tests, n, half)
