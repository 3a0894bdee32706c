"""Excitation signals, the synthetic plant, dataset preparation and CSV I/O."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError, Diverged, SplitTooSmall
from .estimation import DatasetBundle, IOSeries, StaticCurve, _simulate, regressor_matrix
from .model import (
    ModelStructure,
    PoolConfig,
    TermPool,
    TermSpec,
    buck_static_reference,
    eval_static,
    generate_term_pool,
    prune_pool,
    static_polynomial,
)

# Fibonacci LFSR feedback taps giving maximal-length sequences (primitive
# polynomials x^n + ... + 1).
MAXIMAL_TAPS = {
    4: (4, 3), 5: (5, 3), 6: (6, 5), 7: (7, 6), 8: (8, 6, 5, 4), 9: (9, 5),
    10: (10, 7), 11: (11, 9), 12: (12, 6, 4, 1), 13: (13, 4, 3, 1),
    14: (14, 5, 3, 1), 15: (15, 14), 16: (16, 15, 13, 4), 17: (17, 14),
    18: (18, 11), 19: (19, 6, 2, 1), 20: (20, 17), 21: (21, 19), 22: (22, 21),
    23: (23, 18), 24: (24, 23, 22, 17),
}


@dataclass(frozen=True)
class PrbsConfig:
    register_length: int = 7
    low: float = 2.2
    high: float = 2.5
    hold: int = 1
    length: int = 168
    seed: int = 1

    def __post_init__(self):
        if self.register_length not in MAXIMAL_TAPS:
            raise ValueError("register_length must be in [4, 24]")
        if not self.low <= self.high:
            raise ValueError("low level must not exceed high level")
        if self.hold < 1 or self.length < 1:
            raise ValueError("hold and length must be >= 1")
        if self.seed % (1 << self.register_length) == 0:
            raise ValueError("LFSR seed must be a nonzero register state")


def prbs_bits(register_length: int, n: int, seed: int = 1) -> np.ndarray:
    """First ``n`` output bits of a maximal-length Fibonacci LFSR."""
    mask = (1 << register_length) - 1
    tap_mask = 0
    for tap in MAXIMAL_TAPS[register_length]:
        tap_mask |= 1 << (tap - 1)
    state = seed & mask
    if state == 0:
        raise ValueError("LFSR seed must be a nonzero register state")
    bits = np.empty(n, dtype=np.int8)
    for k in range(n):
        feedback = (state & tap_mask).bit_count() & 1
        state = ((state << 1) | feedback) & mask
        bits[k] = feedback
    return bits


def gen_prbs(config: PrbsConfig) -> np.ndarray:
    """Two-level PRBS, each LFSR bit held for ``hold`` samples."""
    n_bits = -(-config.length // config.hold)
    bits = prbs_bits(config.register_length, n_bits, config.seed)
    held = np.repeat(bits, config.hold)[:config.length]
    return np.where(held == 1, config.high, config.low).astype(float)


def decimate(x, factor: int):
    """Keep every ``factor``-th sample (no anti-alias filtering)."""
    if factor < 1:
        raise ValueError("decimation factor must be >= 1")
    if isinstance(x, IOSeries):
        return IOSeries(x.u[::factor], x.y[::factor])
    return np.asarray(x)[::factor]


@dataclass(frozen=True)
class StaticGrid:
    """Evenly spaced reference points on the ideal buck static curve."""

    low: float = 1.0
    high: float = 4.0
    count: int = 61
    V_d: float = 24.0

    def curve(self) -> StaticCurve:
        u_bar = np.linspace(self.low, self.high, self.count)
        return StaticCurve(u_bar, buck_static_reference(u_bar, self.V_d))


def split(series: IOSeries, n_est: int, grid: StaticGrid = StaticGrid(), max_lag: int = 5,
          static_curve: StaticCurve | None = None) -> DatasetBundle:
    """First ``n_est`` samples for estimation, the rest for validation."""
    n = len(series)
    if n_est <= max_lag + 1:
        raise SplitTooSmall(f"estimation segment of {n_est} samples is too short for lag {max_lag}")
    if n - n_est <= max_lag:
        raise SplitTooSmall(f"validation segment of {n - n_est} samples is too short for lag {max_lag}")
    curve = static_curve if static_curve is not None else grid.curve()
    return DatasetBundle(series[:n_est], series[n_est:], curve)


@dataclass(frozen=True, eq=False)
class PlantSpec:
    """Known NARX system used to synthesise identification data.

    Measurement noise is added to the recorded output only; it is not fed
    back into the recursion.
    """

    structure: ModelStructure
    noise_std: float = 0.05
    V_d: float = 24.0
    u_range: tuple[float, float] = (2.2, 2.5)
    _poly: object = field(init=False, repr=False)

    def __post_init__(self):
        if self.structure.theta is None:
            raise ValueError("plant structure needs coefficients")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        object.__setattr__(self, "_poly", static_polynomial(self.structure))
        probe = gen_prbs(PrbsConfig(11, self.u_range[0], self.u_range[1], 1, 2000, 1))
        try:
            _run_plant(self.structure, probe, self._poly)
        except Diverged as exc:
            raise ValueError("plant is not free-run stable on its excitation range") from exc

    def static_value(self, u_bar):
        return eval_static(self._poly, u_bar)


def _run_plant(structure: ModelStructure, u: np.ndarray, poly) -> np.ndarray:
    lag = structure.pool.config.max_lag
    u = np.asarray(u, dtype=float)
    u_ext = np.concatenate([np.full(lag, u[0]), u])
    y0 = eval_static(poly, u[0])
    u_terms = [TermSpec((), t.input_lags) for t in structure.terms]
    u_parts = regressor_matrix(u_terms, u_ext, np.zeros_like(u_ext), lag)
    bound = 1e3 * max(1.0, abs(y0))
    y_ext = _simulate(np.full(lag, y0), u_parts, [t.output_lags for t in structure.terms],
                      structure.theta, bound)
    return y_ext[lag:]


def simulate_plant(plant: PlantSpec, u, seed: int | None = None) -> np.ndarray:
    """Noise-free free run started at the steady state of ``u[0]``, plus output noise."""
    y = _run_plant(plant.structure, u, plant._poly)
    if plant.noise_std > 0:
        y = y + np.random.default_rng(seed).normal(0.0, plant.noise_std, len(y))
    return y


# -- reference models -------------------------------------------------------

def _fixture_data() -> dict:
    text = resources.files("greybox_narx").joinpath("fixtures/reference_models.json").read_text()
    return json.loads(text)


def reference_pool() -> TermPool:
    """Cluster-pruned (n_u, n_y, n_l) = (5, 5, 3) pool holding every reference model."""
    return prune_pool(generate_term_pool(PoolConfig(5, 5, 3)))


def reference_names() -> list[str]:
    return list(_fixture_data()["models"])


def reference_model(name: str, pool: TermPool | None = None) -> ModelStructure:
    """Published model ``name`` (M1, M2, M3, M4, OFR, OFR-EA) on ``pool``."""
    models = _fixture_data()["models"]
    if name not in models:
        raise KeyError(f"unknown reference model {name!r}; choose from {sorted(models)}")
    return ModelStructure.from_dict(models[name], pool or reference_pool())


def reference_metadata(name: str) -> dict:
    entry = _fixture_data()["models"][name]
    return {k: v for k, v in entry.items() if k not in ("terms", "coefficients")}


def default_plant(noise_std: float = 0.05, V_d: float = 24.0) -> PlantSpec:
    return PlantSpec(reference_model("M3"), noise_std=noise_std, V_d=V_d)


def synthetic_series(plant: PlantSpec, prbs: PrbsConfig, noise_seed: int | None = 0) -> IOSeries:
    u = gen_prbs(prbs)
    return IOSeries(u, simulate_plant(plant, u, noise_seed))


# -- CSV --------------------------------------------------------------------

def _comment_lines(meta: dict | None) -> list[str]:
    return [f"# {k}: {v}" for k, v in (meta or {}).items()]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_series_csv(path, series: IOSeries, meta: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for line in _comment_lines(meta):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "u", "y"])
        for k, (u, y) in enumerate(zip(series.u, series.y)):
            w.writerow([k, _fmt(u), _fmt(y)])


def write_static_csv(path, curve: StaticCurve, meta: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for line in _comment_lines(meta):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u_bar", "y_bar"])
        for u, y in zip(curve.u_bar, curve.y_bar):
            w.writerow([_fmt(u), _fmt(y)])


def read_csv_columns(path, required) -> dict[str, np.ndarray]:
    """Read numeric columns from a CSV, skipping ``#`` comment lines."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise DataError(f"{path} lacks columns {missing}; header is {header}")
    try:
        cols = {c: np.array([float(r[header.index(c)]) for r in rows[1:]]) for c in required}
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed row ({exc})") from exc
    return cols


def read_series_csv(path) -> IOSeries:
    cols = read_csv_columns(path, ["k", "u", "y"])
    order = np.argsort(cols["k"], kind="stable")
    return IOSeries(cols["u"][order], cols["y"][order])


def read_static_csv(path) -> StaticCurve:
    cols = read_csv_columns(path, ["u_bar", "y_bar"])
    return StaticCurve(cols["u_bar"], cols["y_bar"])
