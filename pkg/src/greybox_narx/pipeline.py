"""Configuration and the identification pipeline behind the command line.

Each ``cmd_*`` function writes its outputs into a run directory and returns
a small summary dict.  Every file carries the configuration hash and seed.
"""

from __future__ import annotations

import copy
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .decision import PreferenceSpec, mmd_select, mtd_select, priority_weights
from .errors import ConfigError, DataError, DegenerateStaticGain, NotStaticPolynomial
from .estimation import DatasetBundle, Evaluator, IOSeries, error_percent, free_run, mean_squared_error, static_error
from .dataio import (
    PlantSpec,
    PrbsConfig,
    StaticGrid,
    read_series_csv,
    read_static_csv,
    reference_model,
    reference_names,
    split,
    synthetic_series,
    write_series_csv,
    write_static_csv,
)
from .model import PRUNERS, ModelStructure, PoolConfig, TermPool, eval_static, generate_term_pool, static_polynomial
from .moea import MoeaConfig, ParetoArchive, identify, set_coverage
from .validation import residuals, validity_tests

DEFAULT_CONFIG = {
    "seed": 0,
    "pool": {"n_u": 5, "n_y": 5, "n_l": 3},
    "pruning": "clusters",
    "data": {
        "source": "synthetic",
        "plant": "M3",
        "noise_std": 0.05,
        "noise_seed": 0,
        "prbs": {"register_length": 7, "low": 2.2, "high": 2.5, "hold": 1, "length": 168, "seed": 1},
        "series": None,
        "static": None,
    },
    "n_est": 100,
    "static_grid": {"low": 1.0, "high": 4.0, "count": 61, "V_d": 24.0},
    "moea": {"algorithm": "nsga2", "population": 50, "archive_size": 50,
             "p_c": None, "p_m": None, "budget": 25000, "runs": 100},
    "decision": {"mmd": True, "mtd": [{"rankings": [3, 1, 2], "intensity": 5}]},
    "validation": {"residuals": "free_run", "band": "simultaneous", "max_lag": 20},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class PipelineConfig:
    raw: dict
    base_dir: Path = field(default=Path("."), compare=False)

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "PipelineConfig":
        raw, base = {}, Path(".")
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ConfigError(f"config file {p} not found")
            try:
                raw = json.loads(p.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
            if not isinstance(raw, dict):
                raise ConfigError("config root must be a JSON object")
            base = p.parent
        merged = _merge(DEFAULT_CONFIG, raw)
        merged = _merge(merged, overrides or {})
        cfg = cls(merged, base)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            self.pool_config
            self.moea_config
            self.grid
            self.preferences
            if self.raw["data"]["source"] == "synthetic":
                self.prbs
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        if self.raw["pruning"] not in PRUNERS:
            raise ConfigError(f"pruning must be one of {sorted(PRUNERS)}")
        src = self.raw["data"]["source"]
        if src not in ("synthetic", "csv"):
            raise ConfigError("data.source must be 'synthetic' or 'csv'")
        if src == "csv":
            for key in ("series", "static"):
                p = self.raw["data"][key]
                if key == "series" and p is None:
                    raise ConfigError("data.series is required for csv input")
                if p is not None and not self.resolve(p).is_file():
                    raise ConfigError(f"data.{key} file {p} not found")
        if self.raw["validation"]["residuals"] not in ("one_step", "free_run"):
            raise ConfigError("validation.residuals must be 'one_step' or 'free_run'")

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    @property
    def meta(self) -> dict:
        return {"config_hash": self.hash, "seed": self.seed}

    @property
    def pool_config(self) -> PoolConfig:
        p = self.raw["pool"]
        return PoolConfig(int(p["n_u"]), int(p["n_y"]), int(p["n_l"]))

    @property
    def grid(self) -> StaticGrid:
        g = self.raw["static_grid"]
        grid = StaticGrid(float(g["low"]), float(g["high"]), int(g["count"]), float(g["V_d"]))
        if grid.count < 2 or grid.high <= grid.low:
            raise ValueError("static grid needs count >= 2 and high > low")
        return grid

    @property
    def prbs(self) -> PrbsConfig:
        return PrbsConfig(**self.raw["data"]["prbs"])

    @property
    def moea_config(self) -> MoeaConfig:
        m = dict(self.raw["moea"])
        algorithm = m.pop("algorithm")
        m = {k: v for k, v in m.items() if v is not None}
        return MoeaConfig.for_algorithm(algorithm, seed=self.seed, **m)

    @property
    def preferences(self) -> list[PreferenceSpec]:
        return [PreferenceSpec.from_dict(d) for d in self.raw["decision"]["mtd"]]

    def pool(self) -> TermPool:
        return PRUNERS[self.raw["pruning"]](generate_term_pool(self.pool_config))

    def plant(self) -> PlantSpec:
        d = self.raw["data"]
        name = d["plant"]
        if name in reference_names():
            structure = reference_model(name)
        else:
            path = self.resolve(name)
            if not path.is_file():
                raise ConfigError(f"plant {name!r} is neither a reference model nor a file")
            structure = load_model(path)
        return PlantSpec(structure, noise_std=float(d["noise_std"]), V_d=self.grid.V_d)

    def series(self) -> IOSeries:
        d = self.raw["data"]
        if d["source"] == "csv":
            return read_series_csv(self.resolve(d["series"]))
        return synthetic_series(self.plant(), self.prbs, d["noise_seed"])

    def bundle(self) -> DatasetBundle:
        d = self.raw["data"]
        static = read_static_csv(self.resolve(d["static"])) if d["source"] == "csv" and d["static"] else None
        return split(self.series(), int(self.raw["n_est"]), self.grid, self.pool_config.max_lag, static)


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"file {p} not found")
    return p


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_model(path) -> ModelStructure:
    """Read a model JSON; selection reports are accepted and their ``model`` used."""
    try:
        doc = json.loads(Path(path).read_text())
        if "model" in doc:
            doc = doc["model"]
        return ModelStructure.from_dict(doc)
    except FileNotFoundError as exc:
        raise ConfigError(f"model file {path} not found") from exc
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc


def model_report(structure: ModelStructure, objectives=None) -> dict:
    doc = {"model": structure.to_dict(), "terms": [str(t) for t in structure.terms]}
    try:
        doc["static_polynomial"] = list(static_polynomial(structure).coefficients)
    except (NotStaticPolynomial, DegenerateStaticGain):
        doc["static_polynomial"] = None
    if objectives is not None:
        doc["objectives"] = {"xi": objectives.xi, "e_dyn": objectives.e_dyn, "e_static": objectives.e_static}
    return doc


def cmd_generate_data(cfg: PipelineConfig, out: Path) -> dict:
    if cfg.raw["data"]["source"] != "synthetic":
        raise ConfigError("generate-data needs data.source = 'synthetic'")
    series = cfg.series()
    curve = cfg.grid.curve()
    write_series_csv(out / "series.csv", series, cfg.meta)
    write_static_csv(out / "static.csv", curve, cfg.meta)
    _write_json(out / "config.json", cfg.raw)
    return {
        "samples": len(series),
        "u_mean": float(np.mean(series.u)), "u_std": float(np.std(series.u)),
        "y_mean": float(np.mean(series.y)), "y_std": float(np.std(series.y)),
        "static_points": len(curve),
    }


def cmd_identify(cfg: PipelineConfig, out: Path, jobs: int = 1) -> dict:
    bundle = cfg.bundle()
    pool = cfg.pool()
    moea = cfg.moea_config
    t0 = time.perf_counter()
    archive, runs = identify(bundle, pool, moea, jobs=jobs)
    wall = time.perf_counter() - t0
    archive.to_csv(out / "archive.csv", cfg.meta)
    ev = Evaluator(pool, bundle)
    structures = []
    for e in archive:
        s = ev.estimate_indices(np.flatnonzero(e.bits))
        structures.append({"genome_bits": e.genome, **model_report(s, e.objectives)})
    _write_json(out / "structures.json", {**cfg.meta, "pool_size": len(pool), "structures": structures})
    _write_json(out / "config.json", cfg.raw)
    manifest = {
        **cfg.meta,
        "moea": moea.to_dict(),
        "pool_size": len(pool),
        "archive_size": len(archive),
        "evaluations": [r.evaluations for r in runs],
        "unique_evaluations": [r.unique_evaluations for r in runs],
        "wall_time_s": round(wall, 3),
    }
    _write_json(out / "manifest.json", manifest)
    return {"archive_size": len(archive), "runs": len(runs),
            "evaluations": int(sum(r.evaluations for r in runs)), "wall_time_s": round(wall, 3)}


def cmd_select(cfg: PipelineConfig, archive_path, out: Path) -> dict:
    archive = ParetoArchive.from_csv(_require_file(archive_path))
    if len(archive) == 0:
        raise DataError("archive is empty")
    bundle = cfg.bundle()
    pool = cfg.pool()
    if len(archive[0].genome) != len(pool):
        raise DataError(f"archive genomes have {len(archive[0].genome)} bits, pool has {len(pool)}")
    ev = Evaluator(pool, bundle)
    selections = []
    if cfg.raw["decision"]["mmd"]:
        selections.append(("mmd", mmd_select(archive), None))
    weights = {}
    for i, pref in enumerate(cfg.preferences, start=1):
        weights[f"mtd{i}"] = [round(float(w), 12) for w in priority_weights(pref)]
        # a single-entry archive has nothing to rank against
        if len(archive) >= 2:
            selections.append((f"mtd{i}", mtd_select(archive, pref), pref))
    report = {**cfg.meta, "archive": str(archive_path), "weights": weights, "methods": {}}
    for name, sel, pref in selections:
        sel.to_csv(out / f"rankings_{name}.csv", cfg.meta)
        structure = ev.estimate_indices(np.flatnonzero(sel.selected.bits))
        doc = {**cfg.meta, "method": name, "genome_bits": sel.selected.genome, "score": sel.score,
               **model_report(structure, sel.selected.objectives)}
        if pref is not None:
            doc["preference"] = pref.to_dict()
            doc["weights"] = list(sel.weights)
        _write_json(out / f"selected_{name}.json", doc)
        report["methods"][name] = {k: doc[k] for k in doc if k in
                                   ("genome_bits", "score", "terms", "weights", "preference",
                                    "objectives", "static_polynomial")}
    _write_json(out / "select.json", report)
    return report


def cmd_validate(cfg: PipelineConfig, model_path, out: Path) -> dict:
    structure = load_model(model_path)
    if not structure.is_estimated:
        raise DataError("model has no coefficients")
    if structure.pool.config.max_lag != cfg.pool_config.max_lag:
        raise ConfigError("model lag configuration differs from the pipeline's pool")
    bundle = cfg.bundle()
    val = bundle.validation
    start = structure.pool.config.max_lag
    y_hat = free_run(structure, val)
    with open(out / "free_run.csv", "w") as fh:
        fh.writelines(f"# {k}: {v}\n" for k, v in cfg.meta.items())
        fh.write("k,y,y_hat\n")
        for k, (y, yh) in enumerate(zip(val.y, y_hat)):
            fh.write(f"{k},{y:.17g},{yh:.17g}\n")
    curve = bundle.static_curve
    try:
        y_model = eval_static(static_polynomial(structure), curve.u_bar)
    except (NotStaticPolynomial, DegenerateStaticGain):
        y_model = np.full(len(curve), np.nan)
    with open(out / "static_compare.csv", "w") as fh:
        fh.writelines(f"# {k}: {v}\n" for k, v in cfg.meta.items())
        fh.write("u_bar,y_ref,y_model\n")
        for u, yr, ym in zip(curve.u_bar, curve.y_bar, y_model):
            fh.write(f"{u:.17g},{yr:.17g},{ym:.17g}\n")
    vcfg = cfg.raw["validation"]
    eps = residuals(structure, val, vcfg["residuals"])
    report = validity_tests(eps, val.u[start:], max_lag=int(vcfg["max_lag"]), band=vcfg["band"])
    corr_dir = out / "correlation"
    corr_dir.mkdir(exist_ok=True)
    report.to_csv(corr_dir, cfg.meta)
    report.to_json(out / "validity.json", cfg.meta)
    metrics = {
        **cfg.meta,
        "e_dyn_mse": mean_squared_error(val.y[start:], y_hat[start:]),
        "e_dyn_percent": error_percent(val.y[start:], y_hat[start:]),
        "e_static": static_error(structure, curve),
        "validity": report.summary(),
        "validity_band": report.band,
        "residuals": vcfg["residuals"],
    }
    _write_json(out / "validate.json", metrics)
    return metrics


def cmd_coverage(archive_a, archive_b, out: Path | None = None, meta: dict | None = None) -> dict:
    a = ParetoArchive.from_csv(_require_file(archive_a))
    b = ParetoArchive.from_csv(_require_file(archive_b))
    doc = {"C_AB": set_coverage(a, b), "C_BA": set_coverage(b, a)}
    if out is not None:
        _write_json(out / "coverage.json", {**(meta or {}), **doc})
    return doc
