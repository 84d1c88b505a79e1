"""End-to-end ROM extraction: signals -> FOM data -> 1-set ROMs -> partner -> final ROM.

Stages (each resumable through a checkpoint keyed by the config digest):

1. ``signals``      synthesise excitations, assign ids
2. ``simulate``     run the full-order model, fill the data set store
3. ``features``     data-set features
4. ``select_test``  chi-squared test group
5. ``train``        one ROM per non-test set, evaluated on the test group
6. ``correlate``    Pearson matrix between test errors and features
7. ``partners``     base set by rule, training-partner chart
8. ``finalize``     2-set ROMs for the top partners, export the best one
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .doe import (
    FEATURES,
    FeatureVector,
    PartnerThresholds,
    compute_features,
    corr_matrix,
    group_metrics,
    linfit_bounds,
    partner_chart,
    select_test_group_detail,
)
from .errors import ConfigInvalid, InvalidDimension, ParseFailure, StageFailure, TwinForgeError
from .fom import DataSet, FomConfig, simulate_fom
from .metrics import MEASURES, evaluate
from .rom.io import export_model, import_model
from .rom.model import RomModel, simulate
from .rom.train import TrainConfig, select_complexity
from .signals import (
    AprbsConfig,
    ExcitationSignal,
    MultisineConfig,
    PhaseMode,
    SignalKind,
    TimeGrid,
    generate,
)
from .plots import scatter_svg
from .store import StoreManifest, fmt, grid_from_times, load_dataset, save_dataset

log = logging.getLogger(__name__)

STAGES = ("signals", "simulate", "features", "select_test", "train", "correlate",
          "partners", "finalize")
STORE_ENV = "TWINFORGE_STORE"


@dataclass(frozen=True)
class SignalPlan:
    counts: dict = field(default_factory=lambda: {"APRBS": 20})
    seed_base: int = 1000
    aprbs: AprbsConfig = AprbsConfig()
    multisine: MultisineConfig = MultisineConfig()
    sinaprbs: AprbsConfig = AprbsConfig(transition_time=60.0)

    def config_for(self, kind: SignalKind):
        return {SignalKind.APRBS: self.aprbs, SignalKind.MULTISINE: self.multisine,
                SignalKind.SINAPRBS: self.sinaprbs}[kind]


@dataclass(frozen=True)
class PipelineConfig:
    store_root: str = ""
    output_dir: str = "twinforge-run"
    grid: TimeGrid = TimeGrid()
    signals: SignalPlan = SignalPlan()
    fom: FomConfig = FomConfig()
    train: TrainConfig = TrainConfig()
    test_k: int = 5
    test_bins: int = 5
    base_feature: str = "std_TB"
    base_direction: str = "max"
    partners: int = 3
    thresholds: PartnerThresholds = PartnerThresholds()
    workers: int = 1

    def validate(self) -> None:
        counts = self.signals.counts
        if not counts or any(int(c) < 1 for c in counts.values()):
            raise ConfigInvalid("signal counts must be >= 1")
        for kind in counts:
            try:
                SignalKind(kind)
            except ValueError:
                raise ConfigInvalid(f"unknown signal kind {kind!r}") from None
        if self.base_feature not in FEATURES:
            raise ConfigInvalid(f"unknown base feature {self.base_feature!r}")
        if self.base_direction not in ("max", "min"):
            raise ConfigInvalid("base_direction must be 'max' or 'min'")
        total = sum(int(c) for c in counts.values())
        if not 1 <= self.test_k < total - 1:
            raise ConfigInvalid(f"test_k={self.test_k} leaves fewer than 2 training sets")
        if self.test_bins < 2 or self.partners < 1 or self.workers < 1:
            raise ConfigInvalid("need test_bins >= 2, partners >= 1, workers >= 1")
        try:
            self.train.validate()
            for kind in counts:
                self.signals.config_for(SignalKind(kind)).validate(self.grid)
        except TwinForgeError as exc:
            raise ConfigInvalid(str(exc)) from None

    @property
    def store_path(self) -> Path:
        return Path(self.store_root or os.environ.get(STORE_ENV) or Path(self.output_dir) / "store")

    def digest(self) -> str:
        """Hash of every field that influences results (paths and workers excluded)."""
        doc = config_to_dict(self)
        for k in ("store_root", "output_dir", "workers"):
            doc.pop(k)
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def _plain(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (PhaseMode, SignalKind)):
        return obj.value
    return obj


def config_to_dict(cfg: PipelineConfig) -> dict:
    return _plain(cfg)


def _build(cls, data: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigInvalid(f"unknown keys in {where}: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(doc: dict) -> PipelineConfig:
    doc = dict(doc)
    try:
        if "grid" in doc:
            doc["grid"] = _build(TimeGrid, doc["grid"], "grid")
        if "signals" in doc:
            sp = dict(doc["signals"])
            for key in ("aprbs", "sinaprbs"):
                if key in sp:
                    sp[key] = _build(AprbsConfig, sp[key], f"signals.{key}")
            if "multisine" in sp:
                ms = dict(sp["multisine"])
                if "phase_mode" in ms:
                    ms["phase_mode"] = PhaseMode(ms["phase_mode"])
                sp["multisine"] = _build(MultisineConfig, ms, "signals.multisine")
            doc["signals"] = _build(SignalPlan, sp, "signals")
        if "fom" in doc:
            doc["fom"] = _build(FomConfig, doc["fom"], "fom")
        if "train" in doc:
            doc["train"] = _build(TrainConfig, doc["train"], "train")
        if "thresholds" in doc:
            doc["thresholds"] = _build(PartnerThresholds, doc["thresholds"], "thresholds")
        cfg = _build(PipelineConfig, doc, "config")
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc)) from None
    cfg.validate()
    return cfg


def load_config(path) -> PipelineConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from None
    return config_from_dict(doc)


# -- artifact writing -------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "nan" if not np.isfinite(v) else fmt(float(v))
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], digest: str) -> None:
    """CSV with a ``# config_digest=`` comment line and one header row."""
    buf = io.StringIO()
    buf.write(f"# config_digest={digest}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(buf.getvalue(), encoding="utf-8")
    os.replace(tmp, path)


def read_csv(path: Path) -> list:
    """Rows of an artifact CSV as dicts of strings (comment lines skipped)."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
             if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


def trajectory_csv_rows(times, outputs):
    return [(times[k], outputs[0, k], outputs[1, k]) for k in range(len(times))]


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- worker functions (module level so they pickle) -------------------------

def _simulate_job(args):
    signal, fom_cfg = args
    return simulate_fom(signal, fom_cfg)


def _train_job(args):
    scenarios, train_cfg = args
    model, chosen, sweep = select_complexity(scenarios, 2, train_cfg, return_sweep=True)
    return model, chosen, sweep


def _pool_map(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# -- the pipeline ---------------------------------------------------------------

class Pipeline:
    def __init__(self, config: PipelineConfig):
        config.validate()
        self.cfg = config
        self.out = Path(config.output_dir)
        self.digest = config.digest()
        self.store = StoreManifest.open(config.store_path)
        self._datasets: dict = {}

    # checkpoints
    def _ckpt_path(self, stage: str) -> Path:
        return self.out / "checkpoints" / f"{stage}.json"

    def _done(self, stage: str) -> Optional[dict]:
        p = self._ckpt_path(stage)
        if not p.exists():
            return None
        doc = json.loads(p.read_text(encoding="utf-8"))
        if doc.get("config_digest") != self.digest:
            return None
        for rel, sha in doc.get("artifacts", {}).items():
            f = self.out / rel
            if not f.exists() or sha256_file(f) != sha:
                return None
        return doc

    def _mark(self, stage: str, artifacts: Sequence[str], **extra) -> dict:
        doc = {
            "stage": stage,
            "config_digest": self.digest,
            "artifacts": {rel: sha256_file(self.out / rel) for rel in artifacts},
            **extra,
        }
        p = self._ckpt_path(stage)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return doc

    def dataset(self, ds_id: str) -> DataSet:
        if ds_id not in self._datasets:
            self._datasets[ds_id] = load_dataset(ds_id, self.store)
        return self._datasets[ds_id]

    def run(self, until: str = "finalize") -> dict:
        if until not in STAGES:
            raise ConfigInvalid(f"unknown stage {until!r}")
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "config.json").write_text(
            json.dumps(config_to_dict(self.cfg), indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )
        results = {}
        for stage in STAGES[: STAGES.index(until) + 1]:
            done = self._done(stage)
            if done is not None:
                log.info("stage %s: up to date", stage)
                results[stage] = done
                continue
            log.info("stage %s: running", stage)
            try:
                results[stage] = getattr(self, f"stage_{stage}")(results)
            except StageFailure:
                raise
            except TwinForgeError as exc:
                raise StageFailure(stage, f"{exc.code}: {exc}") from exc
        self._write_report(results)
        return results

    # 1
    def stage_signals(self, results) -> dict:
        plan = self.cfg.signals
        rows = []
        number = self.store.next_number
        seed = plan.seed_base
        for kind in SignalKind:
            for _ in range(int(plan.counts.get(kind.value, 0))):
                sig = generate(kind, plan.config_for(kind), self.cfg.grid, seed)
                jumps = ";".join(f"{fmt(t)}:{fmt(d)}" for t, d in sig.jumps)
                rows.append((f"{kind.prefix}{number:04d}", kind.value, seed, jumps))
                number += 1
                seed += 1
        write_csv(self.out / "signals.csv", ("id", "kind", "seed", "jumps"), rows, self.digest)
        return self._mark("signals", ["signals.csv"], ids=[r[0] for r in rows])

    # 2
    def stage_simulate(self, results) -> dict:
        plan = self.cfg.signals
        todo = []
        for row in read_csv(self.out / "signals.csv"):
            if row["id"] in self.store:
                continue
            kind = SignalKind(row["kind"])
            sig = generate(kind, plan.config_for(kind), self.cfg.grid, int(row["seed"]))
            todo.append(sig.with_id(row["id"]))
        sims = _pool_map(_simulate_job, [(s, self.cfg.fom) for s in todo], self.cfg.workers)
        for ds in sims:
            save_dataset(ds, self.store)
        ids = results["signals"]["ids"]
        rows = [(i, self.store.entry(i)["feature_digest"]) for i in ids]
        write_csv(self.out / "datasets.csv", ("id", "feature_digest"), rows, self.digest)
        return self._mark("simulate", ["datasets.csv"], ids=ids)

    # 3
    def stage_features(self, results) -> dict:
        ids = results["signals"]["ids"]
        feats = [compute_features(self.dataset(i)) for i in ids]
        write_csv(self.out / "features.csv", ("id",) + FEATURES,
                  [(f.id,) + tuple(f.get(k) for k in FEATURES) for f in feats], self.digest)
        return self._mark("features", ["features.csv"])

    # 4
    def stage_select_test(self, results) -> dict:
        ids = results["signals"]["ids"]
        sel = select_test_group_detail([self.dataset(i) for i in ids], self.cfg.test_k,
                                       self.cfg.test_bins)
        write_csv(self.out / "test_group.csv", ("id", "median_T_A"),
                  [(i, sel.medians[i]) for i in sel.ids], self.digest)
        train_ids = [i for i in ids if i not in sel.ids]
        return self._mark("select_test", ["test_group.csv"], test_ids=list(sel.ids),
                          train_ids=train_ids, chi2=sel.chi2, exhaustive=sel.exhaustive)

    # 5
    def stage_train(self, results) -> dict:
        train_ids = results["select_test"]["train_ids"]
        test = [self.dataset(i) for i in results["select_test"]["test_ids"]]
        jobs = [([self.dataset(i)], self.cfg.train) for i in train_ids]
        trained = _pool_map(_train_job, jobs, self.cfg.workers)
        rows, artifacts = [], []
        for ds_id, (model, chosen, sweep) in zip(train_ids, trained):
            rel = f"roms/rom_{ds_id}.json"
            export_model(model, self.out / rel)
            artifacts.append(rel)
            ds = self.dataset(ds_id)
            train_rmse = evaluate(simulate(model, ds.excitation, ds.x0).outputs, ds.outputs).rmse
            gm = group_metrics(model, test)
            rows.append((ds_id, chosen, train_rmse) + tuple(getattr(gm, k) for k in MEASURES))
        write_csv(self.out / "metrics_1set.csv", ("id", "complexity", "train_rmse") + MEASURES,
                  rows, self.digest)
        return self._mark("train", ["metrics_1set.csv"] + artifacts)

    def _one_set_metrics(self) -> list:
        return read_csv(self.out / "metrics_1set.csv")

    # 6
    def stage_correlate(self, results) -> dict:
        metrics = self._one_set_metrics()
        feats = {r["id"]: r for r in read_csv(self.out / "features.csv")}
        fvs, errs = [], []
        for row in metrics:
            f = feats[row["id"]]
            fvs.append(FeatureVector(row["id"], **{k: (float(f[k]) if f[k] else None) for k in FEATURES}))
            errs.append({k: float(row[k]) for k in MEASURES})
        cm = corr_matrix(fvs, errs)
        write_csv(self.out / "corr_matrix.csv", ("measure",) + FEATURES + ("m",),
                  [(meas,) + tuple(cm.R[a]) + (int(cm.m[a].min()),)
                   for a, meas in enumerate(cm.rows)], self.digest)
        feat = self.cfg.base_feature
        xs = [fv.get(feat) for fv in fvs]
        ys = [e["rmse"] for e in errs]
        pts = [(fv.id, x, y) for fv, x, y in zip(fvs, xs, ys) if x is not None]
        band_rows = []
        try:
            fit = linfit_bounds([p[1] for p in pts], [p[2] for p in pts], 0.95)
            band = {p[0]: (lo, hi) for p, lo, hi in zip(pts, fit.lower, fit.upper)}
        except TwinForgeError:
            fit, band = None, {}
        for ds_id, x, y in pts:
            lo, hi = band.get(ds_id, (None, None))
            band_rows.append((ds_id, x, y, lo, hi))
        write_csv(self.out / "corr_points.csv", ("label", "x", "y", "band_lower", "band_upper"),
                  band_rows, self.digest)
        arts = ["corr_matrix.csv", "corr_points.csv"]
        scatter_svg(self.out / "corr_scatter.svg", [p[1] for p in pts], [p[2] for p in pts],
                    [p[0] for p in pts], None, feat, "mean test RMSE / K", fit=fit)
        errors = {f"{a}|{b}": msg for (a, b), msg in cm.errors.items()}
        return self._mark("correlate", arts, cell_errors=errors)

    # 7
    def stage_partners(self, results) -> dict:
        feats = {r["id"]: r for r in read_csv(self.out / "features.csv")}
        train_ids = results["select_test"]["train_ids"]
        feat = self.cfg.base_feature
        scored = [(float(feats[i][feat]), i) for i in train_ids if feats[i][feat]]
        if not scored:
            raise StageFailure("partners", f"no training set carries feature {feat!r}")
        sign = 1.0 if self.cfg.base_direction == "max" else -1.0
        base_id = sorted(scored, key=lambda t: (-sign * t[0], t[1]))[0][1]
        own = {i: import_model(self.out / f"roms/rom_{i}.json") for i in train_ids}
        test = [self.dataset(i) for i in results["select_test"]["test_ids"]]
        chart = partner_chart(base_id, [self.dataset(i) for i in train_ids], own[base_id], own,
                              test, self.cfg.thresholds)
        write_csv(
            self.out / "partner_chart.csv",
            ("label", "x", "y", "own_rom_error", "category", "score", "recommended"),
            [(r.id, r.base_rom_error, r.similarity, r.own_rom_error, r.category.value, r.score,
              r.recommended) for r in chart.rows],
            self.digest,
        )
        scatter_svg(self.out / "partner_chart.svg", [r.base_rom_error for r in chart.rows],
                    [r.similarity for r in chart.rows], [r.id for r in chart.rows],
                    [r.category.value for r in chart.rows],
                    f"RMSE of base ROM {base_id} on candidate / K",
                    f"rms(T_oven,{base_id} - T_oven,j) / K")
        picks = chart.recommendations(self.cfg.partners)
        fallback = False
        if not picks:
            fallback = True
            picks = [r.id for r in chart.rows if r.id != base_id][: self.cfg.partners]
        return self._mark("partners", ["partner_chart.csv"], base_id=base_id, partners=picks,
                          partner_fallback=fallback, thresholds=chart.thresholds)

    # 8
    def stage_finalize(self, results) -> dict:
        base_id = results["partners"]["base_id"]
        partners = results["partners"]["partners"]
        test = [self.dataset(i) for i in results["select_test"]["test_ids"]]
        one_set = {r["id"]: r for r in self._one_set_metrics()}
        best1_id = min(one_set, key=lambda i: (float(one_set[i]["rmse"]), i))
        best1 = float(one_set[best1_id]["rmse"])
        base_rmse = float(one_set[base_id]["rmse"])

        jobs = [([self.dataset(base_id), self.dataset(p)], self.cfg.train) for p in partners]
        trained = _pool_map(_train_job, jobs, self.cfg.workers)
        rows = [(base_id, "", int(one_set[base_id]["complexity"]))
                + tuple(float(one_set[base_id][k]) for k in MEASURES)]
        combos = []
        for p, (model, chosen, _) in zip(partners, trained):
            gm = group_metrics(model, test)
            combos.append((gm.rmse, p, model, chosen))
            rows.append((base_id, p, chosen) + tuple(getattr(gm, k) for k in MEASURES))
        write_csv(self.out / "combos.csv", ("base", "partner", "complexity") + MEASURES, rows,
                  self.digest)
        final_rmse, partner, model, chosen = min(combos, key=lambda c: (c[0], c[1]))
        export_model(model, self.out / "final_model.json")

        train_traj = []
        for ds_id in (base_id, partner):
            ds = self.dataset(ds_id)
            tr = simulate(model, ds.excitation, ds.x0)
            rel = f"final_train_{ds_id}.csv"
            write_csv(self.out / rel, ("t", "T_A", "T_B"),
                      trajectory_csv_rows(ds.grid.times, tr.outputs), self.digest)
            train_traj.append(rel)

        improved = final_rmse <= best1
        reduction = (best1 - final_rmse) / best1 * 100.0
        if not improved:
            log.warning("no 2-set ROM beats the best 1-set ROM %s (%.4g K vs %.4g K)",
                        best1_id, final_rmse, best1)
        return self._mark(
            "finalize", ["combos.csv", "final_model.json"] + train_traj,
            final_ids=[base_id, partner], final_complexity=chosen, final_rmse=final_rmse,
            best_one_set_id=best1_id, best_one_set_rmse=best1, base_rmse=base_rmse,
            reduction_vs_best_one_set_pct=reduction,
            reduction_vs_base_pct=(base_rmse - final_rmse) / base_rmse * 100.0,
            improved=improved, no_improvement_flag=not improved,
        )

    def _write_report(self, results: dict) -> None:
        report = {
            "config_digest": self.digest,
            "stages": {s: {k: v for k, v in doc.items() if k != "config_digest"}
                       for s, doc in results.items()},
        }
        (self.out / "report.json").write_text(
            json.dumps(report, indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )


def run_pipeline(config: PipelineConfig, until: str = "finalize") -> dict:
    return Pipeline(config).run(until)


# -- standalone prediction and benchmark --------------------------------------

def load_signal_csv(path, kind: SignalKind = SignalKind.APRBS) -> ExcitationSignal:
    """Excitation from a CSV with columns ``t,T_oven`` (extra columns ignored)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid(f"cannot read signal file {path}: {exc}") from None
    header = None
    t, g = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            header = cells
            if "t" not in header or "T_oven" not in header:
                raise ParseFailure("header must contain t and T_oven", lineno)
            continue
        if len(cells) != len(header):
            raise ParseFailure(f"expected {len(header)} fields, got {len(cells)}", lineno)
        try:
            t.append(float(cells[header.index("t")]))
            g.append(float(cells[header.index("T_oven")]))
        except ValueError:
            raise ParseFailure(f"non-numeric value in {line!r}", lineno) from None
    if header is None or len(t) < 2:
        raise ParseFailure("need a header and at least two rows", max(1, len(text.splitlines())))
    return ExcitationSignal(grid_from_times(np.array(t)), np.array(g), kind)


def predict(model_file, signal, x0, out_path=None):
    """Integrate an exported ROM on ``signal`` from ``x0``; optionally write ``t,T_A,T_B``."""
    model = import_model(model_file)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.n,):
        raise InvalidDimension(f"model has n={model.n} outputs but x0 has {x0.size} values")
    traj = simulate(model, signal, x0)
    if out_path is not None:
        buf = io.StringIO()
        buf.write("t,T_A,T_B\n")
        for row in trajectory_csv_rows(signal.grid.times, traj.outputs):
            buf.write(",".join(fmt(float(v)) for v in row) + "\n")
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(buf.getvalue(), encoding="utf-8")
    return traj


@dataclass(frozen=True)
class SpeedReport:
    rom_wall_time: float
    fom_wall_time: float
    speedup: float
    repeats: int

    def __post_init__(self):
        if not (self.rom_wall_time > 0 and self.fom_wall_time > 0):
            raise ConfigInvalid("wall times must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def bench(model, fom_cfg: FomConfig, signal, repeats: int = 20, fom_repeats: int = 3) -> SpeedReport:
    """Median wall time of ROM and FOM runs on ``signal``; ``Sp = fom / rom``."""
    if repeats < 10 or fom_repeats < 1:
        raise ConfigInvalid("need at least 10 ROM and 1 FOM repetitions")
    if not isinstance(model, RomModel):
        model = import_model(model)
    fom_cfg.validate()
    ds = simulate_fom(signal, fom_cfg)  # warm-up, also supplies x0
    simulate(model, signal, ds.x0)

    def timed(fn, count):
        out = []
        for _ in range(count):
            t0 = time.perf_counter()
            fn()
            out.append(time.perf_counter() - t0)
        return float(np.median(out))

    rom_t = timed(lambda: simulate(model, signal, ds.x0), repeats)
    fom_t = timed(lambda: simulate_fom(signal, fom_cfg), fom_repeats)
    return SpeedReport(rom_t, fom_t, fom_t / rom_t, repeats)
