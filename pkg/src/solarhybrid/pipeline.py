"""End-to-end fit / forecast / evaluate / sweep / rank over files on disk.

Layout under ``cfg.out_dir``::

    models/       station.txt, fit.txt, arma.json, mlp_*.json, pc.csv, correlogram.csv,
                  reliability_climatology.csv
    predictions.csv, selection_log_C.csv
    reports/      nrmse.csv/.txt, stationarization.csv/.txt, ranking_input.csv,
                  branch_shares.txt, reliability.csv, sweep.csv/.txt, ranking.csv/.txt
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import arma as arma_mod
from . import evaluation as ev
from . import hybrid, ingest, mlp, stats
from .config import PipelineConfig, read_kv, write_kv
from .solar_geometry import (StationMeta, clearsky_ghi, fit_solis, read_station_file,
                             solar_instant, write_station_file)
from .stationarize import (Method, StationarizedSeries, destationarize, load_coefficients,
                           periodic_coefficients, save_coefficients, stationarize, to_clearsky_index,
                           to_csi_pc)

log = logging.getLogger(__name__)

BASELINES = ("Persistence", "Clear Sky", "Average")
SINGLE = ("ARMA", "ANN endo", "ANN exo")
HYBRIDS = ("Hybrid A", "Hybrid B", "Hybrid C")
EXO_CHANNELS = ("cloudiness", "pressure", "precipitation")


class PipelineError(RuntimeError):
    pass


@dataclass
class Prepared:
    meta: StationMeta
    series: ingest.HourlySeries
    n_train: int
    n_val: int
    n_test: int

    @property
    def n_fit(self) -> int:
        return self.n_train + self.n_val

    @property
    def test_positions(self) -> np.ndarray:
        return np.arange(self.n_fit, len(self.series))

    def channels(self) -> dict[str, np.ndarray]:
        ch = self.series.channels()
        return {k: ch[k] for k in EXO_CHANNELS if k in ch}


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise PipelineError(f"missing {what}: {path}")
    return path


def models_dir(cfg: PipelineConfig) -> Path:
    return Path(cfg.out_dir) / "models"


def reports_dir(cfg: PipelineConfig) -> Path:
    return Path(cfg.out_dir) / "reports"


def prepare(cfg: PipelineConfig, meta: StationMeta | None = None) -> Prepared:
    """Load, repair, filter and split; fit Solis on the fit block if needed."""
    cfg.validate()
    if cfg.data_file is None:
        raise PipelineError("config has no data_file")
    if meta is None:
        if cfg.station_file is None:
            raise PipelineError("config has no station_file")
        meta = read_station_file(_require(Path(cfg.station_file), "station file"))
    raw = ingest.load_csv(_require(Path(cfg.data_file), "data file"), station_id=meta.station_id)
    series = ingest.repair_missing(raw, cfg.max_missing_frac)
    series = ingest.daytime_filter(series, meta)
    spec = ingest.SplitSpec(cfg.train_fraction, cfg.validation_fraction, cfg.test_fraction)
    n_train, n_val, n_test = ingest.split_sizes(len(series), spec)
    if n_train + n_val < 3 or n_test < 1:
        raise PipelineError("split leaves too little data for fitting or testing")
    if not meta.has_solis:
        tau, b = fit_solis(series.take(slice(0, n_train + n_val)), meta)
        meta = meta.with_solis(tau, b)
    return Prepared(meta, series, n_train, n_val, n_test)


def stationarize_for(prep: Prepared, method: Method, pc: np.ndarray | None = None) -> StationarizedSeries:
    """Stationarize the whole series; periodic coefficients come from the fit block only."""
    if method is Method.CSI_PC:
        csi = to_clearsky_index(prep.series, prep.meta)
        if pc is None:
            pc = periodic_coefficients(csi.take(slice(0, prep.n_fit)))
        return to_csi_pc(csi, pc)
    return stationarize(prep.series, prep.meta, method)


def train_config(cfg: PipelineConfig) -> mlp.TrainConfig:
    return mlp.TrainConfig(max_fail=cfg.max_fail, max_epochs=cfg.max_epochs)


def select_lags(cfg: PipelineConfig, values: np.ndarray,
                channels: dict) -> tuple[stats.CorrelationProfile | None, list[int], dict]:
    """Endogenous and exogenous lag counts. A series without any structure gets one
    endogenous lag and no exogenous inputs (``profile`` is then None)."""
    try:
        profile = stats.correlation_profile(values, max_lag=max(20, cfg.max_endo_lags), alpha=cfg.alpha)
    except stats.StatsError:
        return None, [1], {k: 0 for k in channels}
    try:
        endo = stats.select_endogenous_lags(profile, cfg.max_endo_lags)
    except stats.StatsError:
        endo = [1]
    thresholds = {"cloudiness": cfg.cloud_threshold, "pressure": cfg.other_threshold,
                  "precipitation": cfg.other_threshold}
    exo = stats.select_exogenous_lags(values, channels, thresholds, cfg.max_exo_lags)
    return profile, endo, exo


def _arma_spec(cfg: PipelineConfig) -> hybrid.ArmaSpec:
    if cfg.arma_order == "auto":
        return hybrid.ArmaSpec(None, cfg.p_max, cfg.q_max)
    p, q = (int(v) for v in cfg.arma_order.replace(",", " ").split())
    return hybrid.ArmaSpec((p, q), cfg.p_max, cfg.q_max)


def _index_nrmse(s: StationarizedSeries, index: np.ndarray, pred_index: np.ndarray, measured: np.ndarray) -> float:
    pred, _ = destationarize(s, pred_index, index=index)
    return ev.nrmse(measured[index], pred)


def validation_nrmse(prep: Prepared, s: StationarizedSeries, net: mlp.MlpModel, channels) -> float:
    """nRMSE in Wh/m2 on the validation block."""
    pos = np.arange(max(prep.n_train, net.architecture.max_lag), prep.n_fit)
    X, _ = mlp.lagged_design(s.values, net.architecture, channels, targets=pos)
    return _index_nrmse(s, pos, mlp.predict(net, X), prep.series.radiation)


def train_branch(prep: Prepared, s: StationarizedSeries, arch: mlp.MlpArchitecture, cfg: PipelineConfig,
                 seeds, channels) -> mlp.MlpModel:
    spec = hybrid.MlpSpec(arch, train_config(cfg), tuple(seeds),
                          validation_fraction=prep.n_val / max(prep.n_fit, 1) if prep.n_val else 0.10)
    net, _ = hybrid.fit_mlp(s.values[: prep.n_fit], spec, _head(channels, prep.n_fit))
    return net


def _head(channels: dict, n: int) -> dict:
    return {k: v[:n] for k, v in channels.items()}


def sweep_hidden(prep: Prepared, s: StationarizedSeries, base: mlp.MlpArchitecture, cfg: PipelineConfig,
                 channels) -> pd.DataFrame:
    """Validation nRMSE per hidden size across seeds, with mean and 95% interval."""
    rows = []
    for h in cfg.sweep_grid:
        arch = replace(base, hidden=int(h))
        scores = [validation_nrmse(prep, s, train_branch(prep, s, arch, cfg, [seed], channels), channels)
                  for seed in cfg.seeds]
        scores = np.asarray(scores)
        mean = float(scores.mean())
        half = float(1.96 * scores.std(ddof=1) / np.sqrt(len(scores))) if len(scores) > 1 else 0.0
        rows.append({"hidden": int(h), "architecture": arch.canonical, "n_seeds": len(scores),
                     "mean_nrmse": mean, "ci95_low": mean - half, "ci95_high": mean + half})
    return pd.DataFrame(rows)


def _architectures(cfg, prep, s, channels) -> tuple[mlp.MlpArchitecture, mlp.MlpArchitecture, dict]:
    profile, endo, exo = select_lags(cfg, s.values[: prep.n_fit], _head(channels, prep.n_fit))
    info = {"endogenous_lags": len(endo), **{f"lags_{k}": v for k, v in exo.items()}}
    if cfg.hidden == "auto":
        base = mlp.MlpArchitecture.from_lags(len(endo), exo, cfg.sweep_grid[0])
        table = sweep_hidden(prep, s, base, cfg, channels)
        hidden = int(table.sort_values(["mean_nrmse", "hidden"]).iloc[0]["hidden"])
    else:
        hidden = int(cfg.hidden)
    exo_arch = (mlp.MlpArchitecture.from_lags(len(endo), exo, hidden) if cfg.architecture == "auto"
                else mlp.MlpArchitecture.parse(cfg.architecture))
    endo_arch = (mlp.MlpArchitecture(exo_arch.endo, hidden=exo_arch.hidden) if cfg.endo_architecture == "auto"
                 else mlp.MlpArchitecture.parse(cfg.endo_architecture))
    info["profile"] = profile
    return exo_arch, endo_arch, info


def fit(cfg: PipelineConfig) -> dict:
    prep = prepare(cfg)
    mdir = models_dir(cfg)
    mdir.mkdir(parents=True, exist_ok=True)
    write_station_file(prep.meta, mdir / "station.txt")
    method = Method.parse(cfg.method)
    channels = prep.channels()
    pc = None
    if method is Method.CSI_PC or "CSI_PC" in [Method.parse(m).value for m in cfg.compare_methods]:
        csi_fit = to_clearsky_index(prep.series.take(slice(0, prep.n_fit)), prep.meta)
        pc = periodic_coefficients(csi_fit)
        save_coefficients(pc, mdir / "pc.csv")
    s = stationarize_for(prep, method, pc)
    fit_values = s.values[: prep.n_fit]

    arma_model = hybrid.fit_arma(fit_values, _arma_spec(cfg))
    arma_model.save(mdir / "arma.json")

    exo_arch, endo_arch, info = _architectures(cfg, prep, s, channels)
    profile = info.pop("profile")
    if profile is not None:
        profile.to_csv(mdir / "correlogram.csv")
    seeds = cfg.seeds
    ann_exo = train_branch(prep, s, exo_arch, cfg, seeds, channels)
    ann_endo = train_branch(prep, s, endo_arch, cfg, seeds, channels)
    ann_exo.save(mdir / "mlp_exo.json")
    ann_endo.save(mdir / "mlp_endo.json")

    spec = hybrid.MlpSpec(exo_arch, train_config(cfg), tuple(seeds),
                          validation_fraction=prep.n_val / prep.n_fit if prep.n_val else 0.10)
    hb = hybrid.fit_hybrid("B", fit_values, prep.series.timestamps[: prep.n_fit], _arma_spec(cfg), spec,
                           _head(channels, prep.n_fit), cfg.season_scheme)
    hb.arma.save(mdir / "hybrid_b_arma.json")
    hb.mlp.save(mdir / "hybrid_b_mlp.json")

    # reliability climatology from in-sample Model C forecasts on the fit block
    hc = hybrid.from_branches("C", arma_model, ann_exo, cfg.season_scheme)
    start = max(arma_model.p, exo_arch.max_lag)
    pos = np.arange(start, prep.n_fit)
    sel = hybrid.run_hybrid(hc, s.values, prep.series.timestamps, pos, channels)
    pred_wh, _ = destationarize(s, sel.selected, index=pos)
    eta = ev.reliability_index(prep.series.radiation[pos], pred_wh)
    clim = ev.reliability_climatology(eta, prep.series.slots[pos])
    pd.DataFrame({"slot": np.arange(len(clim)), "eta": clim}).to_csv(
        mdir / "reliability_climatology.csv", index=False, float_format="%.10g")

    record = {
        "method": method.value,
        "n_train": prep.n_train, "n_val": prep.n_val, "n_test": prep.n_test,
        "arma_order": f"{arma_model.p} {arma_model.q}",
        "ann_exo": exo_arch.canonical, "ann_endo": endo_arch.canonical,
        "cv_fit": f"{ev.coefficient_of_variation(fit_values):.10g}",
        **{k: str(v) for k, v in info.items()},
    }

    for name in cfg.compare_methods:
        m = Method.parse(name)
        sm = stationarize_for(prep, m, pc)
        arch_m, _, _ = _architectures(_fixed_hidden(cfg, exo_arch.hidden), prep, sm, channels)
        net = train_branch(prep, sm, arch_m, cfg, seeds, channels)
        net.save(mdir / f"mlp_cmp_{m.value}.json")
        record[f"cmp_{m.value}_arch"] = arch_m.canonical
        record[f"cmp_{m.value}_cv"] = f"{ev.coefficient_of_variation(sm.values[: prep.n_fit]):.10g}"
    write_kv(record, mdir / "fit.txt")
    return record


def _fixed_hidden(cfg: PipelineConfig, hidden: int) -> PipelineConfig:
    return replace(cfg, hidden=str(hidden), architecture="auto", endo_architecture="auto")


def _load_fit(cfg: PipelineConfig):
    mdir = models_dir(cfg)
    record = read_kv(_require(mdir / "fit.txt", "fit record (run `fit` first)"))
    meta = read_station_file(_require(mdir / "station.txt", "fitted station file"))
    pc = load_coefficients(mdir / "pc.csv") if (mdir / "pc.csv").exists() else None
    try:
        models = {
            "arma": arma_mod.ArmaModel.load(_require(mdir / "arma.json", "ARMA model")),
            "exo": mlp.MlpModel.load(_require(mdir / "mlp_exo.json", "MLP model")),
            "endo": mlp.MlpModel.load(_require(mdir / "mlp_endo.json", "MLP model")),
            "b_arma": arma_mod.ArmaModel.load(_require(mdir / "hybrid_b_arma.json", "hybrid B ARMA")),
            "b_mlp": mlp.MlpModel.load(_require(mdir / "hybrid_b_mlp.json", "hybrid B MLP")),
        }
    except (arma_mod.ArmaError, mlp.MlpError, json.JSONDecodeError, KeyError) as exc:
        raise PipelineError(f"cannot read serialized model: {exc}") from None
    return record, meta, pc, models


def forecast(cfg: PipelineConfig) -> pd.DataFrame:
    record, meta, pc, models = _load_fit(cfg)
    prep = prepare(cfg, meta)
    method = Method.parse(record["method"])
    s = stationarize_for(prep, method, pc)
    channels = prep.channels()
    pos = prep.test_positions
    measured = prep.series.radiation
    ts = prep.series.timestamps
    slots = prep.series.slots

    def to_wh(index_pred, stat=s):
        return destationarize(stat, index_pred, index=pos)[0]

    out = pd.DataFrame({
        "timestamp": pd.to_datetime(ts[pos]).strftime("%Y-%m-%dT%H:%M:%S"),
        "season": [hybrid.Season(int(c)).label for c in hybrid.season_of(ts[pos], cfg.season_scheme)],
        "slot": slots[pos],
        "measured": measured[pos],
    })
    out["Persistence"] = ev.baseline_forecast("Persistence", measured=measured)[pos]
    clear = clearsky_ghi(prep.meta, solar_instant(prep.meta, ts[pos]))
    out["Clear Sky"] = ev.baseline_forecast("Clear Sky", clearsky=clear)
    clim = ev.slot_climatology(measured[: prep.n_fit], slots[: prep.n_fit])
    clim = np.where(np.isnan(clim), np.nanmean(clim), clim)
    out["Average"] = ev.baseline_forecast("Average", climatology=clim, slots=slots[pos])

    arma_model, ann_exo, ann_endo = models["arma"], models["exo"], models["endo"]
    out["ARMA"] = to_wh(arma_mod.one_step_predictions(arma_model, s.values)[pos])
    for name, net in (("ANN endo", ann_endo), ("ANN exo", ann_exo)):
        X, _ = mlp.lagged_design(s.values, net.architecture, channels, targets=pos)
        out[name] = to_wh(mlp.predict(net, X))

    hybrids = {
        "A": hybrid.from_branches("A", arma_model, ann_exo, cfg.season_scheme),
        "B": hybrid.HybridModel("B", models["b_arma"], models["b_mlp"], season_scheme=cfg.season_scheme),
        "C": hybrid.from_branches("C", arma_model, ann_exo, cfg.season_scheme),
    }
    for mode, model in hybrids.items():
        sel = hybrid.run_hybrid(model, s.values, ts, pos, channels)
        out[f"Hybrid {mode}"] = to_wh(sel.selected)
        out[f"branch_{mode}"] = sel.branch
        if mode == "C":
            sel.to_csv(Path(cfg.out_dir) / "selection_log_C.csv")

    eta_clim = pd.read_csv(_require(models_dir(cfg) / "reliability_climatology.csv",
                                    "reliability climatology"))["eta"].to_numpy()
    out["eta_clim"] = eta_clim[slots[pos]]
    out["IC"] = ev.interval_confidence(out["Hybrid C"].to_numpy(), out["eta_clim"].to_numpy())

    for name in cfg.compare_methods:
        m = Method.parse(name)
        path = models_dir(cfg) / f"mlp_cmp_{m.value}.json"
        if not path.exists():
            continue
        sm = stationarize_for(prep, m, pc)
        net = mlp.MlpModel.load(path)
        X, _ = mlp.lagged_design(sm.values, net.architecture, channels, targets=pos)
        out[f"ANN[{m.value}]"] = to_wh(mlp.predict(net, X), sm)

    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    out.to_csv(Path(cfg.out_dir) / "predictions.csv", index=False, float_format="%.10g")
    return out


def _fmt_table(df: pd.DataFrame, floatfmt: str = "{:.1f}") -> str:
    cells = [[str(c) for c in df.columns]]
    for _, row in df.iterrows():
        cells.append([floatfmt.format(v) if isinstance(v, (float, np.floating)) else str(v) for v in row])
    widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def evaluate(cfg: PipelineConfig) -> ev.EvaluationReport:
    pred_path = _require(Path(cfg.out_dir) / "predictions.csv", "predictions (run `forecast` first)")
    df = pd.read_csv(pred_path)
    record = read_kv(_require(models_dir(cfg) / "fit.txt", "fit record"))
    rdir = reports_dir(cfg)
    rdir.mkdir(parents=True, exist_ok=True)
    x = df["measured"].to_numpy()
    report = ev.EvaluationReport()
    for name in (*BASELINES, *SINGLE, *HYBRIDS):
        report.per_model[name] = ev.score_model(x, df[name].to_numpy(), df["season"].to_numpy())
    table = report.nrmse_table()
    pct = table.copy()
    pct[["Annual", *ev.SEASON_COLUMNS]] *= 100.0
    pct.to_csv(rdir / "nrmse.csv", index=False, float_format="%.4f")
    text = _fmt_table(pct)
    shares = {}
    for mode in "ABC":
        col = df[f"branch_{mode}"].to_numpy()
        shares[mode] = (int(np.sum(col == hybrid.AR)), int(np.sum(col == hybrid.ANN)))
    text += "\n" + "\n".join(f"Hybrid {m}: {a} ARMA / {b} ANN" for m, (a, b) in shares.items()) + "\n"
    station = read_station_file(models_dir(cfg) / "station.txt").station_id
    (rdir / "nrmse.txt").write_text(
        f"nRMSE (%) on the test block, station {station}, {record.get('method', '')}\n\n" + text)
    (rdir / "branch_shares.txt").write_text(
        "\n".join(f"{m},{a},{b}" for m, (a, b) in shares.items()) + "\n")

    rank_rows = []
    for name in (*SINGLE, *BASELINES):
        for season, value in report.per_model[name].seasonal.items():
            rank_rows.append({"station": station, "season": season, "model": name, "nrmse": value})
    pd.DataFrame(rank_rows).to_csv(rdir / "ranking_input.csv", index=False, float_format="%.10g")

    cmp_rows = []
    for name in cfg.compare_methods:
        m = Method.parse(name)
        col = f"ANN[{m.value}]"
        if col in df:
            cmp_rows.append({"Stationarity": m.value, "ANN Architecture": record.get(f"cmp_{m.value}_arch", ""),
                             "CV": float(record.get(f"cmp_{m.value}_cv", "nan")),
                             "nRMSE": ev.nrmse(x, df[col].to_numpy())})
    if cmp_rows:
        cmp = pd.DataFrame(cmp_rows)
        cmp.to_csv(rdir / "stationarization.csv", index=False, float_format="%.6f")
        (rdir / "stationarization.txt").write_text(_fmt_table(cmp, "{:.3f}"))

    eta = ev.reliability_index(x, df["Hybrid C"].to_numpy())
    report.reliability = eta
    report.confidence = df["IC"].to_numpy()
    pd.DataFrame({"timestamp": df["timestamp"], "measured": x, "forecast": df["Hybrid C"],
                  "eta": eta, "eta_clim": df["eta_clim"], "IC": df["IC"],
                  "lower": df["Hybrid C"] - df["IC"], "upper": df["Hybrid C"] + df["IC"]}).to_csv(
        rdir / "reliability.csv", index=False, float_format="%.10g", na_rep="")
    return report


def sweep(cfg: PipelineConfig) -> pd.DataFrame:
    prep = prepare(cfg)
    s = stationarize_for(prep, Method.parse(cfg.method))
    channels = prep.channels()
    if cfg.architecture == "auto":
        _, endo, exo = select_lags(cfg, s.values[: prep.n_fit], _head(channels, prep.n_fit))
        base = mlp.MlpArchitecture.from_lags(len(endo), exo, 1)
    else:
        base = mlp.MlpArchitecture.parse(cfg.architecture)
    table = sweep_hidden(prep, s, base, cfg, channels)
    rdir = reports_dir(cfg)
    rdir.mkdir(parents=True, exist_ok=True)
    table.to_csv(rdir / "sweep.csv", index=False, float_format="%.6f")
    (rdir / "sweep.txt").write_text(_fmt_table(table, "{:.4f}"))
    return table


def rank(inputs, out_dir) -> pd.DataFrame:
    frames = [pd.read_csv(_require(Path(p), "ranking input")) for p in inputs]
    table = ev.rank_predictors(pd.concat(frames, ignore_index=True))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "ranking.csv", index=False)
    seasons = [s for s in ev.SEASON_COLUMNS if s in set(table["season"])]
    models = list(dict.fromkeys(table.sort_values(["points", "model"], kind="mergesort")["model"]))
    rows = []
    for model in models:
        row = {"Models": model}
        for season in seasons:
            hit = table[(table["season"] == season) & (table["model"] == model)]
            if len(hit):
                r = hit.iloc[0]
                flag = "*" if r["tie"] else ""
                row[season] = f"{ev.ordinal(int(r['position']))} ({int(r['points'])} pts){flag}"
            else:
                row[season] = "-"
        rows.append(row)
    (out / "ranking.txt").write_text(_fmt_table(pd.DataFrame(rows)) +
                                     "* tie in nRMSE at one or more stations, broken by model name\n")
    return table
