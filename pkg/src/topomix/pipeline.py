"""Stage-by-stage orchestration over an artifact directory.

Each stage reads what earlier stages wrote, so ``run`` is exactly the
sequence of individual stages. Stages also merge a summary into
``report.json``; wall-clock timings live under its ``timings`` key.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import artifacts as art
from .cluster import hcluster
from .config import PipelineConfig
from .decompose import SeparatedComponents, classify_linear, pca
from .errors import ConfigError, InputError, StageError, TopomixError
from .metric import CurveDescriptor, distance_matrix
from .mogp import gp_fit, gp_predict
from .persistence import PersistenceConfig, bar_lengths, mixed_coordinates, periodic_coordinate
from .series_io import (LinearTrend, ResidualSet, TimeSeriesSet, detrend, fit_line, load_csv,
                        synth_fig2, write_csv)

SERIES = "series.csv"
DECOMPOSITION = "decomposition.json"
DIAGRAMS = "diagrams"
COORDS = "coords.csv"
MIXED = "mixed.json"
CURVES = "curves.json"
DISTMATRIX = "distmatrix.csv"
CLUSTERS = "clusters.json"
MODEL = "model.json"
PREDICTIONS = "predictions.csv"
REPORT = "report.json"

VALIDATION_ERRORS = (InputError, ConfigError, StageError)


def persistence_config(cfg: PipelineConfig) -> PersistenceConfig:
    return PersistenceConfig(delay_r=cfg.delay_r, delay_eps=cfg.delay_eps, prime=cfg.field_prime,
                             rho=cfg.rho, alpha=cfg.alpha, landmarks=cfg.landmarks, seed=cfg.seed)


def synth_series(cfg: PipelineConfig) -> TimeSeriesSet:
    n, t_max, std, seed = cfg.synth
    return synth_fig2(n, t_max, std, cfg.seed if seed is None else seed)


def _series_to_dict(ts: TimeSeriesSet) -> dict:
    return {"times": ts.times, "values": ts.values, "channel_names": list(ts.channel_names)}


def _series_from_dict(d: dict) -> TimeSeriesSet:
    return TimeSeriesSet(np.array(d["times"], dtype=float), np.array(d["values"], dtype=float),
                         tuple(d["channel_names"]))


def load_series(out: Path) -> TimeSeriesSet:
    return _series_from_dict(art.read_json(out / DECOMPOSITION, "decompose")["series"])


# stages

def stage_synth(cfg: PipelineConfig, out: Path) -> dict:
    if cfg.synth is None:
        raise ConfigError("synth stage needs synth = n,tmax,std[,seed]")
    ts = synth_series(cfg)
    out.mkdir(parents=True, exist_ok=True)
    tmp = out / f".{SERIES}.tmp"
    write_csv(ts, tmp)
    tmp.replace(out / SERIES)
    return {"series": {"n_channels": ts.n_channels, "n_times": ts.n_times}}


def stage_decompose(cfg: PipelineConfig, out: Path) -> dict:
    if cfg.input:
        ts = load_csv(cfg.input, cfg.delimiter, cfg.header)
    elif cfg.synth is not None:
        ts = synth_series(cfg)
    elif (out / SERIES).exists():
        ts = load_csv(out / SERIES)
    else:
        raise StageError(f"no input: pass --input, --synth-fig2, or provide {out / SERIES}")
    res = detrend(ts) if cfg.detrend else ResidualSet.identity(ts)
    n_keep, fraction = cfg.pca_keep_value
    pc = pca(res, n_keep, cfg.standardize, fraction)
    sep = classify_linear(pc, ts.times, cfg.tau_threshold, res.trends)
    linear = {i for i, _ in sep.linear}
    components = [{"index": i, "tau": float(sep.tau_values[i]),
                   "explained_variance": float(pc.explained_variance[i]),
                   "class": "linear" if i in linear else "rest", "scores": pc.scores[i]}
                  for i in range(pc.n_components)]
    art.write_json(out / DECOMPOSITION, {
        "series": _series_to_dict(ts),
        "detrended": cfg.detrend,
        "trends": [{"channel": tr.channel_index, "slope": tr.slope, "intercept": tr.intercept}
                   for tr in res.trends],
        "tau_threshold": cfg.tau_threshold,
        "loadings": pc.loadings,
        "components": components,
    })
    return {"decompose": {"n_components": pc.n_components, "n_linear": sep.n_ell,
                          "tau": sep.tau_values}}


def read_separated(out: Path) -> SeparatedComponents:
    d = art.read_json(out / DECOMPOSITION, "decompose")
    comps = sorted(d["components"], key=lambda c: c["index"])
    times = np.array(d["series"]["times"], dtype=float)
    linear = [(c["index"], np.array(c["scores"], dtype=float)) for c in comps if c["class"] == "linear"]
    rest = [(c["index"], np.array(c["scores"], dtype=float)) for c in comps if c["class"] != "linear"]
    trends = [LinearTrend(t["slope"], t["intercept"], t["channel"]) for t in d["trends"]]
    return SeparatedComponents(times, linear, rest, np.array([c["tau"] for c in comps]),
                               np.array([c["explained_variance"] for c in comps]),
                               d["tau_threshold"], trends)


def stage_coords(cfg: PipelineConfig, out: Path) -> dict:
    sep = read_separated(out)
    mixed = mixed_coordinates(sep, persistence_config(cfg))
    for i, diag in mixed.diagrams.items():
        art.write_json(out / DIAGRAMS / f"component_{i}.json", art.diagram_to_dict(diag, i))
    header = ["time"] + [f"c_{k + 1}" for k in range(mixed.n_c)]
    rows = [[float(t)] + [float(c.values[j]) for c in mixed.circular_parts]
            for j, t in enumerate(mixed.times)]
    art.write_table(out / COORDS, header, rows)
    summary = {
        "n_linear": mixed.n_ell, "n_circular": mixed.n_c, "n_noise": mixed.n_noise,
        "n_components": mixed.n_components,
        "linear_components": [i for i, _ in mixed.linear_parts],
        "circular_components": [c.source_component for c in mixed.circular_parts],
        "noise_components": mixed.noise_components,
        "significant_persistence": mixed.persistence,
    }
    art.write_json(out / MIXED, summary)
    persistence = {str(i): {"h1_bars": int(len(d.h1)), "longest": float(bar_lengths(d).max(initial=0.0)),
                            "diameter": d.diameter, "significant": mixed.persistence[i]}
                   for i, d in mixed.diagrams.items()}
    return {"counts": {k: summary[k] for k in ("n_linear", "n_circular", "n_noise", "n_components")},
            "persistence": persistence}


def curve_descriptors(ts: TimeSeriesSet, cfg: PipelineConfig) -> list:
    """One descriptor per channel: OLS line plus a circular coordinate when the
    detrended channel carries a significant loop."""
    pcfg = persistence_config(cfg)
    out = []
    for i, y in enumerate(ts.values):
        slope, intercept = fit_line(ts.times, y)
        trend = LinearTrend(slope, intercept, i)
        coord, _, _ = periodic_coordinate(y - trend(ts.times), pcfg, i)
        out.append(CurveDescriptor(trend, coord, ts.n_times, float(ts.times[0]),
                                   float(ts.times[-1]), ts.channel_names[i]))
    return out


def stage_dist(cfg: PipelineConfig, out: Path) -> dict:
    ts = load_series(out)
    desc = curve_descriptors(ts, cfg)
    D = distance_matrix(desc, cfg.w_lin, cfg.w_circ, cfg.missing_penalty, cfg.metric_grid)
    art.write_distance_matrix(out / DISTMATRIX, D)
    art.write_json(out / CURVES, {"curves": [
        {"name": d.name, "slope": d.trend.slope, "intercept": d.trend.intercept,
         "periodic": d.circular is not None,
         "persistence": d.circular.persistence if d.circular is not None else 0.0}
        for d in desc]})
    return {"curves": {d.name: d.circular is not None for d in desc}}


def stage_cluster(cfg: PipelineConfig, out: Path) -> dict:
    D = art.read_distance_matrix(out / DISTMATRIX, "dist")
    cl = hcluster(D, cfg.clusters)
    data = art.clustering_to_dict(cl, D.names)
    art.write_json(out / CLUSTERS, data)
    return {"clusters": data["assignments"]}


def stage_gp_fit(cfg: PipelineConfig, out: Path) -> dict:
    ts = load_series(out)
    cl = art.clustering_from_dict(art.read_json(out / CLUSTERS, "cluster"), ts.channel_names)
    grid = art.read_hyper_grid(cfg.grid_file) if cfg.grid_file else None
    model = gp_fit(ts, cl, cfg.lambda1, cfg.lambda2, grid, detrend=cfg.gp_detrend)
    art.write_json(out / MODEL, art.model_to_dict(model))
    h = model.hyper
    return {"fit": {"variance": h.variance, "length_scale": h.length_scale,
                    "noise_variance": h.noise_variance, "log_likelihood": model.log_likelihood,
                    "jitter": model.jitter, "grid_size": model.grid_size}}


def parse_times(text: str | None, default) -> np.ndarray:
    if text is None:
        return np.asarray(default, dtype=float)
    try:
        if ":" in text:
            a, b, k = text.split(":")
            return np.linspace(float(a), float(b), int(k))
        return np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError:
        raise InputError(f"cannot parse times {text!r}; use a,b,c or start:stop:count") from None


def resolve_task(task: str, names) -> int:
    if task in names:
        return list(names).index(task)
    try:
        return int(task)
    except ValueError:
        raise InputError(f"unknown task {task!r}; expected an index or one of {list(names)}") from None


def stage_gp_predict(cfg: PipelineConfig, out: Path) -> dict:
    model = art.model_from_dict(art.read_json(out / MODEL, "gp-fit"))
    q = parse_times(cfg.times, model.times)
    task = resolve_task(str(cfg.task), model.task_names)
    mean, var = gp_predict(model, q, task)
    art.write_table(out / PREDICTIONS, ["time", "mean", "variance"],
                    [[float(t), float(m), float(v)] for t, m, v in zip(q, mean, var)])
    return {"prediction": {"task": task, "n_points": int(q.size)}}


STAGES = {
    "synth": stage_synth,
    "decompose": stage_decompose,
    "coords": stage_coords,
    "dist": stage_dist,
    "cluster": stage_cluster,
    "gp-fit": stage_gp_fit,
    "gp-predict": stage_gp_predict,
}
PIPELINE = ("decompose", "coords", "dist", "cluster", "gp-fit", "gp-predict")


def _read_report(out: Path) -> dict:
    try:
        rep = art.read_json(out / REPORT)
    except TopomixError:
        rep = {}
    rep.pop("schema_version", None)
    return rep


def run_stage(name: str, cfg: PipelineConfig) -> dict:
    """Run one stage, merging its summary into the report. On failure a
    ``<stage>.failed`` marker is written, the report names the stage, and the
    exception propagates."""
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    marker = out / f"{name}.failed"
    t0 = time.perf_counter()
    try:
        summary = STAGES[name](cfg, out)
    except Exception as exc:
        art.atomic_write(marker, f"{type(exc).__name__}: {exc}\n")
        rep = _read_report(out)
        rep.update(status="failed", failed_stage=name, error=f"{type(exc).__name__}: {exc}")
        art.write_json(out / REPORT, rep)
        raise
    if marker.exists():
        marker.unlink()
    rep = _read_report(out)
    rep.update(summary)
    rep.setdefault("timings", {})[name] = time.perf_counter() - t0
    done = [s for s in rep.get("stages_completed", []) if s != name]
    rep.update(status="ok", failed_stage=None, error=None, stages_completed=done + [name])
    art.write_json(out / REPORT, rep)
    return rep


@dataclass
class RunReport:
    data: dict = field(default_factory=dict)
    exit_code: int = 0
    error: BaseException | None = None

    @property
    def counts(self) -> dict:
        return self.data.get("counts", {})

    @property
    def failed_stage(self):
        return self.data.get("failed_stage")


def exit_code_for(exc: BaseException) -> int:
    return 2 if isinstance(exc, VALIDATION_ERRORS) else 1


def run_pipeline(cfg: PipelineConfig, stages=None) -> RunReport:
    """All stages in order (``synth`` first when configured). Errors are
    captured into the returned report rather than raised."""
    if stages is None:
        stages = (("synth",) if cfg.synth is not None else ()) + PIPELINE
    out = cfg.out_dir
    stale = out / REPORT
    if stale.exists():
        stale.unlink()
    rep = {}
    for name in stages:
        try:
            rep = run_stage(name, cfg)
        except Exception as exc:  # noqa: BLE001 - reported, not swallowed
            return RunReport(_read_report(out), exit_code_for(exc), exc)
    return RunReport(rep, 0)
