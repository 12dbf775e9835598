"""Experiment harness: run a curriculum, collect records, sweep, export.

The forgetting matrix is built incrementally: after each day's update,
every stored day is replayed against the live grid. Exports are plain CSV
and JSON with full double precision, so repeated runs of the same config
are byte-identical.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericalError
from .gm import GaussianMixture, validate
from .metrics import (
    AgeCurve,
    ForgettingRecord,
    age_curve,
    age_curve_csv_lines,
    channel_shares,
    day_records,
    half_life,
    moment_gap,
    records_csv_lines,
)
from .protocol import (
    MemoryState,
    incorporate,
    new_memory,
    snapshot_dict,
    state_from_snapshot,
)
from .streams import StreamConfig, default_prior, generate, make_config

SUMMARY_KEYS = ("half_life", "theta", "max_Fbar", "mean_share", "cov_share", "weight_share")


@dataclass(frozen=True)
class RunConfig:
    stream: StreamConfig
    L: int = 10
    theta: float = 0.5
    prior: object = "standard"  # "standard" | {"kind": "point", ...} | mixture dict
    outputs: str | None = None
    snapshot_every: int | None = None


@dataclass
class RunResult:
    config: RunConfig
    records: list[ForgettingRecord]
    curve: AgeCurve
    half_life: int | None
    summary: dict
    final_state: MemoryState


def resolve_prior(cfg: RunConfig, first_target: GaussianMixture) -> GaussianMixture:
    spec = cfg.prior
    k, d = first_target.k, first_target.d
    if spec == "standard" or spec is None:
        return default_prior(k, d)
    if isinstance(spec, GaussianMixture):
        prior = spec
    elif isinstance(spec, dict) and spec.get("kind") == "point":
        x0 = np.asarray(spec.get("x0", np.zeros(d)), dtype=float)
        var = float(spec.get("var", 1e-12))
        if x0.shape != (d,):
            raise ConfigError(f"point prior x0 has shape {x0.shape}, stream needs ({d},)")
        prior = GaussianMixture(
            np.full(k, 1.0 / k),
            np.tile(x0, (k, 1)),
            np.repeat(var * np.eye(d)[None, :, :], k, axis=0),
        )
    elif isinstance(spec, dict):
        prior = GaussianMixture.from_dict(spec)
    else:
        raise ConfigError(f"unrecognized prior spec {spec!r}")
    report = validate(prior)
    if report is not None:
        raise ConfigError(f"prior is not a valid mixture: {report}")
    if prior.k != k or prior.d != d:
        raise ConfigError(
            f"prior shape ({prior.k}, {prior.d}) does not match stream ({k}, {d})"
        )
    return prior


def _summarize(cfg: RunConfig, records, curve: AgeCurve, hl: int | None) -> dict:
    shares = channel_shares(records)
    summary = {
        "half_life": hl,
        "theta": cfg.theta,
        "max_Fbar": float(curve.values.max()) if curve.values.size else None,
        "mean_share": shares[0] if shares else None,
        "cov_share": shares[1] if shares else None,
        "weight_share": shares[2] if shares else None,
    }
    # Per-run capacity diagnostic; lives beside (not inside) the exported summary.
    summary["t_star"] = math.exp(-hl / cfg.L) if hl is not None else None
    return summary


def run_experiment(cfg: RunConfig) -> RunResult:
    """Run the daily recursion over the configured stream and score recall."""
    targets = generate(cfg.stream)
    if not targets:
        raise ConfigError("stream is empty")
    prior = resolve_prior(cfg, targets[0])
    prior_moments = prior.overall_moments()
    state = new_memory(prior, targets[0], cfg.L)
    records: list[ForgettingRecord] = []
    try:
        records.extend(day_records(state, prior_moments=prior_moments))
        _maybe_snapshot(cfg, state)
        for target in targets[1:]:
            state = incorporate(state, target)
            records.extend(day_records(state, prior_moments=prior_moments))
            _maybe_snapshot(cfg, state)
    except Exception:
        if cfg.outputs:
            _flush_partial(cfg, records)
        raise
    curve = age_curve(records)
    hl = half_life(curve, cfg.theta)
    return RunResult(cfg, records, curve, hl, _summarize(cfg, records, curve, hl), state)


def _maybe_snapshot(cfg: RunConfig, state: MemoryState) -> None:
    if cfg.outputs and cfg.snapshot_every and state.day % cfg.snapshot_every == 0:
        os.makedirs(cfg.outputs, exist_ok=True)
        snapshot_state(state, os.path.join(cfg.outputs, f"snapshot_day{state.day:04d}.json"))


def _flush_partial(cfg: RunConfig, records) -> None:
    os.makedirs(cfg.outputs, exist_ok=True)
    path = os.path.join(cfg.outputs, "records.partial.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(records_csv_lines(records)) + "\n")


def build_final_state(cfg: RunConfig) -> MemoryState:
    """Run the recursion only (no metrics); used by movie and drift checks."""
    targets = generate(cfg.stream)
    if not targets:
        raise ConfigError("stream is empty")
    state = new_memory(resolve_prior(cfg, targets[0]), targets[0], cfg.L)
    for target in targets[1:]:
        state = incorporate(state, target)
    return state


def _apply_axis(cfg: RunConfig, axis: str, value) -> RunConfig:
    if axis == "L":
        return replace(cfg, L=int(value))
    if axis == "theta":
        return replace(cfg, theta=float(value))
    if axis == "K":
        # The K families differ: K = 1 is the plain circular drift, K >= 2
        # the ring mixture at the same centre track.
        k = int(value)
        base = cfg.stream
        if k == 1:
            stream = make_config(
                "circular", n_days=base.n_days, R=base.R, P=base.P, seed=base.seed
            )
        else:
            r = base.r if base.kind in ("triangle", "crowding", "split_merge") else 0.8
            stream = make_config(
                "crowding", K=k, n_days=base.n_days, R=base.R, P=base.P, r=r, seed=base.seed
            )
        return replace(cfg, stream=stream)
    stream_fields = {f for f in StreamConfig.__dataclass_fields__ if f != "kind"}
    if axis in stream_fields:
        value = type(getattr(cfg.stream, axis))(value)
        return replace(cfg, stream=replace(cfg.stream, **{axis: value}))
    raise ConfigError(f"unknown sweep axis {axis!r}")


@dataclass
class SweepResult:
    axis: str
    rows: list[dict]
    fit: dict | None = None


def sweep(cfg: RunConfig, axis: str, values) -> SweepResult:
    """Independent runs along one config axis; fits capacity when axis is L."""
    rows = []
    for value in values:
        result = run_experiment(_apply_axis(cfg, axis, value))
        rows.append(
            {
                "axis": axis,
                "value": value,
                "half_life": result.half_life,
                "max_Fbar": result.summary["max_Fbar"],
                "mean_share": result.summary["mean_share"],
                "cov_share": result.summary["cov_share"],
                "weight_share": result.summary["weight_share"],
                "t_star": result.summary["t_star"],
            }
        )
    fit = None
    if axis == "L":
        usable = [(r["value"], r["half_life"]) for r in rows if r["half_life"] is not None]
        if len(usable) >= 3:
            fit = capacity_diagnostics([v for v, _ in usable], [h for _, h in usable])
    return SweepResult(axis, rows, fit)


def capacity_diagnostics(lengths, half_lives) -> dict:
    """Slope c of half-life against L (plain least squares) and t* = exp(-c)."""
    ls = np.asarray(lengths, dtype=float)
    hs = np.asarray(half_lives, dtype=float)
    if ls.size < 3:
        raise NumericalError(f"capacity fit needs at least 3 points, got {ls.size}")
    if np.any(~np.isfinite(hs)):
        raise NumericalError("capacity fit got a run without a half-life")
    var = np.var(ls)
    if var == 0.0:
        raise NumericalError("capacity fit is degenerate: all L values identical")
    c = float(np.cov(ls, hs, bias=True)[0, 1] / var)
    return {"c": c, "t_star": math.exp(-c)}


def fifo_baseline(cfg: RunConfig) -> RunResult:
    """Sliding-window reference: perfect recall for L days, then the prior."""
    targets = generate(cfg.stream)
    if not targets:
        raise ConfigError("stream is empty")
    prior = resolve_prior(cfg, targets[0])
    prior_moments = prior.overall_moments()
    decompose = targets[0].k > 1
    records = []
    n_days = len(targets)
    orig_moments = [g.overall_moments() for g in targets]
    for n in range(1, n_days + 1):
        for m in range(1, n + 1):
            recalled = targets[m - 1] if n - m < cfg.L else prior
            f_raw = moment_gap(recalled.overall_moments(), orig_moments[m - 1])
            baseline = moment_gap(prior_moments, orig_moments[m - 1])
            f_norm = f_raw / baseline if baseline > 0.0 else None
            if decompose:
                from .metrics import decomposed_forgetting

                f_mean, f_cov, f_weight = decomposed_forgetting(recalled, targets[m - 1])
            else:
                f_mean = f_cov = f_weight = None
            records.append(ForgettingRecord(m, n, f_raw, f_norm, f_mean, f_cov, f_weight))
    curve = age_curve(records)
    hl = half_life(curve, cfg.theta)
    state = new_memory(prior, targets[0], cfg.L)
    return RunResult(cfg, records, curve, hl, _summarize(cfg, records, curve, hl), state)


def export(result: RunResult, fmt: str, path: str) -> list[str]:
    """Write records/age-curve CSVs or the summary JSON under path.

    Returns the files written. Floats go through repr, which round-trips
    exactly at double precision.
    """
    os.makedirs(path, exist_ok=True)
    written = []
    if fmt == "csv":
        rec_path = os.path.join(path, "records.csv")
        with open(rec_path, "w") as fh:
            fh.write("\n".join(records_csv_lines(result.records)) + "\n")
        written.append(rec_path)
        curve_path = os.path.join(path, "age_curve.csv")
        with open(curve_path, "w") as fh:
            fh.write("\n".join(age_curve_csv_lines(result.curve)) + "\n")
        written.append(curve_path)
    elif fmt == "json":
        summary_path = os.path.join(path, "summary.json")
        summary = {key: result.summary[key] for key in SUMMARY_KEYS}
        with open(summary_path, "w") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
        written.append(summary_path)
    else:
        raise ConfigError(f"unknown export format {fmt!r} (csv or json)")
    return written


def snapshot_state(state: MemoryState, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(snapshot_dict(state), fh)
        fh.write("\n")


def restore_state(path: str, originals=()) -> MemoryState:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    return state_from_snapshot(data, tuple(originals))


def resume_run(cfg: RunConfig, state: MemoryState) -> RunResult:
    """Continue a restored state to the end of the configured stream.

    The target history is regenerated from the config (streams are pure
    functions of it), so earlier days can be scored even though snapshots
    do not carry them. Records cover days after the snapshot.
    """
    targets = generate(cfg.stream)
    if state.day > len(targets):
        raise ConfigError(
            f"snapshot is at day {state.day} but the stream has {len(targets)} days"
        )
    state = replace(state, originals=tuple(targets[: state.day]))
    prior_moments = state.prior.overall_moments()
    records: list[ForgettingRecord] = []
    for target in targets[state.day:]:
        state = incorporate(state, target)
        records.extend(day_records(state, prior_moments=prior_moments))
    curve = age_curve(records)
    hl = half_life(curve, cfg.theta)
    return RunResult(cfg, records, curve, hl, _summarize(cfg, records, curve, hl), state)
