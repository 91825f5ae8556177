"""
Run orchestration: initial data, the stepping loop, diagnostics rows,
checkpoints and the manifest.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field, replace
from decimal import Decimal

import numpy as np

from . import __version__
from .config import RunConfig
from .diagnostics import (
    NormSeries,
    default_a,
    energy_identity_residuals,
    state_row,
)
from .diophantine import BackgroundField, certify, resolve_bfield
from .io import (
    platform_fingerprint,
    read_checkpoint,
    read_series_csv,
    write_checkpoint,
    write_manifest,
    write_series_csv,
)
from .solver import Drift, InstabilityError, State, StepControl, advance
from .spectral import divergence_residual, make_lattice, random_field

__all__ = ["RunResult", "run", "resume", "initial_state", "diagnostic_times", "run_checks"]


@dataclass
class RunResult:
    status: str
    series: NormSeries
    state: State
    config: RunConfig
    manifest: dict = field(default_factory=dict)


def diagnostic_times(t_final: float, t_first: float = 0.01, per_decade: int = 25,
                     stride: float | None = None) -> np.ndarray:
    """Sample times: 0, a geometric ladder from ``t_first``, a uniform stride and ``t_final``."""
    ts = [0.0, float(t_final)]
    if t_final > 0 and per_decade > 0 and t_first < t_final:
        count = int(math.floor(per_decade * math.log10(t_final / t_first))) + 1
        ts += list(t_first * 10.0 ** (np.arange(count) / per_decade))
    if t_final > 0 and stride is not None and stride < t_final:
        # nearest doubles to the decimal multiples, so 3 x 0.1 lands on 0.3
        step = Decimal(repr(float(stride)))
        ts += [float(step * j) for j in range(1, int(math.floor(t_final / stride)) + 1)]
    ts = np.unique(np.clip(np.asarray(ts, float), 0.0, t_final))
    tol = 1e-9 * max(1.0, t_final)
    keep = [0.0]
    for t in ts[1:]:
        if t - keep[-1] > 1e-9 * max(1.0, t) and t_final - t > tol:
            keep.append(t)
    if t_final > 0:
        keep.append(float(t_final))
    return np.asarray(keep)


def _paths(cfg: RunConfig) -> dict:
    return {k: os.path.join(cfg.directory, getattr(cfg, k)) for k in ("series", "checkpoint", "manifest")}


def background(cfg: RunConfig) -> BackgroundField:
    return certify(resolve_bfield(cfg.bfield, cfg.n, cfg.r), cfg.K_cert)


def initial_state(cfg: RunConfig, bf: BackgroundField | None = None) -> State:
    """Seeded random data with ``||(u0, b0)||_{H^m} = eps``, split evenly between u and b."""
    cfg = cfg.filled()
    bf = bf or background(cfg)
    lat = make_lattice(cfg.n, cfg.N)
    su, sb = (int(x) for x in np.random.SeedSequence(cfg.seed).generate_state(2))
    amp = cfg.eps / math.sqrt(2.0)
    u0 = random_field(lat, su, cfg.sigma, amp, cfg.m)
    b0 = random_field(lat, sb, cfg.sigma, amp, cfg.m)
    return State(u=u0, b=b0, t=0.0, regime=cfg.regime, bf=bf)


def _row(state: State, cfg: RunConfig, dt: float, drift: Drift) -> dict:
    row = state_row(state, cfg.s_list, cfg.m)
    row["dt"] = dt
    row["mean_abs"] = float(max(np.max(np.abs(state.u.mean())), np.max(np.abs(state.b.mean()))))
    row["div_rel"] = max(divergence_residual(state.u), divergence_residual(state.b))
    row["drift_mean"] = drift.mean
    row["drift_div"] = drift.divergence
    row["drift_herm"] = drift.hermitian
    return row


def run_checks(series: NormSeries, cfg: RunConfig, bnorm: float) -> dict:
    """Run-level summary of the invariant and functional checks."""
    cfg = cfg.filled()
    out = {"samples": len(series)}
    if not len(series):
        return out
    hm = np.sqrt(series.column("hm_sq")) if "hm_sq" in series.labels() else None
    if hm is not None:
        out["hm_sup"] = float(np.nanmax(hm))
        out["hm_initial"] = float(hm[0])
        a = default_a(bnorm)
        lower = (a - 0.5 * bnorm) * hm**2
        out["q_violations"] = int(np.sum(series.column("q_m") < lower))
        out["max_mean_abs"] = float(np.nanmax(series.column("mean_abs")))
        out["max_div_rel"] = float(np.nanmax(series.column("div_rel")))
        out["max_drift_mean"] = float(np.nanmax(series.column("drift_mean")))
        out["max_drift_div"] = float(np.nanmax(series.column("drift_div")))
    e = series.column("energy_l2")
    out["l2_ratio_final"] = float(math.sqrt(e[-1] / e[0])) if e[0] > 0 else None
    if cfg.regime.value == "resistive":
        f = series.column("f_func")
        out["f_violations"] = int(np.sum(f < 0.5 * e))
    if len(series) >= 5 and not cfg.linear_only:
        res = energy_identity_residuals(series, cfg.regime)
        out["energy_identity_pass_fraction"] = float(np.mean([r["ok"] for r in res]))
    return out


def _manifest(cfg: RunConfig, bf: BackgroundField, status: str, wall: float,
              series: NormSeries, extra: dict | None = None) -> dict:
    m = {
        "config": cfg.to_dict(),
        "config_text": cfg.to_text(),
        "version": __version__,
        "platform": platform_fingerprint(),
        "certification": {"c_est": bf.c_est, "argmin_k": bf.argmin_k, "K_cert": bf.K_cert,
                          "vector": list(bf.vector), "r": bf.r},
        "status": status,
        "wall_clock_s": wall,
        "cadence": {"t_first": cfg.t_first, "per_decade": cfg.per_decade,
                    "stride": cfg.stride, "samples": len(series)},
        "acceptance": run_checks(series, cfg, bf.norm) if status != "invalid" else {},
    }
    m.update(extra or {})
    return m


def _loop(cfg: RunConfig, state: State, series: NormSeries, times, write: bool,
          bf: BackgroundField, t_start: float) -> RunResult:
    paths = _paths(cfg)
    control = StepControl(cfg.cfl_number, cfg.max_dt, cfg.dt)
    status = "completed"
    since_ckpt = 0
    wall0 = time.perf_counter()
    try:
        for target in times:
            if target <= state.t:
                continue
            try:
                if cfg.linear_only:
                    state, drift, dt = advance(state, target, StepControl(dt=target - state.t),
                                               nonlinear=False)
                else:
                    state, drift, dt = advance(state, target, control)
            except InstabilityError as exc:
                status = "unstable"
                state = exc.state if exc.state is not None else state
                break
            series.append(state.t, _row(state, cfg, dt, drift))
            since_ckpt += 1
            if write and since_ckpt >= cfg.checkpoint_every:
                write_checkpoint(paths["checkpoint"], state.u, state.b, state.t, state.regime,
                                 bf.vector)
                write_series_csv(paths["series"], series, cfg.s_list)
                since_ckpt = 0
    finally:
        if write:
            write_series_csv(paths["series"], series, cfg.s_list)
            write_checkpoint(paths["checkpoint"], state.u, state.b, state.t, state.regime, bf.vector)
    wall = time.perf_counter() - wall0
    manifest = _manifest(cfg, bf, status, wall, series, {"resumed_from": t_start or None})
    if write:
        write_manifest(paths["manifest"], manifest)
    return RunResult(status=status, series=series, state=state, config=cfg, manifest=manifest)


def _times(cfg: RunConfig):
    return diagnostic_times(cfg.t_final, cfg.t_first, cfg.per_decade, cfg.stride)


def run(cfg: RunConfig, write: bool = True) -> RunResult:
    """Integrate from seeded initial data to ``t_final``.

    Diagnostics rows are emitted at :func:`diagnostic_times`; with ``write``
    the series CSV, the last checkpoint and the manifest land in
    ``cfg.directory``.  An instability ends the run with status
    ``"unstable"`` and checkpoints the last valid state.
    """
    cfg = cfg.filled()
    bf = background(cfg)
    state = initial_state(cfg, bf)
    series = NormSeries()
    series.append(0.0, _row(state, cfg, 0.0, Drift()))
    return _loop(cfg, state, series, _times(cfg)[1:], write, bf, 0.0)


def resume(cfg: RunConfig, checkpoint_path, write: bool = True) -> RunResult:
    """Continue a run from a checkpoint; earlier CSV rows are kept verbatim."""
    cfg = cfg.filled()
    ck = read_checkpoint(checkpoint_path)
    bf = background(cfg)
    if (ck.lattice.n, ck.lattice.N) != (cfg.n, cfg.N) or ck.regime is not cfg.regime:
        raise ValueError("checkpoint does not match the configuration")
    if tuple(ck.bvec) != tuple(bf.vector):
        raise ValueError("checkpoint background field differs from the configuration")
    state = State(u=ck.u, b=ck.b, t=ck.t, regime=ck.regime, bf=bf)
    prior = NormSeries()
    series_path = _paths(cfg)["series"]
    if os.path.exists(series_path):
        prior = read_series_csv(series_path).truncate(ck.t)
    if len(prior) and prior.times[-1] != ck.t:
        raise ValueError("series CSV has no row at the checkpoint time")
    return _loop(cfg, state, prior, _times(cfg), write, bf, ck.t)


def invalid_manifest(cfg: RunConfig | None, errors, path) -> None:
    """Manifest for a run that never started (configuration rejected)."""
    doc = {
        "config": cfg.to_dict() if cfg else None,
        "version": __version__,
        "platform": platform_fingerprint(),
        "status": "invalid",
        "errors": list(errors),
        "wall_clock_s": 0.0,
        "acceptance": {},
    }
    write_manifest(path, doc)


def linear_decay_config(cfg: RunConfig) -> RunConfig:
    """Exact linear sampling on the geometric ladder only."""
    return replace(cfg.filled(), linear_only=True, stride=max(cfg.t_final, cfg.t_first))
