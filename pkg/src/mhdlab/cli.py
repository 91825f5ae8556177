"""
Command-line entry point.

Subcommands: ``diophantine``, ``kernel-check``, ``linear-decay``,
``nonlinear-run``, ``fit`` and ``resume``.  Exit status is 0 on success,
2 when a configuration or flag is invalid and 3 when a run goes unstable.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .diagnostics import fit_decay
from .diophantine import certification_table, resolve_bfield
from .io import atomic_write, read_series_csv
from .linear import Regime, kernel_bound_sweep, theoretical_rate
from .runner import invalid_manifest, linear_decay_config, resume, run

EXIT_OK, EXIT_INVALID, EXIT_UNSTABLE = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _csv_text(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        out = []
        for c in columns:
            v = row[c]
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(f"{v:.17g}")
            elif isinstance(v, tuple):
                out.append(" ".join(str(x) for x in v))
            else:
                out.append(str(v))
        w.writerow(out)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _load_config(path: str, seed: int | None = None) -> RunConfig:
    """Parse a config file; a relative output directory is taken from the file's location."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    cfg = parse_config(text, {"seed": seed} if seed is not None else None)
    if not os.path.isabs(cfg.directory):
        cfg = replace(cfg, directory=os.path.normpath(
            os.path.join(os.path.dirname(os.path.abspath(path)), cfg.directory)))
    return cfg


def _radii(K: int) -> list:
    radii = []
    R = 16
    while R < K:
        radii.append(R)
        R *= 2
    return radii + [K]


def cmd_diophantine(args) -> int:
    bf = resolve_bfield(args.bfield, args.n, args.r)
    radii = [int(x) for x in args.radii.split(",")] if args.radii else _radii(args.K)
    rows = certification_table(bf.vector, bf.r, radii)
    _emit(_csv_text(rows, ["K", "c_est", "argmin_k", "rel_drop"]), args.out)
    return EXIT_OK


def cmd_kernel_check(args) -> int:
    bf = resolve_bfield(args.bfield, args.n, args.r)
    t_grid = [2.0**j * 1e-2 for j in range(17)]
    rows = kernel_bound_sweep(bf.vector, args.K, t_grid)
    cols = ["inequality", "description", "C", "witness_k", "witness_t", "modes", "vacuous"]
    _emit(_csv_text(rows, cols), args.out)
    return EXIT_OK


def _run_outcome(result) -> int:
    print(f"status: {result.status}, samples: {len(result.series)}, t = {result.state.t:.6g}")
    return EXIT_UNSTABLE if result.status == "unstable" else EXIT_OK


def _fit_report(series, label: str, window, m, r, regime) -> dict:
    fit = fit_decay(series, label, window)
    theo = None
    if m is not None and r is not None and regime is not None and label[:3] in ("u_h", "b_h"):
        s = float(label[3:])
        comp = "velocity" if label.startswith("u") else "magnetic"
        theo = theoretical_rate(m, s, r, regime, comp)
    return {
        "quantity": label,
        "window": list(fit.window),
        "exponent": fit.exponent,
        "theoretical": theo,
        "ratio": fit.exponent / theo if theo else None,
        "residual": fit.rms_residual,
        "samples": fit.samples,
    }


def _default_window(t_final: float):
    return (t_final / 50.0, t_final / 2.0)


def cmd_linear_decay(args) -> int:
    cfg = linear_decay_config(_load_config(args.config, args.seed_override))
    result = run(cfg)
    window = _parse_window(args.window) if args.window else _default_window(cfg.t_final)
    reports = []
    for s in cfg.s_list:
        for comp in ("u", "b"):
            label = f"{comp}_h{s}"
            try:
                reports.append(_fit_report(result.series, label, window, cfg.m, cfg.r, cfg.regime))
            except ValueError as exc:
                reports.append({"quantity": label, "error": str(exc)})
    path = os.path.join(cfg.directory, "fits.json")
    atomic_write(path, json.dumps(reports, indent=2) + "\n")
    for rep in reports:
        if "error" in rep:
            print(f"{rep['quantity']}: {rep['error']}")
        else:
            print(f"{rep['quantity']}: exponent {rep['exponent']:.4f}, theoretical {rep['theoretical']:.4f}")
    return _run_outcome(result)


def cmd_nonlinear_run(args) -> int:
    cfg = _load_config(args.config, args.seed_override)
    return _run_outcome(run(cfg))


def cmd_resume(args) -> int:
    if args.config:
        cfg = _load_config(args.config, args.seed_override)
        ck = args.checkpoint
    else:
        ck = args.checkpoint
        directory = os.path.dirname(ck) if ck != "last" else "."
        with open(os.path.join(directory or ".", "manifest.json"), encoding="utf-8") as fh:
            cfg = parse_config(json.load(fh)["config_text"])
    if ck == "last":
        ck = os.path.join(cfg.directory, cfg.checkpoint)
    return _run_outcome(resume(cfg, ck))


def _parse_window(text: str):
    lo, sep, hi = text.partition(":")
    if not sep:
        raise ValueError(f"window must look like lo:hi, got {text!r}")
    return (float(lo), float(hi))


def cmd_fit(args) -> int:
    series = read_series_csv(args.series)
    m, r, regime = args.m, args.r, args.regime
    manifest = os.path.join(os.path.dirname(args.series) or ".", "manifest.json")
    if os.path.exists(manifest) and None in (m, r, regime):
        with open(manifest, encoding="utf-8") as fh:
            conf = json.load(fh).get("config") or {}
        m = conf.get("m") if m is None else m
        r = conf.get("r") if r is None else r
        regime = conf.get("regime") if regime is None else regime
    t = np.asarray(series.times)
    window = _parse_window(args.window) if args.window else _default_window(float(t[-1]))
    report = _fit_report(series, args.quantity, window, m, r, Regime.parse(regime) if regime else None)
    text = json.dumps(report, indent=2) + "\n"
    out = args.out or os.path.splitext(args.series)[0] + f".fit-{args.quantity}.json"
    atomic_write(out, text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mhdlab", description="Spectral MHD perturbation experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("diophantine", help="certification table for a background field")
    d.add_argument("--bfield", default="golden")
    d.add_argument("--n", type=int, default=2)
    d.add_argument("--r", type=float, default=None)
    d.add_argument("--K", type=int, default=256)
    d.add_argument("--radii", default=None, help="comma-separated radii (default: doubling to K)")
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_diophantine)

    k = sub.add_parser("kernel-check", help="empirical constants of the kernel bounds")
    k.add_argument("--bfield", default="golden")
    k.add_argument("--n", type=int, default=2)
    k.add_argument("--r", type=float, default=None)
    k.add_argument("--K", type=int, default=64)
    k.add_argument("--out", default=None)
    k.set_defaults(func=cmd_kernel_check)

    for name, func, help_ in (("linear-decay", cmd_linear_decay, "exact linear decay experiment"),
                              ("nonlinear-run", cmd_nonlinear_run, "nonlinear run from a config")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True)
        s.add_argument("--seed-override", type=int, default=None)
        if name == "linear-decay":
            s.add_argument("--window", default=None)
        s.set_defaults(func=func)

    f = sub.add_parser("fit", help="decay exponent of one series column")
    f.add_argument("--series", required=True)
    f.add_argument("--quantity", required=True)
    f.add_argument("--window", default=None)
    f.add_argument("--m", type=float, default=None)
    f.add_argument("--r", type=float, default=None)
    f.add_argument("--regime", default=None)
    f.add_argument("--out", default=None)
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("resume", help="continue a run from a checkpoint")
    r.add_argument("--checkpoint", required=True, help="checkpoint path or 'last'")
    r.add_argument("--config", default=None)
    r.add_argument("--seed-override", type=int, default=None)
    r.set_defaults(func=cmd_resume)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        if getattr(args, "config", None):
            try:
                invalid_manifest(None, exc.violations, os.path.join(
                    os.path.dirname(args.config) or ".", "manifest.json"))
            except OSError:
                pass
        return EXIT_INVALID
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
