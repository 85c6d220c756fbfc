"""Command-line runner.

    qbm kernels|fdr|evolve|ensemble [--config PATH] [--out DIR] [--seed N]
        [--format csv|binary] [--n-traj N] [--kernel-mode finite|late]
        [--preset NAME] [--set KEY=VALUE ...] [--plots]

Exit codes: 0 success, 1 usage or configuration error, 2 numerical guard,
3 identity check failed. ``QBM_THREADS`` caps BLAS/FFT worker threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod, io, pipeline, plotting
from .composite import lift_stationary
from .errors import ConfigError, NumericalGuard, QbmError

EXIT_OK, EXIT_USAGE, EXIT_GUARD, EXIT_IDENTITY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _override(text):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    out = parsed
    for part in reversed(key.split(".")):
        out = {part: out}
    return out


def build_parser():
    p = _Parser(prog="qbm", description="Composite-environment Brownian motion kernels and dynamics.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("kernels", "write first- and second-order kernels and spectra"),
                        ("fdr", "check the fluctuation-dissipation identities"),
                        ("evolve", "solve the force-averaged equation of motion"),
                        ("ensemble", "solve the stochastic equation for an ensemble")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", type=Path, help="JSON run configuration")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int, help="64-bit random seed")
        s.add_argument("--format", choices=("csv", "binary"), help="data file format")
        s.add_argument("--n-traj", type=int, dest="n_traj", help="number of trajectories")
        s.add_argument("--kernel-mode", choices=("finite", "late"), dest="kernel_mode")
        s.add_argument("--preset", help="named parameter preset")
        s.add_argument("--set", type=_override, action="append", default=[], dest="sets",
                       metavar="KEY=VALUE", help="override a config field, e.g. grid.n_steps=256")
        s.add_argument("--plots", action="store_true", default=None, help="render PNG figures")
    return p


def _merge_sets(sets):
    out = {}
    for s in sets:
        out = config_mod._merge(out, s)
    return out


def load_config(args):
    overrides = _merge_sets(args.sets)
    for key, attr in (("out_dir", "out"), ("seed", "seed"), ("format", "format"), ("n_traj", "n_traj"),
                      ("kernel_mode", "kernel_mode"), ("plots", "plots")):
        val = getattr(args, attr)
        if val is not None:
            overrides[key] = val
    return config_mod.load(args.config, overrides, args.preset)


def cmd_kernels(cfg, out, timer):
    tk = pipeline.time_kernels(cfg, timer=timer)
    spectra = pipeline.freq_kernels(cfg, timer)
    fmt = cfg.format
    files = []
    t = cfg.grid.t
    with timer("write"):
        for name, k in (("eta_minus", tk.eta_minus), ("eta_plus", tk.eta_plus),
                        ("nu_minus", tk.nu_minus), ("nu_plus", tk.nu_plus)):
            files += io.write_table(out / name, {"lag": t, name: k.values}, {name: "frequency^2"}, fmt)
        files += io.write_table(out / "green", {"t": t, "G": tk.propagator.G.values, "u": tk.propagator.u.values,
                                                "v": tk.propagator.v.values},
                                {"G": "time/mass", "u": "1", "v": "time"}, fmt)
        if tk.mode == "late":
            lifted = lift_stationary(tk.eta2, tk.nu2)
            mats = (("nu_gg", tk.nu_gg.lag_matrix()), ("eta2", lifted.eta2.values), ("nu2", lifted.nu2.values))
        else:
            mats = (("nu_gg", tk.nu_gg.values), ("eta2", tk.eta2.values), ("nu2", tk.nu2.values))
        for name, m in mats:
            files += io.write_matrix(out / name, t, t, m, "t1", "t2", name, "natural", fmt,
                                     {"kernel_mode": tk.mode})
        w = cfg.freq_grid.omega
        files += io.write_table(out / "bath_spectra", {
            "omega": w,
            "re_eta_minus": spectra.eta_minus.real, "im_eta_minus": spectra.eta_minus.imag,
            "nu_minus": spectra.nu_minus.real,
            "re_eta_plus": spectra.eta_plus.real, "im_eta_plus": spectra.eta_plus.imag,
            "nu_plus": spectra.nu_plus.real}, {"omega": "frequency"}, fmt)
        files += io.write_table(out / "composite_spectra", {
            "omega": w, "re_G": spectra.G.real, "im_G": spectra.G.imag, "nu_gg": spectra.nu_gg.real,
            "re_eta2": spectra.eta2.real, "im_eta2": spectra.eta2.imag, "nu2": spectra.nu2.real},
            {"omega": "frequency"}, fmt)
    figs = plotting.kernels(out, tk, spectra) if cfg.plots else []
    return files + figs, None, EXIT_OK, {"kernel_mode": tk.mode, **tk.meta}


def cmd_fdr(cfg, out, timer):
    reports = pipeline.fdr_reports(cfg, timer=timer)
    failed = []
    summary = []
    for key, rep in reports:
        thr = cfg.thresholds[key]
        ok = rep.passed(thr)
        summary.append(dict(rep.as_dict(), threshold=thr, passed=ok))
        print(f"{'PASS' if ok else 'FAIL'}  {rep.identity}: max residual {rep.max_residual:.3e} "
              f"(threshold {thr:g})")
        if not ok:
            failed.append(rep.identity)
    path = out / "fdr_report.json"
    io.dump_json(path, {"temperature": cfg.T_F, "identities": summary, "failed": failed})
    files = [path]
    if cfg.plots:
        files += plotting.fdr(out, reports)
    if failed:
        print("identity check failed: " + "; ".join(failed), file=sys.stderr)
    return files, summary, EXIT_IDENTITY if failed else EXIT_OK, {"failed": failed}


def _stability(cfg, timer):
    spectra = pipeline.freq_kernels(cfg, timer)
    return pipeline.mdf_stiffness(cfg, spectra)


def cmd_evolve(cfg, out, timer):
    stiff = _stability(cfg, timer)
    tk = pipeline.time_kernels(cfg, timer=timer)
    with timer("solve"):
        tr = pipeline.mean_path(cfg, tk)
    files = io.write_table(out / "mean_trajectory", {"t": cfg.grid.t, "X": tr.X, "V": tr.V,
                                                     "energy": tr.energy(cfg.mdf)},
                           {"t": "time", "X": "length", "V": "length/time", "energy": "energy"}, cfg.format)
    if cfg.plots:
        files += plotting.trajectory(out, tr, cfg.mdf)
    return files, None, EXIT_OK, {"kernel_mode": tk.mode, "mdf_static_stiffness": stiff}


def cmd_ensemble(cfg, out, timer):
    stiff = _stability(cfg, timer)
    tk = pipeline.time_kernels(cfg, timer=timer)
    with timer("solve"):
        mean = pipeline.mean_path(cfg, tk)
        got = pipeline.ensemble(cfg, tk, keep_paths=cfg.save_paths)
    res, paths = got if cfg.save_paths else (got, None)
    t = cfg.grid.t
    files = io.write_table(out / "ensemble_mean", {
        "t": t, "mean_X": res.mean_X, "se_mean_X": res.se_mean_X, "var_X": res.var_X,
        "mean_V": res.mean_V, "deterministic_X": mean.X},
        {"t": "time", "mean_X": "length", "se_mean_X": "length", "var_X": "length^2",
         "mean_V": "length/time", "deterministic_X": "length"}, cfg.format)
    if res.cov_XX is not None:
        files += io.write_matrix(out / "cov_XX", t, t, res.cov_XX.values, "t1", "t2", "cov_XX", "length^2",
                                 cfg.format)
        files += io.write_matrix(out / "se_cov_XX", t, t, res.se_cov_XX, "t1", "t2", "se_cov_XX", "length^2",
                                 cfg.format)
    if paths is not None:
        cols = {"t": t}
        cols.update({f"X_{k}": paths[k] for k in range(paths.shape[0])})
        files += io.write_table(out / "trajectories", cols, {"t": "time"}, cfg.format)
    if cfg.plots:
        files += plotting.ensemble(out, res, mean)
    rms = float(np.sqrt(np.mean((res.mean_X - mean.X) ** 2)))
    se = float(np.sqrt(np.mean(res.se_mean_X**2)))
    extra = {"kernel_mode": tk.mode, "mdf_static_stiffness": stiff, "n_traj": res.n_traj,
             "rms_mean_deviation": rms, "rms_standard_error": se, **res.meta}
    return files, None, EXIT_OK, extra


COMMANDS = {"kernels": cmd_kernels, "fdr": cmd_fdr, "evolve": cmd_evolve, "ensemble": cmd_ensemble}


def _limit_threads():
    n = os.environ.get("QBM_THREADS")
    if not n:
        return None
    try:
        n = int(n)
    except ValueError:
        return None
    if n < 1:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    limiter = _limit_threads()
    timer = pipeline.Timer()
    try:
        files, reports, code, extra = COMMANDS[args.command](cfg, out, timer)
    except NumericalGuard as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except QbmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    finally:
        if limiter is not None:
            limiter.restore_original_limits()
    manifest = io.write_manifest(out, args.command, cfg.echo(), files, timer.stages, reports, extra)
    for f in files:
        print(f"wrote {f}")
    print(f"wrote {manifest}")
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
