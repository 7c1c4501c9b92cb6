"""Command-line driver: verify | fig2 | compare | bench | sim.

Options come from three layers with increasing precedence: per-command
defaults, a flat key=value config file (``--config``), and explicit flags.
The effective configuration is echoed into the output directory.

Exit codes: 0 success, 1 property/acceptance failure, 2 configuration error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import verify as verify_mod
from .sim import (Scenario, complexity_fit, comparison_scenario,
                  convergence_scenario, run_sweep, run_trial)
from .system import SystemParams
from . import charts


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_counts(text: str) -> list[int]:
    try:
        return [int(part) for part in str(text).split(",") if part != ""]
    except ValueError as exc:
        raise ConfigError(f"bad landmark list {text!r}") from exc


_CHOICES = {
    "estimator": ("observer", "ekf", "both"),
    "integrator": ("geometric", "additive"),
    "flow": ("analytic", "finite-difference"),
    "world": ("exact", "group"),
}

# every key a config file may set, with its parser
_KEY_PARSERS = {
    "seed": int, "trials": int, "landmarks": _parse_counts,
    "duration": float, "dt": float, "estimator": str, "integrator": str,
    "flow": str, "world": str, "out": str, "jobs": int,
    "sequential": _parse_bool, "samples": int,
    "sensor_range": float, "var_linear_vel": float, "var_angular_vel": float,
    "var_flow": float, "var_bearing": float, "var_inverse_depth": float,
    "k_bearing": float, "k_depth": float, "k_pose": float,
    "lifecycle": _parse_bool, "band_inner": float, "band_outer": float,
}

_CONVERGENCE_BASE = {
    "landmarks": [10], "duration": 100.0, "dt": 0.5, "seed": 0,
    "integrator": "geometric", "flow": "analytic", "world": "group",
    "sensor_range": math.inf, "var_linear_vel": 0.0, "var_angular_vel": 0.0,
    "var_flow": 0.0, "var_bearing": 0.0, "var_inverse_depth": 0.0,
    "k_bearing": 0.05, "k_depth": 0.02, "k_pose": 0.03,
    "lifecycle": False, "band_inner": 0.5, "band_outer": 1.0,
    "estimator": "observer", "jobs": 1, "sequential": False,
}

_COMPARISON_BASE = {
    "landmarks": [50], "duration": 100.0, "dt": 0.5, "seed": 0,
    "integrator": "geometric", "flow": "analytic", "world": "exact",
    "sensor_range": 1.0, "var_linear_vel": 0.2, "var_angular_vel": 0.1,
    "var_flow": 0.02, "var_bearing": 0.01, "var_inverse_depth": 0.4,
    "k_bearing": 0.25, "k_depth": 0.1, "k_pose": 0.1,
    "lifecycle": True, "band_inner": 0.5, "band_outer": 1.0,
    "estimator": "both", "jobs": 1, "sequential": False,
}

_DEFAULTS = {
    "verify": {"samples": 1000, "seed": verify_mod.DEFAULT_SEED, "out": None},
    "fig2": dict(_CONVERGENCE_BASE, out="fig2-out"),
    "compare": dict(_COMPARISON_BASE, out="compare-out", trials=20),
    "bench": dict(_COMPARISON_BASE, out="bench-out", trials=3, duration=12.0,
                  landmarks=[10, 25, 50, 100, 200, 400]),
    "sim": dict(_CONVERGENCE_BASE, out="sim-out"),
}


def load_config(path: str) -> dict:
    """Flat key=value file; '#' starts a comment; keys mirror the flags."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in _KEY_PARSERS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _KEY_PARSERS[key](val.strip())
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}") from exc
    return values


def _effective_settings(command: str, args: argparse.Namespace) -> dict:
    settings = dict(_DEFAULTS[command])
    if getattr(args, "config", None):
        config = load_config(args.config)
        unknown = set(config) - set(settings)
        if unknown:
            raise ConfigError(f"config keys not used by {command}: "
                              f"{', '.join(sorted(unknown))}")
        settings.update(config)
    for key in settings:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            settings[key] = flag_val
    if getattr(args, "sequential", None):
        settings["jobs"] = 1
    for key in ("estimator", "integrator", "flow", "world"):
        if key in settings and settings[key] not in _CHOICES[key]:
            raise ConfigError(f"bad {key}: {settings[key]!r}")
    return settings


def _echo_config(settings: dict, out_dir: str) -> None:
    lines = []
    for key in sorted(settings):
        val = settings[key]
        if isinstance(val, list):
            val = ",".join(str(v) for v in val)
        lines.append(f"{key}={val}")
    with open(os.path.join(out_dir, "config.txt"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _scenario_from(settings: dict, n: int, estimator: str) -> Scenario:
    params = SystemParams(
        n=n, sensor_range=settings["sensor_range"],
        var_linear_vel=settings["var_linear_vel"],
        var_angular_vel=settings["var_angular_vel"],
        var_flow=settings["var_flow"], var_bearing=settings["var_bearing"],
        var_inverse_depth=settings["var_inverse_depth"],
        rng_seed=settings["seed"])
    return Scenario(
        linear_velocity=(0.1, 0.0, 0.0),
        angular_velocity=(0.0, 0.0, 0.02 * math.pi),
        band_inner=settings["band_inner"], band_outer=settings["band_outer"],
        duration=settings["duration"], dt=settings["dt"], params=params,
        k_bearing=settings["k_bearing"], k_depth=settings["k_depth"],
        k_pose=settings["k_pose"], estimator=estimator,
        integrator=settings["integrator"], flow_mode=settings["flow"],
        world=settings["world"], lifecycle=settings["lifecycle"])


def _float_cell(x) -> str:
    return repr(float(x))


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_verify(settings: dict, mutate: str = "none") -> int:
    hook = verify_mod.corrupted_output_action if mutate == "flip-rho" else None
    results = verify_mod.run_checks(samples=settings["samples"],
                                    seed=settings["seed"],
                                    output_action_fn=hook)
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  max residual {r.residual:.3e}  "
              f"(tolerance {r.tolerance:.0e})  {status}")
        failed += not r.passed
    print(f"{len(results) - failed}/{len(results)} checks passed "
          f"(seed {settings['seed']}, samples {settings['samples']})")
    return 1 if failed else 0


def cmd_fig2(settings: dict) -> int:
    n = settings["landmarks"][0]
    scenario = _scenario_from(settings, n, "observer")
    record = run_trial(scenario)
    out_dir = settings["out"]
    os.makedirs(out_dir, exist_ok=True)
    _echo_config(settings, out_dir)

    header = (["t"] + [f"l_y_{i + 1}" for i in range(n)]
              + [f"l_z_{i + 1}" for i in range(n)])
    rows = []
    for k in range(record.times.size):
        rows.append([_float_cell(record.times[k])]
                    + [_float_cell(v) for v in record.bearing_storage[k]]
                    + [_float_cell(v) for v in record.depth_storage[k]])
    _write_csv(os.path.join(out_dir, "lyapunov.csv"), header, rows)

    curves = []
    for i in range(n):
        curves.append((record.times, record.bearing_storage[:, i],
                       "bearing storage" if i == 0 else None, 0))
    for i in range(n):
        curves.append((record.times, record.depth_storage[:, i],
                       "inverse-depth storage" if i == 0 else None, 1))
    charts.line_chart(os.path.join(out_dir, "lyapunov_linear.svg"), curves,
                      title="Per-landmark error storage", x_label="time [s]",
                      y_label="storage")
    charts.line_chart(os.path.join(out_dir, "lyapunov_log.svg"), curves,
                      title="Per-landmark error storage (log scale)",
                      x_label="time [s]", y_label="storage", log_y=True)

    total0 = np.nansum(record.bearing_storage[0]) + np.nansum(record.depth_storage[0])
    total1 = np.nansum(record.bearing_storage[-1]) + np.nansum(record.depth_storage[-1])
    print(f"seed {record.seed}: total storage {total0:.3e} -> {total1:.3e} "
          f"over {settings['duration']} s ({record.times.size} samples)")
    print(f"wrote {out_dir}/lyapunov.csv and two SVG charts")
    return 0


def cmd_compare(settings: dict) -> int:
    if settings["trials"] < 2:
        raise ConfigError("compare needs at least 2 trials")
    n = settings["landmarks"][0]
    base = _scenario_from(settings, n, "both")
    sweep = run_sweep(base, [n], settings["trials"],
                      estimators=("observer", "ekf"), jobs=settings["jobs"])
    out_dir = settings["out"]
    os.makedirs(out_dir, exist_ok=True)
    _echo_config(settings, out_dir)

    rows = []
    groups = []
    for est in ("observer", "ekf"):
        entry = sweep.entry(est, n)
        for i, seed in enumerate(entry.seeds):
            rows.append([seed, est, _float_cell(entry.final_rmse[i]),
                         _float_cell(entry.mean_rmse[i]),
                         int(entry.degeneracy_counts[i])])
        groups.append((est, entry.final_rmse))
        med = float(np.median(entry.final_rmse))
        print(f"{est}: median final rmse {med:.4f} m over "
              f"{settings['trials']} trials")
    _write_csv(os.path.join(out_dir, "rmse.csv"),
               ["seed", "estimator", "rmse_final", "rmse_mean",
                "degeneracy_count"], rows)
    charts.box_chart(os.path.join(out_dir, "rmse_boxplot.svg"), groups,
                     title=f"Final landmark RMSE, {n} landmarks, "
                           f"{settings['trials']} shared-stream trials",
                     y_label="rmse [m]")
    print(f"wrote {out_dir}/rmse.csv and rmse_boxplot.svg")
    return 0


def cmd_bench(settings: dict) -> int:
    counts = settings["landmarks"]
    if len(counts) < 2:
        raise ConfigError("bench needs at least 2 landmark counts")
    base = _scenario_from(settings, counts[0], "both")
    sweep = run_sweep(base, counts, settings["trials"],
                      estimators=("observer", "ekf"), jobs=settings["jobs"])
    out_dir = settings["out"]
    os.makedirs(out_dir, exist_ok=True)
    _echo_config(settings, out_dir)

    rows = []
    fit_rows = []
    annotations = []
    curves = []
    for color, est in enumerate(("observer", "ekf")):
        ns, med = sweep.timing_curve(est)
        for n_val, t_val in zip(ns, med):
            rows.append([int(n_val), est, _float_cell(t_val)])
        curves.append((ns, med, est, color))
        if len(counts) >= 4:
            fit = complexity_fit(ns, med)
            for model, r2, aic, coef in (
                    ("linear", fit.linear_r2, fit.linear_aic,
                     fit.linear_coefficients),
                    ("quadratic", fit.quadratic_r2, fit.quadratic_aic,
                     fit.quadratic_coefficients)):
                coefs = list(coef) + [0.0] * (3 - len(coef))
                fit_rows.append([est, model, _float_cell(r2), _float_cell(aic),
                                 _float_cell(coefs[0]), _float_cell(coefs[1]),
                                 _float_cell(coefs[2]),
                                 "yes" if fit.preferred == model else "no"])
            note = (f"{est}: prefers {fit.preferred} "
                    f"(linear R2 {fit.linear_r2:.3f})")
            annotations.append(note)
            print(note)
    _write_csv(os.path.join(out_dir, "timings.csv"),
               ["n", "estimator", "median_step_time"], rows)
    if fit_rows:
        _write_csv(os.path.join(out_dir, "fits.csv"),
                   ["estimator", "model", "r2", "aic", "c0", "c1", "c2",
                    "preferred"], fit_rows)
    charts.line_chart(os.path.join(out_dir, "timing.svg"), curves,
                      title="Median step time vs landmark count",
                      x_label="landmarks", y_label="seconds",
                      annotations=annotations)
    print(f"wrote {out_dir}/timings.csv, fits.csv and timing.svg")
    return 0


def cmd_sim(settings: dict) -> int:
    n = settings["landmarks"][0]
    scenario = _scenario_from(settings, n, settings["estimator"])
    if settings["estimator"] == "both":
        raise ConfigError("sim runs a single estimator; use compare for both")
    record = run_trial(scenario, record_details=True)
    out_dir = settings["out"]
    os.makedirs(out_dir, exist_ok=True)
    _echo_config(settings, out_dir)

    det = record.details
    header = (["t", "est_x", "est_y", "est_z", "est_rot_x", "est_rot_y",
               "est_rot_z", "rmse", "innovation_pose", "innovation_bearing",
               "innovation_depth"]
              + [f"l_y_{i + 1}" for i in range(n)]
              + [f"l_z_{i + 1}" for i in range(n)])
    rows = []
    steps = record.times.size - 1
    for k in range(record.times.size):
        inn = [float("nan")] * 3 if k >= steps else [det.innovation_pose[k],
                                                     det.innovation_bearing[k],
                                                     det.innovation_depth[k]]
        rows.append([_float_cell(record.times[k])]
                    + [_float_cell(v) for v in det.est_translation[k]]
                    + [_float_cell(v) for v in det.est_rotation_vec[k]]
                    + [_float_cell(record.rmse[k])]
                    + [_float_cell(v) for v in inn]
                    + [_float_cell(v) for v in record.bearing_storage[k]]
                    + [_float_cell(v) for v in record.depth_storage[k]])
    _write_csv(os.path.join(out_dir, "trial.csv"), header, rows)
    print(f"seed {record.seed} ({settings['estimator']}): "
          f"final rmse {record.rmse_final:.6f} m, "
          f"degeneracy flags {record.degeneracy_count}, "
          f"clamped depths {record.clamp_count}")
    print(f"wrote {out_dir}/trial.csv")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eqslam",
        description="Equivariant SLAM observer experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, trials=False, bench=False, samples=False):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        if samples:
            p.add_argument("--samples", type=int)
            p.add_argument("--mutate", choices=("none", "flip-rho"),
                           default="none", help=argparse.SUPPRESS)
            return
        p.add_argument("--landmarks", type=_parse_counts,
                       help="landmark count, or comma list for bench")
        p.add_argument("--duration", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--estimator", choices=_CHOICES["estimator"])
        p.add_argument("--integrator", choices=_CHOICES["integrator"])
        p.add_argument("--flow", choices=_CHOICES["flow"])
        p.add_argument("--world", choices=_CHOICES["world"])
        if trials:
            p.add_argument("--trials", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--sequential", action="store_true", default=None,
                       help="disable trial parallelism for clean timing")

    add_common(sub.add_parser("verify", help="run the algebraic property checks"),
               samples=True)
    add_common(sub.add_parser("fig2", help="noise-free convergence experiment"))
    add_common(sub.add_parser("compare", help="estimator comparison boxplot"),
               trials=True)
    add_common(sub.add_parser("bench", help="step-time scaling benchmark"),
               trials=True, bench=True)
    add_common(sub.add_parser("sim", help="single-trial time-series dump"))
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        settings = _effective_settings(args.command, args)
        if args.command == "verify":
            return cmd_verify(settings, mutate=getattr(args, "mutate", "none"))
        if args.command == "fig2":
            return cmd_fig2(settings)
        if args.command == "compare":
            return cmd_compare(settings)
        if args.command == "bench":
            return cmd_bench(settings)
        return cmd_sim(settings)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
