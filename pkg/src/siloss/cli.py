"""Command-line front end: ``siloss <command> [options]``.

Exit codes: 0 success, 2 input/config error, 3 non-decaying trace, 4 budget
inconsistency, 5 model evaluation failure, 6 fit did not converge.
"""
import argparse
import math
from pathlib import Path
import sys
import warnings

import numpy as np

from . import fileio
from .budget import loss_from_q, oxide_equivalent_q, oxide_negligible
from .errors import (BudgetInconsistencyError, DomainError, InputFormatError,
                     NonDecayingTraceError, SilossError)
from .fitting import FitConfig, fit_vrh
from .ringdown import (extract_q_loaded, field_centered_window, parametric_loss_vs_field,
                       photons_from_field, window_centre_field)
from .synth import (SynthSpec, synth_loss_curve, synth_ringdown,
                    synth_ringdown_field_dependent)
from .vrh import Environment, conductivity_curve, loss_tangent_curve

EXIT_NOT_CONVERGED = 6


def parse_axis(text):
    """``0.05:1:200:log`` -> 200 log-spaced values; a single number -> one value."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) not in (3, 4):
            raise ValueError
        start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
        scale = parts[3] if len(parts) == 4 else "lin"
    except ValueError:
        raise InputFormatError(f"bad grid axis {text!r}; use start:stop:n[:log|lin]") from None
    if n < 1:
        raise InputFormatError(f"grid axis {text!r} needs at least one point")
    if scale == "log":
        if not (start > 0 and stop > 0):
            raise InputFormatError(f"log grid axis {text!r} needs positive bounds")
        return np.geomspace(start, stop, n)
    if scale == "lin":
        return np.linspace(start, stop, n)
    raise InputFormatError(f"unknown grid scale {scale!r}")


def parse_grid(text, required=("T", "E")):
    """``T=0.05:1:200:log,E=5`` -> {"T": array, "E": array}."""
    axes = {}
    for item in text.split(","):
        name, sep, spec = item.partition("=")
        name = name.strip()
        if not sep or name not in ("T", "E"):
            raise InputFormatError(f"bad grid item {item!r}; expected T=... or E=...")
        axes[name] = parse_axis(spec.strip())
    missing = [a for a in required if a not in axes]
    if missing:
        raise InputFormatError(f"grid is missing axis {', '.join(missing)}")
    return axes


def _config(args, **overrides):
    return fileio.load_config(args.config, overrides)


def cmd_extract_q(args):
    cfg = _config(args, window_width=args.window, target_field_v_per_m=args.target_field)
    trace = fileio.read_trace(args.trace, cfg.frequency)
    cal = cfg.calibration()
    if args.window is not None or args.target_field is not None:
        window = field_centered_window(trace, cal, cfg["target_field_v_per_m"],
                                       cfg["window_width"])
    else:
        window = (0, len(trace))
    est = extract_q_loaded(trace, window)
    e_centre = window_centre_field(trace, cal, window)
    part = cfg.participation()
    report = {
        "command": "extract-q",
        "trace": str(args.trace),
        "q_loaded": est.q_loaded,
        "sigma_q": est.sigma_q,
        "slope_db_per_s": est.slope,
        "sigma_slope_db_per_s": est.sigma_slope,
        "residual_rms_db": est.residual_rms,
        "window": list(est.window),
        "field_at_centre_v_per_m": e_centre,
        "photons_at_centre": photons_from_field(e_centre, cal, trace.omega),
        "oxide_equivalent_q": oxide_equivalent_q(part),
        "oxide_negligible": oxide_negligible(part, est.q_loaded, cfg["oxide_ratio"]),
    }
    fileio.write_text(args.out, fileio.report_text(report))
    print(f"Q_L = {est.q_loaded:.6g} +/- {est.sigma_q:.3g} over samples "
          f"[{est.window[0]}, {est.window[1]}), E = {e_centre:.4g} V/m", file=sys.stderr)
    return 0


def _trace_files(source):
    source = Path(source)
    if source.is_dir():
        files = sorted(source.glob("*.csv"))
        if not files:
            raise InputFormatError("no *.csv traces in directory", source)
        return files
    return [source]


def cmd_loss_curve(args):
    cfg = _config(args, window_width=args.window, target_field_v_per_m=args.target_field)
    cal, budget, part = cfg.calibration(), cfg.budget(), cfg.participation()
    points, status, sources, parametric = [], [], [], []
    codes = []
    for path in _trace_files(args.source):
        trace = fileio.read_trace(path, cfg.frequency)
        temperature = trace.meta.get("temperature_k")
        if not isinstance(temperature, float):
            raise InputFormatError("missing '# temperature_k = ...' header", path)
        window = field_centered_window(trace, cal, cfg["target_field_v_per_m"],
                                       cfg["window_width"])
        field = window_centre_field(trace, cal, window)
        try:
            est = extract_q_loaded(trace, window)
            point = loss_from_q(est.q_loaded, est.sigma_q, temperature, budget, part, field)
            points.append(point)
            status.append("ok")
        except (NonDecayingTraceError, BudgetInconsistencyError) as exc:
            codes.append(exc.exit_code)
            points.append(None)
            status.append("non_decaying" if isinstance(exc, NonDecayingTraceError)
                          else "budget_inconsistent")
            print(f"{path}: {exc}", file=sys.stderr)
        sources.append(path.name)
        if args.parametric:
            curve = parametric_loss_vs_field(trace, cal, budget, part, cfg["window_width"],
                                             cfg["window_stride"], temperature,
                                             cfg["floor_margin_db"])
            for row in zip(curve.field, curve.loss, curve.sigma, curve.q_loaded):
                parametric.append([path.name, temperature, *row])

    rows = []
    for p, s, src in zip(points, status, sources):
        if p is None:
            rows.append(["", "", "", "", s, src])
        else:
            rows.append([p.temperature, p.field, p.loss, p.sigma, s, src])
    text = fileio.table_text(list(fileio.POINT_COLUMNS) + ["status", "source"], rows)
    fileio.write_text(args.out, text)
    if args.parametric:
        fileio.write_text(args.parametric, fileio.table_text(
            ["source", "temperature_k", "field_v_per_m", "loss", "sigma", "q_loaded"],
            parametric))
    n_ok = status.count("ok")
    print(f"{n_ok}/{len(status)} traces converted", file=sys.stderr)
    if n_ok == 0:
        return max(codes)
    return 0


def cmd_vrh_eval(args):
    cfg = _config(args)
    params = cfg.vrh_params()
    axes = parse_grid(args.grid or "T=0.05:1:200:log,E=5")
    t, e = np.meshgrid(axes["T"], axes["E"], indexing="ij")
    t, e = t.ravel(), e.ravel()
    if np.any(t <= 0) or np.any(e < 0):
        raise DomainError("grid temperatures must be positive and fields non-negative")
    sigma_h = conductivity_curve(t, e, params, cfg["e_switch_v_per_m"], cfg["clamp"])
    loss = loss_tangent_curve(t, e, params, cfg.omega, cfg["eps_r"], cfg["e_switch_v_per_m"],
                              cfg["clamp"])
    text = fileio.table_text(["temperature_k", "field_v_per_m", "sigma_h_s_per_m", "loss"],
                             zip(t, e, sigma_h, loss))
    fileio.write_text(args.out, text)
    return 0


def cmd_vrh_fit(args):
    cfg = _config(args, e_fit_v_per_m=args.e_fit)
    points = fileio.read_points(args.points)
    if len(points) < 8:
        raise InputFormatError(
            f"{len(points)} usable points; at least 8 are needed to identify 4 parameters",
            args.points)
    fit_cfg = FitConfig(initial=cfg.vrh_params(), e_fit=cfg["e_fit_v_per_m"], omega=cfg.omega,
                        eps_r=cfg["eps_r"], max_iterations=cfg["fit_max_iterations"],
                        tolerance=cfg["fit_tolerance"], restarts=cfg["fit_restarts"],
                        seed=cfg["fit_seed"], weighted=cfg["fit_weighted"],
                        e_switch=cfg["e_switch_v_per_m"], clamp=cfg["clamp"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = fit_vrh(points, fit_cfg)
    temps = np.array([p.temperature for p in points])
    t_curve = np.geomspace(temps.min(), temps.max(), cfg["curve_points"])
    curve = loss_tangent_curve(t_curve, fit_cfg.e_fit, result.params, fit_cfg.omega,
                               fit_cfg.eps_r, fit_cfg.e_switch, fit_cfg.clamp)
    report = {
        "command": "vrh-fit",
        "points": str(args.points),
        "n_points": len(points),
        "e_fit_v_per_m": fit_cfg.e_fit,
        "params": result.params.reporting_units(),
        "log10_params": dict(zip(("alpha_per_m", "gamma_hz", "g_per_j_m3", "sigma0_s_per_m"),
                                 np.log10([result.params.alpha, result.params.gamma,
                                           result.params.g_f,
                                           max(result.params.sigma0, 1e-300)]))),
        "covariance_log10": result.covariance,
        "log10_errors": result.log10_errors,
        "chi2": result.chi2,
        "dof": result.dof,
        "reduced_chi2": result.reduced_chi2,
        "converged": result.converged,
        "objective_evaluations": result.objective_evaluations,
        "restart_chi2": result.restart_chi2,
        "warnings": list(result.warnings),
        "model_curve": {"columns": ["temperature_k", "loss"],
                        "rows": [[a, b] for a, b in zip(t_curve, curve)]},
    }
    fileio.write_text(args.out, fileio.report_text(report))
    units = result.params.reporting_units()
    print(f"alpha^-1 = {units['loc_length_um']:.4g} um, gamma = {units['gamma_thz']:.4g} THz, "
          f"g = {units['g_ev_cm3']:.4g} /eV/cm3, sigma0 = {units['sigma0_us_per_m']:.4g} uS/m; "
          f"chi2/dof = {result.reduced_chi2:.4g}, converged = {result.converged}",
          file=sys.stderr)
    return 0 if result.converged else EXIT_NOT_CONVERGED


def _seed(args, cfg):
    seed = args.seed if args.seed is not None else cfg["seed"]
    if seed is None:
        raise InputFormatError("synthesis needs a seed (--seed N or 'seed' in the config)")
    return int(seed)


def _synth_spec(cfg, seed):
    return SynthSpec(seed=seed, frequency=cfg.frequency, p0_dbm=cfg["synth_p0_dbm"],
                     duration=cfg["synth_duration_s"], sample_rate=cfg["synth_sample_rate_hz"],
                     noise_db=cfg["synth_noise_db"], gain_db=cfg["synth_gain_db"])


def _loss_law(cfg, spec):
    name = cfg["synth_law"]
    if name == "linear":
        a, b = cfg["synth_law_a"], cfg["synth_law_b_per_v_per_m"]
        if a < 0 or b < 0:
            raise DomainError("linear loss law coefficients must be non-negative")
        return lambda e: a + b * e
    if name == "vrh":
        temperature = cfg["synth_temperature_k"]
        if temperature is None:
            raise InputFormatError("synth_law = vrh needs synth_temperature_k")
        # tabulate once on a log field grid; the integrator calls the law ~1e5 times
        e0 = cfg["kappa_v_per_m_sqrtw"] * math.sqrt(
            1e-3 * 10.0 ** (spec.p0_dbm / 10.0) * cfg["q2"])
        grid = np.geomspace(e0 * 1e-4, e0 * 1.01, 400)
        values = loss_tangent_curve(temperature, grid, cfg.vrh_params(), cfg.omega,
                                    cfg["eps_r"], cfg["e_switch_v_per_m"], cfg["clamp"])
        log_grid, log_values = np.log(grid), np.log(values)
        return lambda e: math.exp(np.interp(math.log(max(e, grid[0])), log_grid, log_values))
    raise InputFormatError(f"unknown synth_law {name!r}; use linear or vrh")


def cmd_synth(args):
    cfg = _config(args)
    seed = _seed(args, cfg)
    if args.kind == "loss-curve":
        axes = parse_grid(args.grid or "T=0.07:1:30:log,E=5")
        if len(axes["E"]) != 1:
            raise InputFormatError("synth loss-curve takes a single field value")
        env = Environment(1.0, float(axes["E"][0]), cfg.omega, cfg["eps_r"])
        points = synth_loss_curve(cfg.vrh_params(), env, axes["T"], cfg["synth_noise_rel"],
                                  seed, cfg["synth_sigma_floor"], cfg["e_switch_v_per_m"])
        fileio.write_points(args.out, points)
        return 0
    spec = _synth_spec(cfg, seed)
    meta = {"temperature_k": cfg["synth_temperature_k"]}
    if args.kind == "ringdown":
        trace = synth_ringdown(cfg["synth_q_loaded"], spec, meta)
    else:
        trace = synth_ringdown_field_dependent(_loss_law(cfg, spec), cfg.budget(),
                                               cfg.participation(), cfg.calibration(), spec,
                                               cfg["synth_temperature_k"], meta)
    fileio.write_trace(args.out, trace)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="siloss", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-q", parents=[common], help="loaded Q from one ring-down trace")
    p.add_argument("trace", type=Path)
    p.add_argument("--window", type=int, help="window width in samples")
    p.add_argument("--target-field", type=float, help="centre the window at this field (V/m)")
    p.set_defaults(func=cmd_extract_q)

    p = sub.add_parser("loss-curve", parents=[common],
                       help="silicon loss per trace from a file or a directory of traces")
    p.add_argument("source", type=Path)
    p.add_argument("--window", type=int)
    p.add_argument("--target-field", type=float)
    p.add_argument("--parametric", default=None,
                   help="also write loss vs field from sliding windows to this file")
    p.set_defaults(func=cmd_loss_curve)

    p = sub.add_parser("vrh-eval", parents=[common], help="model table over a (T, E) grid")
    p.add_argument("--grid", help="e.g. T=0.05:1:200:log,E=5")
    p.set_defaults(func=cmd_vrh_eval)

    p = sub.add_parser("vrh-fit", parents=[common], help="fit the model to a point file")
    p.add_argument("points", type=Path)
    p.add_argument("--e-fit", type=float, help="field at which the model is fitted (V/m)")
    p.set_defaults(func=cmd_vrh_fit)

    p = sub.add_parser("synth", parents=[common], help="synthetic traces and loss curves")
    p.add_argument("kind", choices=("ringdown", "ringdown-field", "loss-curve"))
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", help="loss-curve grid, e.g. T=0.07:1:30:log,E=5")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SilossError as exc:
        print(f"siloss {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
