"""Command-line interface.

Every subcommand writes one output file (CSV with unit-bearing headers, or
JSON) plus a ``<out>.run.json`` sidecar holding the command line, the full
configuration, the package version, the seed and the SHA-256 of the output.
Frequencies on the command line and in files are in Hz.

Exit codes: 0 success, 1 bad input or configuration, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import __version__
from .config import Config, load_config
from .core import TWO_PI
from .curvature import (CavityGeometry, default_angles, load_height_map,
                        predict_polarization_splitting, roc_vs_angle)
from .errors import FlatSurface, FormatError, InputError, NoCancellation, NumericalError, ValidationError
from .globalfit import FixedParameters, global_fit
from .spectra import (NoiseSpectrum, fit_lorentzian, ringdown_fit, synthesize_spectrum,
                      temperature_from_fit)
from .thermometry import sideband_weights, thermometry
from .twomode import DesignCandidate, cancellation_detuning, design_feasibility, sweep, transmission_scan


# -- serialization helpers --------------------------------------------------

def _num(x):
    """Shortest round-trip text for a float."""
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_num(v) for v in row])
    return buf.getvalue()


def _write_output(path, text, args, config: Config, seed=None, summary=None, inputs=None):
    data = text.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(data)
    record = {
        "command": [args.command] + list(args.argv),
        "config": config.to_dict(),
        "version": __version__,
        "seed": seed,
        "output": os.path.basename(path),
        "sha256": hashlib.sha256(data).hexdigest(),
        "inputs": inputs or {},
        "summary": summary or {},
    }
    with open(path + ".run.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump_json(record))


def _file_digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _read_csv(path, columns):
    """Columns of a CSV file as float arrays, by header name."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise FormatError(f"{path}: missing column(s) {', '.join(missing)}")
        out = {c: [] for c in columns}
        for lineno, row in enumerate(reader, start=2):
            for c in columns:
                try:
                    out[c].append(float(row[c]))
                except (TypeError, ValueError):
                    raise FormatError(f"{path}:{lineno}: non-numeric {c!r}") from None
    return {c: np.array(v, dtype=float) for c, v in out.items()}


def _config(args) -> Config:
    return load_config(args.config) if args.config else Config().validate()


# -- subcommands ------------------------------------------------------------

def cmd_sweep(args):
    config = _config(args)
    grid_hz = config.sweep.grid_hz()
    system = config.system.to_system()
    result = sweep(system, TWO_PI * grid_hz, quantum_bath=config.system.quantum_bath)
    rows = [
        (x, p.delta_omega_total / TWO_PI, p.gamma_eff_total / TWO_PI, p.t_eff, p.n_eff)
        for x, p in zip(grid_hz, result.points)
    ]
    try:
        cancel = cancellation_detuning(system) / TWO_PI
    except NoCancellation:
        cancel = None
    t_eff = result.column("t_eff")
    stable = np.isfinite(t_eff)
    summary = {
        "cancellation_hz": cancel,
        "n_points": len(rows),
        "n_unstable": int(np.count_nonzero(~stable)),
    }
    if stable.any():
        i = int(np.nanargmin(t_eff))
        summary["t_eff_min_k"] = t_eff[i]
        summary["t_eff_min_detuning_hz"] = grid_hz[i]
    text = _csv_text(["detuning_hz", "delta_omega_hz", "gamma_eff_hz", "t_eff_k", "n_eff"], rows)
    _write_output(args.out, text, args, config, summary=summary)
    return summary


def cmd_global_fit(args):
    config = _config(args)
    data = _read_csv(args.data, ["detuning_hz", "delta_omega_hz", "gamma_eff_hz"])
    obs = TWO_PI * np.column_stack([data["detuning_hz"], data["delta_omega_hz"], data["gamma_eff_hz"]])
    s = config.system
    fixed = FixedParameters(s.mechanical_mode(), TWO_PI * s.g0, s.wavelength, s.eta)
    if args.init:
        try:
            init = [float(v) for v in args.init.split(",")]
        except ValueError:
            raise ValidationError("init", "expected four comma-separated numbers") from None
        if len(init) != 4:
            raise ValidationError("init", "expected kappa_hz,splitting_hz,p_h_w,p_v_w")
    else:
        init = [s.kappa, s.splitting, s.p_h, s.p_v]
    fit = global_fit(obs, fixed, init, max_iter=args.max_iter)
    err = fit.std_errors
    out = {
        "kappa_hz": fit.kappa, "kappa_hz_err": err[0],
        "splitting_hz": fit.splitting, "splitting_hz_err": err[1],
        "p_h_w": fit.p_h, "p_h_w_err": err[2],
        "p_v_w": fit.p_v, "p_v_w_err": err[3],
        "residual_rms": fit.residual_rms,
        "iterations": fit.iterations,
        "n_observations": int(np.count_nonzero(np.all(np.isfinite(obs), axis=1))),
        "init": init,
    }
    _write_output(args.out, _dump_json(out), args, config, summary={"iterations": fit.iterations},
                  inputs={os.path.basename(args.data): _file_digest(args.data)})
    return out


def cmd_spectrum(args):
    config = _config(args)
    syn = config.synthesis
    if args.detuning_hz is not None:
        syn = replace(syn, detuning=args.detuning_hz)
    if args.seed is not None:
        syn = replace(syn, seed=args.seed)
    if args.noise is not None:
        syn = replace(syn, noise_fraction=args.noise)
    syn.validate()
    config = replace(config, synthesis=syn)

    system = config.system.to_system()
    point = sweep(system, [TWO_PI * syn.detuning], quantum_bath=config.system.quantum_bath).points[0]
    center = (system.mech.omega_m + point.delta_omega_total) / TWO_PI
    fwhm = point.gamma_eff_total / TWO_PI
    if not fwhm > 0:
        from .errors import InstabilityError
        raise InstabilityError(point.instability or "non-positive linewidth")
    half_bins = int(math.ceil(syn.span_fwhm * syn.bins_per_fwhm))
    freq = center + (fwhm / syn.bins_per_fwhm) * np.arange(-half_bins, half_bins + 1)
    freq = freq[freq > 0]
    spec = synthesize_spectrum(system, TWO_PI * syn.detuning, freq, syn.noise_fraction, syn.seed,
                               offset=syn.offset, quantum_bath=config.system.quantum_bath)
    summary = {"center_hz": center, "fwhm_hz": fwhm, "t_eff_k": point.t_eff, "n_bins": freq.size}
    text = _csv_text(["freq_hz", "psd_m2_per_hz"], zip(spec.freq, spec.psd))
    _write_output(args.out, text, args, config, seed=syn.seed, summary=summary)
    return summary


def cmd_fit_spectrum(args):
    config = _config(args)
    data = _read_csv(args.data, ["freq_hz", "psd_m2_per_hz"])
    try:
        spec = NoiseSpectrum(data["freq_hz"], data["psd_m2_per_hz"])
    except ValueError as exc:
        raise FormatError(f"{args.data}: {exc}") from None
    fit = fit_lorentzian(spec, max_iter=args.max_iter)
    out = {
        "center_hz": fit.center, "center_hz_err": fit.center_err,
        "fwhm_hz": fit.fwhm, "fwhm_hz_err": fit.fwhm_err,
        "area_m2": fit.area, "area_m2_err": fit.area_err,
        "offset_m2_per_hz": fit.offset, "offset_m2_per_hz_err": fit.offset_err,
        "residual_rms": fit.residual_rms,
        "iterations": fit.iterations,
        "t_eff_k": temperature_from_fit(fit, config.system.mechanical_mode()),
    }
    _write_output(args.out, _dump_json(out), args, config, summary={"t_eff_k": out["t_eff_k"]},
                  inputs={os.path.basename(args.data): _file_digest(args.data)})
    return out


def cmd_thermometry(args):
    config = _config(args)
    th = config.thermometry
    if args.n is not None or args.ratio is not None:
        th = replace(th, n=args.n, ratio=args.ratio)
    if args.detuning_hz is not None:
        th = replace(th, detuning=args.detuning_hz)
    th.validate()
    config = replace(config, thermometry=th)
    detuning = th.detuning if th.detuning is not None else 0.5 * config.system.splitting
    system = config.system.to_system(detuning)
    weights = sideband_weights(system)
    res = thermometry(weights, n=th.n, ratio=th.ratio)
    out = {
        "detuning_hz": detuning,
        "ratio_hv": res.ratio_hv,
        "n_est": res.n_est,
        "s_omega": res.s_omega,
        "s_2omega": res.s_2omega,
        "weights": asdict(weights),
    }
    _write_output(args.out, _dump_json(out), args, config, summary={"n_est": res.n_est})
    return out


def cmd_curvature(args):
    config = _config(args)
    cv = config.curvature
    if args.map is not None:
        cv = replace(cv, map=args.map)
    if args.r_max_m is not None:
        cv = replace(cv, r_max=args.r_max_m)
    if args.angle_step_deg is not None:
        cv = replace(cv, angle_step=args.angle_step_deg)
    if args.length_m is not None:
        cv = replace(cv, length=args.length_m)
    cv.validate()
    if cv.map is None:
        raise ValidationError("map", "a height-map file is required")
    config = replace(config, curvature=cv)

    hmap = load_height_map(os.fspath(cv.map))
    angles = default_angles(cv.angle_step)
    profile = roc_vs_angle(hmap, angles, cv.r_max)
    rocs = np.array(profile.rocs)
    good = np.isfinite(rocs) & (rocs > 0)
    summary = {"n_angles": len(angles), "n_failed": int(np.count_nonzero(~np.isfinite(rocs)))}
    if not good.any():
        raise FlatSurface("no angle gave a finite positive radius of curvature")
    r_min, r_max = float(rocs[good].min()), float(rocs[good].max())
    summary.update(roc_min_m=r_min, roc_max_m=r_max)
    geom = CavityGeometry(cv.length, config.system.wavelength, r_max, r_min)
    summary["predicted_splitting_hz"] = predict_polarization_splitting(geom)
    rows = [(math.degrees(a), r) for a, r in zip(profile.angles, profile.rocs)]
    text = _csv_text(["angle_deg", "roc_m"], rows)
    _write_output(args.out, text, args, config, summary=summary,
                  inputs={os.path.basename(cv.map): _file_digest(cv.map)})
    return summary


def cmd_ringdown(args):
    config = _config(args)
    data = _read_csv(args.data, ["time_s", "intensity_w"])
    try:
        fit = ringdown_fit(np.column_stack([data["time_s"], data["intensity_w"]]), max_iter=args.max_iter)
    except ValueError as exc:
        raise FormatError(f"{args.data}: {exc}") from None
    out = {
        "tau_s": fit.tau, "tau_s_err": fit.tau_err, "kappa_hz": fit.kappa,
        "amplitude_w": fit.amplitude, "background_w": fit.background,
    }
    _write_output(args.out, _dump_json(out), args, config, summary={"kappa_hz": fit.kappa},
                  inputs={os.path.basename(args.data): _file_digest(args.data)})
    return out


def cmd_design(args):
    config = _config(args)
    candidate = DesignCandidate(
        length=args.length_m, kappa_hz=args.kappa_hz, omega_m_hz=args.omega_m_hz,
        q_factor=args.q_factor, g0_hz=args.g0_hz, power=args.power_w,
        temperature=args.temperature_k, wavelength=args.wavelength_m, eta=args.eta,
    )
    try:
        report = design_feasibility(candidate)
    except ValueError as exc:
        raise ValidationError("design", str(exc)) from None
    out = {"candidate": asdict(candidate), **asdict(report)}
    _write_output(args.out, _dump_json(out), args, config,
                  summary={"ratio": report.ratio, "sideband_resolved": report.sideband_resolved})
    return out


def cmd_transmission(args):
    config = _config(args)
    if not 0.0 <= args.angle_deg <= 90.0:
        raise ValidationError("angle_deg", "must lie in [0, 90]")
    if args.points < 2:
        raise ValidationError("points", "must be >= 2")
    s = config.system
    lo = args.start_hz if args.start_hz is not None else -4.0 * s.kappa
    hi = args.stop_hz if args.stop_hz is not None else s.splitting + 4.0 * s.kappa
    if not hi > lo:
        raise ValidationError("stop_hz", "must exceed start_hz")
    offsets = np.linspace(lo, hi, args.points)
    rows = transmission_scan(s.to_system(), TWO_PI * offsets, math.radians(args.angle_deg))
    text = _csv_text(["offset_hz", "transmission"], ((o, t) for o, (_, t) in zip(offsets, rows)))
    _write_output(args.out, text, args, config, summary={"angle_deg": args.angle_deg})
    return {}


# -- parser -----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="polcav", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, *, data=False):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="JSON configuration file (defaults if omitted)")
        p.add_argument("--out", required=True, help="output file; a .run.json sidecar is written next to it")
        if data:
            p.add_argument("--data", required=True, help="input CSV")
        return p

    add("sweep", cmd_sweep, "spring, damping and T_eff versus detuning (CSV)")

    p = add("global-fit", cmd_global_fit, "fit kappa, splitting, P_h, P_v to a sweep CSV (JSON)", data=True)
    p.add_argument("--init", help="kappa_hz,splitting_hz,p_h_w,p_v_w (default: config values)")
    p.add_argument("--max-iter", type=int, default=200)

    p = add("spectrum", cmd_spectrum, "synthetic displacement PSD at one detuning (CSV)")
    p.add_argument("--detuning-hz", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise", type=float, help="multiplicative noise fraction per bin")

    p = add("fit-spectrum", cmd_fit_spectrum, "Lorentzian fit and mode temperature of a PSD CSV (JSON)",
            data=True)
    p.add_argument("--max-iter", type=int, default=200)

    p = add("thermometry", cmd_thermometry, "H/V sideband ratio forward model or inversion (JSON)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--n", type=float, help="phonon occupation (forward model)")
    g.add_argument("--ratio", type=float, help="measured H/V ratio (inversion)")
    p.add_argument("--detuning-hz", type=float, help="laser offset from H (default: splitting / 2)")

    p = add("curvature", cmd_curvature, "local ROC versus angle from a height map (CSV)")
    p.add_argument("--map", help="height-map file")
    p.add_argument("--r-max-m", type=float)
    p.add_argument("--angle-step-deg", type=float)
    p.add_argument("--length-m", type=float, help="cavity length for the splitting estimate")

    p = add("ringdown", cmd_ringdown, "exponential fit to a decay trace (JSON)", data=True)
    p.add_argument("--max-iter", type=int, default=200)

    d = DesignCandidate()
    p = add("design", cmd_design, "cooperativity versus thermal occupation for a design (JSON)")
    p.add_argument("--length-m", type=float, default=d.length)
    p.add_argument("--kappa-hz", type=float, default=d.kappa_hz)
    p.add_argument("--omega-m-hz", type=float, default=d.omega_m_hz)
    p.add_argument("--q-factor", type=float, default=d.q_factor)
    p.add_argument("--g0-hz", type=float, default=d.g0_hz)
    p.add_argument("--power-w", type=float, default=d.power)
    p.add_argument("--temperature-k", type=float, default=d.temperature)
    p.add_argument("--wavelength-m", type=float, default=d.wavelength)
    p.add_argument("--eta", type=float, default=d.eta)

    p = add("transmission", cmd_transmission, "bare-cavity transmission scan (CSV)")
    p.add_argument("--angle-deg", type=float, default=45.0, help="input polarization from the H axis")
    p.add_argument("--start-hz", type=float)
    p.add_argument("--stop-hz", type=float)
    p.add_argument("--points", type=int, default=1001)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are input errors here
        return 0 if exc.code == 0 else 1
    args.argv = argv[1:]
    try:
        args.func(args)
    except (InputError, ValueError, OSError) as exc:
        print(f"polcav {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"polcav {args.command}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
