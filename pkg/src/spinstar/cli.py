"""Batch front end: ``spinstar CONFIG.json [--output-dir DIR] [--threads N] [--tolerance TOL]``.

The config is a JSON object whose ``command`` key selects one of
``spectrum``, ``reduce``, ``evolve``, ``evolve-effective``, ``meanfield``,
``fixed-points`` or ``phase-scan``. Every run writes its data files plus a
``manifest.json`` that echoes the fully resolved config; the manifest can
be passed back as a config (its extra keys are ignored).

Exit codes: 0 success, 2 invalid config, 3 numerical failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import copy
import io
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (IntegrationError, NonOscillatoryError, central_state, evolve,
                       oscillation_lifetime, polarized_dicke_state)
from .liouvillian import (ConvergenceError, SteadyStateError, classify_stripes, eigendecompose,
                          hausdorff_distance, spin_star_liouvillian)
from .meanfield import (MeanFieldState, ReducedParams, fixed_point_report, fixed_points,
                        integrate_meanfield, limit_cycle_frequency, linearized_frequency,
                        reduced_rhs)
from .phase import ScanConfig, resolve_threads, scan_grid
from .spin import SpinStarParams
from .zeno import ReductionError, ValidityWarning, effective_lindbladian

MANIFEST_SCHEMA = "spinstar.manifest/1"
COMMANDS = ("spectrum", "reduce", "evolve", "evolve-effective", "meanfield", "fixed-points",
            "phase-scan")
EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 2, 3, 4

USAGE = """usage: spinstar CONFIG.json [--output-dir DIR] [--threads N] [--tolerance TOL]

CONFIG.json must hold an object with a "command" key, one of:
  spectrum          full and effective Liouvillian eigenvalues with stripe labels
  reduce            effective ancilla master equation as JSON
  evolve            full spin-star master-equation trajectory
  evolve-effective  effective ancilla master-equation trajectory
  meanfield         reduced or full mean-field trajectory and frequencies
  fixed-points      fixed points of the reduced mean-field flow
  phase-scan        (gamma, N) scan of order parameter, gap and phase label
"""


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config ---

def _number(cfg, key, default=None, positive=False, integer=False):
    value = cfg.get(key, default)
    if value is None:
        raise ConfigError(f"missing required key {key!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key!r} must be a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(f"{key!r} must be an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
    if not math.isfinite(value) or (positive and value <= 0):
        raise ConfigError(f"{key!r} must be {'positive and ' if positive else ''}finite, got {value!r}")
    return value


def _vector(value, name):
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{name!r} must be a list of three numbers")
    v = np.array(value, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ConfigError(f"{name!r} must be finite")
    return [float(x) for x in v]


def resolve_params(raw) -> SpinStarParams:
    """Spin-star parameters from an explicit record or a named preset.

    Presets: ``"fig2"`` (keys ``N``, ``gamma_reduced``) and ``"anisotropic"``
    (keys ``N``, ``Omega``, ``J_xx``, ``omega_a``, ``omega_c`` and either
    ``gamma_reduced`` or ``Omega_over_kappa``).
    """
    if not isinstance(raw, dict):
        raise ConfigError("'params' must be an object")
    preset = raw.get("preset")
    try:
        if preset == "fig2":
            return SpinStarParams.fig2(N=_number(raw, "N", 20, integer=True),
                                       gamma_reduced=_number(raw, "gamma_reduced", 15.0))
        if preset == "anisotropic":
            Omega = _number(raw, "Omega")
            J_xx = _number(raw, "J_xx", 1.0)
            if "Omega_over_kappa" in raw:
                ratio = _number(raw, "Omega_over_kappa", positive=True)
                gamma = ratio * J_xx ** 2 / Omega
            else:
                gamma = _number(raw, "gamma_reduced")
            return SpinStarParams.anisotropic(_number(raw, "N", integer=True), gamma, Omega,
                                              J_xx=J_xx, omega_a=_number(raw, "omega_a", 0.0),
                                              omega_c=_number(raw, "omega_c", 0.0))
        if preset is not None:
            raise ConfigError(f"unknown params preset {preset!r}")
        J = raw.get("J")
        if J is None:
            raise ConfigError("explicit params need a 3x3 coupling matrix 'J'")
        return SpinStarParams(omega_c=_number(raw, "omega_c", 0.0),
                              omega_a=_number(raw, "omega_a", 0.0),
                              J=np.array(J, dtype=float),
                              gamma_reduced=_number(raw, "gamma_reduced"),
                              N=_number(raw, "N", integer=True))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid params: {exc}") from exc


def _reduced(cfg) -> ReducedParams:
    if "params" in cfg:
        return ReducedParams.from_params(resolve_params(cfg["params"]))
    kappa = _number(cfg, "kappa", 1.0, positive=True)
    if "Omega_over_kappa" in cfg:
        Omega = _number(cfg, "Omega_over_kappa") * kappa
    else:
        Omega = _number(cfg, "Omega", 1.5)
    return ReducedParams(Omega, kappa)


def _time_grid(cfg, t_final, n_times):
    t_final = _number(cfg, "t_final", t_final, positive=True)
    n_times = _number(cfg, "n_times", n_times, integer=True)
    if n_times < 2:
        raise ConfigError("'n_times' must be at least 2")
    return {"t_final": t_final, "n_times": n_times}


def _tolerances(cfg, rtol, atol, override):
    if override is not None:
        # the flag sets rtol and scales atol by the default ratio
        return {"rtol": float(override), "atol": float(override) * atol / rtol}
    return {"rtol": _number(cfg, "rtol", rtol, positive=True),
            "atol": _number(cfg, "atol", atol, positive=True)}


def resolve_config(cfg: dict, tolerance=None, threads=None) -> dict:
    """Fill in defaults and validate; the result is the manifest's config echo."""
    if not isinstance(cfg, dict) or not cfg:
        raise ConfigError("config must be a non-empty JSON object")
    command = cfg.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"'command' must be one of {', '.join(COMMANDS)}; got {command!r}")
    out = {"command": command}

    if command in ("spectrum", "reduce", "evolve", "evolve-effective"):
        raw = cfg.get("params", {"preset": "fig2"} if command in ("spectrum", "reduce") else None)
        if raw is None:
            raise ConfigError(f"{command!r} needs 'params'")
        out["params"] = resolve_params(raw).to_dict()

    if command == "spectrum":
        which = cfg.get("which", ["full", "effective"])
        if not isinstance(which, list) or not which or set(which) - {"full", "effective"}:
            raise ConfigError("'which' must be a non-empty list drawn from 'full', 'effective'")
        out["which"] = [w for w in ("full", "effective") if w in which]
        out["stripe_half_width"] = _number(cfg, "stripe_half_width", 0.25, positive=True)

    elif command in ("evolve", "evolve-effective"):
        out.update(_time_grid(cfg, 40.0, 401))
        out.update(_tolerances(cfg, 1e-8, 1e-10, tolerance))
        out["direction"] = _vector(cfg.get("direction", [0.0, 0.0, 1.0]), "direction")
        if not any(out["direction"]):
            raise ConfigError("'direction' must be non-zero")
        if command == "evolve":
            central = cfg.get("central", "ground")
            if central not in ("ground", "excited"):
                raise ConfigError("'central' must be 'ground' or 'excited'")
            out["central"] = central
        cps = cfg.get("checkpoints", [])
        if not isinstance(cps, list):
            raise ConfigError("'checkpoints' must be a list of times")
        out["checkpoints"] = [_number({"t": c}, "t") for c in cps]
        out["positivity"] = bool(cfg.get("positivity", True))

    elif command == "meanfield":
        kind = cfg.get("kind", "reduced")
        if kind not in ("reduced", "full"):
            raise ConfigError("'kind' must be 'reduced' or 'full'")
        out["kind"] = kind
        if kind == "full":
            raw = cfg.get("params")
            if raw is None:
                raise ConfigError("full mean-field runs need 'params'")
            out["params"] = resolve_params(raw).to_dict()
        else:
            rp = _reduced(cfg)
            out.update({"Omega": rp.Omega, "kappa": rp.kappa})
        out.update(_time_grid(cfg, 100.0, 2001))
        out.update(_tolerances(cfg, 1e-10, 1e-12, tolerance))
        m0 = _vector(cfg.get("initial_m", [0.0, 0.0, 1.0]), "initial_m")
        if np.linalg.norm(m0) > 1 + 1e-12:
            raise ConfigError("'initial_m' must satisfy |m| <= 1")
        out["initial_m"] = m0
        if kind == "full":
            out["initial_s"] = _vector(cfg.get("initial_s", [0.0, 0.0, -0.5]), "initial_s")

    elif command == "fixed-points":
        rp = _reduced(cfg)
        out.update({"Omega": rp.Omega, "kappa": rp.kappa})

    elif command == "phase-scan":
        gammas, Ns = cfg.get("gammas"), cfg.get("Ns")
        if not isinstance(gammas, list) or not gammas:
            raise ConfigError("'gammas' must be a non-empty list")
        if not isinstance(Ns, list) or not Ns:
            raise ConfigError("'Ns' must be a non-empty list (use \"inf\" for mean field)")
        out["gammas"] = [_gamma_value(g) for g in gammas]
        out["Ns"] = [_N_value(n) for n in Ns]
        base = ScanConfig(gammas=[], Ns=[])
        for key in ("J_xx", "Omega", "omega_a", "t_final", "order_threshold",
                    "window_fraction", "gap_floor", "rtol", "atol", "mf_rtol", "mf_atol"):
            out[key] = _number(cfg, key, getattr(base, key), positive=key not in ("omega_a",))
        if tolerance is not None:
            out["rtol"], out["atol"] = float(tolerance), float(tolerance) * base.atol / base.rtol
        out["n_times"] = _number(cfg, "n_times", base.n_times, integer=True)
        out["direction"] = _vector(cfg.get("direction", list(base.direction)), "direction")
        out["threads"] = resolve_threads(threads)
    return out


def _gamma_value(g):
    if g in ("inf", "Infinity"):
        return "inf"
    return _number({"gamma": g}, "gamma", positive=True)


def _N_value(n):
    if n in (None, "inf", "mf"):
        return "inf"
    value = _number({"N": n}, "N", integer=True)
    if value < 1:
        raise ConfigError("ancilla counts must be positive")
    return value


# ---------------------------------------------------------------- output ---

def format_number(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (str, np.str_)):
        return str(x)
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = format(x, ".12g")
    return "0" if s in ("-0", "0") else s


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(format_number(v) for v in row) + "\n")
    path.write_text(buf.getvalue(), encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return 0.0 if x == 0 else x
    if isinstance(obj, complex):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sorted_spectrum(vals, *cols):
    order = np.lexsort((vals.imag, -vals.real))
    return [vals[order]] + [np.asarray(c)[order] for c in cols]


# -------------------------------------------------------------- commands ---

def _params(resolved) -> SpinStarParams:
    p = resolved["params"]
    return SpinStarParams(omega_c=p["omega_c"], omega_a=p["omega_a"], J=np.array(p["J"]),
                          gamma_reduced=p["gamma_reduced"], N=p["N"])


def _effective(params):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ValidityWarning)
        model = effective_lindbladian(params)
    return model


def run_spectrum(cfg, outdir):
    params = _params(cfg)
    outputs, summary = [], {"Gamma": params.Gamma}
    full_stripe0 = None
    if "full" in cfg["which"]:
        spec = classify_stripes(eigendecompose(spin_star_liouvillian(params), left=False),
                                params.Gamma,
                                half_width=cfg["stripe_half_width"])
        vals, labels, res = _sorted_spectrum(spec.eigenvalues, spec.stripe_labels, spec.residuals)
        write_csv(outdir / "spectrum_full.csv", ["re", "im", "stripe", "residual"],
                  zip(vals.real, vals.imag, labels, res))
        outputs.append("spectrum_full.csv")
        full_stripe0 = spec.stripe(0)
        summary.update(stripe_counts=spec.stripe_counts, stripes_valid=spec.stripes_valid,
                       max_residual=float(spec.residuals.max()), notes=list(spec.notes))
    if "effective" in cfg["which"]:
        model = _effective(params)
        spec = eigendecompose(model.superoperator(), left=False)
        vals, res = _sorted_spectrum(spec.eigenvalues, spec.residuals)
        write_csv(outdir / "spectrum_effective.csv", ["re", "im", "stripe", "residual"],
                  zip(vals.real, vals.imag, np.zeros(len(vals), dtype=int), res))
        outputs.append("spectrum_effective.csv")
        summary["validity_warning"] = model.validity_warning
        if full_stripe0 is not None:
            summary["stripe0_hausdorff"] = hausdorff_distance(full_stripe0, spec.eigenvalues)
    return outputs, summary


def run_reduce(cfg, outdir):
    model = _effective(_params(cfg))
    write_json(outdir / "effective_model.json", model.to_dict())
    return ["effective_model.json"], {"validity_warning": model.validity_warning,
                                      "n_jumps": len(model.jump_terms)}


def _trajectory_rows(traj):
    cols = traj.columns
    rows = zip(traj.times, *(traj[c] for c in cols))
    return ["time"] + cols, rows


def run_evolve(cfg, outdir):
    params = _params(cfg)
    rho_a = polarized_dicke_state(params.N, cfg["direction"])
    t = np.linspace(0.0, cfg["t_final"], cfg["n_times"])
    if cfg["command"] == "evolve":
        gen = spin_star_liouvillian(params)
        rho0 = np.kron(central_state(cfg["central"]), rho_a)
        name = "trajectory_full.csv"
        extra = {}
    else:
        model = _effective(params)
        gen = model.superoperator()
        rho0 = rho_a
        name = "trajectory_effective.csv"
        extra = {"validity_warning": model.validity_warning}
    traj = evolve(gen, rho0, t, rtol=cfg["rtol"], atol=cfg["atol"],
                  checkpoints=cfg["checkpoints"], positivity=cfg["positivity"])
    header, rows = _trajectory_rows(traj)
    write_csv(outdir / name, header, rows)
    outputs = [name]
    if traj.states:
        states = [{"t": tc, "re": np.real(r), "im": np.imag(r)} for tc, r in sorted(traj.states.items())]
        write_json(outdir / "checkpoints.json", {"schema": "spinstar.checkpoints/1", "states": states})
        outputs.append("checkpoints.json")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = oscillation_lifetime(traj, "m_z")
    summary = {"nfev": traj.metadata["nfev"],
               "max_trace_defect": float(np.abs(traj["trace"] - 1).max()),
               "max_hermiticity_defect": float(traj["hermiticity"].max()),
               "m_z_fit": {"frequency": fit.frequency, "decay_rate": fit.decay_rate,
                           "low_confidence": fit.low_confidence}, **extra}
    if cfg["positivity"]:
        summary["min_eigenvalue"] = float(np.nanmin(traj["min_eig"]))
    return outputs, summary


def _frequency(traj, name):
    try:
        return limit_cycle_frequency(traj, name)
    except NonOscillatoryError:
        return None


def run_meanfield(cfg, outdir):
    t = np.linspace(0.0, cfg["t_final"], cfg["n_times"])
    m0 = np.array(cfg["initial_m"])
    tol = dict(rtol=cfg["rtol"], atol=cfg["atol"])
    summary = {}
    if cfg["kind"] == "reduced":
        rp = ReducedParams(cfg["Omega"], cfg["kappa"])
        traj = integrate_meanfield("reduced", m0, t, rp, **tol)
        m_end = np.array([traj[f"m_{a}"][-1] for a in "xyz"])
        phys = [fp for fp in fixed_points(rp) if fp.physical]
        dists = [float(np.linalg.norm(m_end - fp.m.real)) for fp in phys]
        summary.update(final_rhs_residual=float(np.linalg.norm(reduced_rhs(m_end, rp))),
                       nearest_fixed_point_distance=min(dists) if dists else None,
                       linearized_frequency=linearized_frequency(rp))
    else:
        params = _params(cfg)
        state = MeanFieldState(m0, np.array(cfg["initial_s"]))
        traj = integrate_meanfield("full", state, t, params, **tol)
        summary["S_x_frequency"] = _frequency(traj, "S_x")
    summary["m_z_frequency"] = _frequency(traj, "m_z")
    summary["max_norm_drift"] = float(np.abs(traj["norm_m"] - traj["norm_m"][0]).max())
    header, rows = _trajectory_rows(traj)
    write_csv(outdir / "meanfield.csv", header, rows)
    return ["meanfield.csv"], summary


def run_fixed_points(cfg, outdir):
    report = fixed_point_report(ReducedParams(cfg["Omega"], cfg["kappa"]))
    write_json(outdir / "fixed_points.json", report)
    return ["fixed_points.json"], {"physical": [fp["family"] for fp in report["fixed_points"]
                                                if fp["physical"]]}


def run_phase_scan(cfg, outdir):
    fields = {k: v for k, v in cfg.items() if k not in ("command",)}
    fields["gammas"] = [math.inf if g == "inf" else g for g in cfg["gammas"]]
    fields["Ns"] = [None if n == "inf" else n for n in cfg["Ns"]]
    fields["direction"] = tuple(cfg["direction"])
    points = scan_grid(ScanConfig(**fields))
    header = ["gamma", "N", "order_parameter", "gap", "lifetime", "label", "Omega_over_kappa"]
    rows = [(p.gamma_reduced, "inf" if p.N is None else p.N, p.order_parameter, p.spectral_gap,
             p.lifetime, p.phase_label, p.Omega_over_kappa) for p in points]
    write_csv(outdir / "phase_scan.csv", header, rows)
    errors = [{"gamma": p.gamma_reduced, "N": p.N, "error": p.error} for p in points if p.error]
    return ["phase_scan.csv"], {"n_points": len(points), "errors": errors}


RUNNERS = {"spectrum": run_spectrum, "reduce": run_reduce, "evolve": run_evolve,
           "evolve-effective": run_evolve, "meanfield": run_meanfield,
           "fixed-points": run_fixed_points, "phase-scan": run_phase_scan}


def run(config: dict, output_dir=".", threads=None, tolerance=None) -> dict:
    """Resolve, execute and record one command; returns the manifest."""
    resolved = resolve_config(config, tolerance=tolerance, threads=threads)
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs, summary = RUNNERS[resolved["command"]](resolved, outdir)
    manifest = dict(copy.deepcopy(resolved))
    manifest.update(schema=MANIFEST_SCHEMA, version=__version__, outputs=outputs, summary=summary)
    write_json(outdir / "manifest.json", manifest)
    return manifest


# ------------------------------------------------------------ entry point ---

NUMERIC_ERRORS = (ConvergenceError, SteadyStateError, IntegrationError, NonOscillatoryError,
                  ReductionError, ArithmeticError, np.linalg.LinAlgError)


def _fail(code, kind, message, usage=False):
    if usage:
        sys.stderr.write(USAGE + "\n")
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="spinstar", usage=USAGE.splitlines()[0][7:],
                                     description="Spin-star simulation runs from a JSON config.")
    parser.add_argument("config", help="JSON run configuration")
    parser.add_argument("--output-dir", default=".", help="directory for output files")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes for phase-scan (default: $SPINSTAR_THREADS or 1)")
    parser.add_argument("--tolerance", type=float, default=None,
                        help="relative integrator tolerance; absolute tolerance scales with it")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_IO, "io", f"cannot read config: {exc}")
    try:
        config = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        return _fail(EXIT_CONFIG, "config", f"config is not valid JSON: {exc}", usage=True)
    if args.tolerance is not None and not (args.tolerance > 0 and math.isfinite(args.tolerance)):
        return _fail(EXIT_CONFIG, "config", "--tolerance must be positive", usage=True)
    if args.threads is not None and args.threads < 1:
        return _fail(EXIT_CONFIG, "config", "--threads must be at least 1", usage=True)

    try:
        run(config, args.output_dir, threads=args.threads, tolerance=args.tolerance)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), usage=True)
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    except NUMERIC_ERRORS as exc:
        return _fail(EXIT_NUMERIC, "numerical", f"{type(exc).__name__}: {exc}")
    except ValueError as exc:
        return _fail(EXIT_NUMERIC, "numerical", f"{type(exc).__name__}: {exc}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
