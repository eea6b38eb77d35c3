"""Command-line front end: frequency sweeps, reference-figure curves,
bound-certification runs, and stability reports.

Configuration is a flat JSON document mirroring the RunConfig field names;
command-line flags override file values. The only environment hook is
DETLIM_OUTDIR, which redirects relative output paths. Exit codes are a
stable contract: 0 success, 2 configuration error, 3 unstable model,
4 bound violation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .core import (
    DetectorModelError,
    DetectorNoiseModel,
    LoopGains,
    LoopSingularityError,
    PoleError,
    added_noise_spectrum,
    analytic_optimum_bound,
    bound_coefficients,
    is_physical,
    sample_physical_noise,
    sql_displacement,
    sql_force,
    uql_displacement,
    uql_force,
)
from .optomech import (
    LAMBDA_POLICIES,
    OptomechParams,
    ZeroSignalError,
    build_detuned_model,
    build_locking_model,
    frequency_grid,
    sensitivity_point,
    stability,
    sweep_curve,
)
from .svg import write_log_plot

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_VIOLATION = 4

SWEEP_HEADER = "omega,S_f,S_q,SQL_f,UQL_f,SQL_q,UQL_q,lambda_re,lambda_im,stable"
FIG2_HEADER = "omega,sql,uql,detuned,locking"

BOUNDS_TOLERANCE = 1e-9

# built-in operating points for the reference figure
FIG2_DETUNED = dict(omega_m=0.1, gamma_m=0.1, gamma_c=2.0, detuning=-5.0,
                    g=5.0, phi=-math.pi / 4)
FIG2_LOCKING = {
    "a": dict(omega_m=0.1, gamma_m=0.1, gamma_c=5.0, g=1.0, g_ctrl=2.0,
              theta=math.atan(2.0), phi=0.0),
    "b": dict(omega_m=0.1, gamma_m=0.1, gamma_c=2.0, g=1.0, g_ctrl=2.0,
              theta=0.0, phi=0.0),
}


class ConfigError(Exception):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    """Flat run configuration; JSON files use exactly these field names."""

    model: str = "detuned"
    omega_m: float = 0.1
    gamma_m: float = 0.1
    gamma_c: float = 2.0
    detuning: float = 0.0
    g: float = 5.0
    g_ctrl: float = 0.0
    phi: float = 0.0
    theta: float = 0.0
    n_th: float = 0.0
    include_mech_noise: bool = False
    grid_min: float = 1e-2
    grid_max: float = 10.0
    grid_count: int = 400
    grid_scale: str = "log"
    lambda_policy: str = "off"
    lambda_re: float = 0.0
    lambda_im: float = 0.0
    out: str = "sweep.csv"
    seed: int = 1
    samples: int = 10000
    probes: int = 10


_CONFIG_FIELDS = {f.name for f in fields(RunConfig)}


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Merge a JSON config file (optional) with command-line overrides."""
    data = {}
    if path:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a flat JSON object")
        unknown = sorted(set(raw) - _CONFIG_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        data.update(raw)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.model not in ("detuned", "locking"):
        raise ConfigError(f"model must be 'detuned' or 'locking', got {cfg.model!r}")
    if cfg.lambda_policy not in LAMBDA_POLICIES:
        raise ConfigError(f"lambda_policy must be one of {LAMBDA_POLICIES}")
    if cfg.grid_count < 2 or not cfg.grid_min < cfg.grid_max:
        raise ConfigError("grid needs min < max and count >= 2")
    if cfg.grid_scale not in ("log", "linear"):
        raise ConfigError("grid_scale must be 'log' or 'linear'")
    return cfg


def resolve_out(path: str) -> Path:
    """Apply the DETLIM_OUTDIR override to relative output paths."""
    p = Path(path)
    outdir = os.environ.get("DETLIM_OUTDIR")
    if outdir and not p.is_absolute():
        p = Path(outdir) / p
    if p.parent:
        p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _params_from(cfg: RunConfig) -> OptomechParams:
    try:
        return OptomechParams(
            omega_m=cfg.omega_m, gamma_m=cfg.gamma_m, gamma_c=cfg.gamma_c,
            detuning=cfg.detuning, g=cfg.g, g_ctrl=cfg.g_ctrl, phi=cfg.phi,
            theta=cfg.theta, n_th=cfg.n_th,
            include_mech_noise=cfg.include_mech_noise,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid parameters: {exc}") from exc


def _stability_verdict(cfg: RunConfig, params: OptomechParams) -> bool | None:
    """Stability of the time-invariant model, None when not applicable."""
    if cfg.model == "detuned":
        return stability(build_detuned_model(params).a)
    if cfg.lambda_policy in ("optimize-force", "optimize-displacement"):
        return None
    lam = 0j if cfg.lambda_policy == "off" else complex(cfg.lambda_re, cfg.lambda_im)
    if lam.imag != 0:
        return None
    return stability(build_locking_model(params, lam).a)


def _fmt(x: float) -> str:
    return f"{x:.12e}"


def _write_lines(path: Path, lines: list[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def cmd_sweep(cfg: RunConfig) -> int:
    """Write one CSV row per grid point; see SWEEP_HEADER for the columns."""
    params = _params_from(cfg)
    if cfg.model == "detuned" and cfg.lambda_policy != "off":
        raise ConfigError("the detuned model has no feedback loop; use lambda_policy 'off'")
    if cfg.g == 0:
        raise ConfigError("zero-signal configuration: coupling g is 0, "
                          "the force never reaches the readout")
    grid = frequency_grid(cfg.grid_min, cfg.grid_max, cfg.grid_count, cfg.grid_scale)
    verdict = _stability_verdict(cfg, params)
    stable_str = "na" if verdict is None else ("true" if verdict else "false")
    lam_fixed = complex(cfg.lambda_re, cfg.lambda_im)

    lines = [SWEEP_HEADER]
    n_errors = 0
    for w in grid:
        try:
            s_f, s_q, lam_used = sensitivity_point(
                params, w, cfg.model, cfg.lambda_policy, lam_fixed
            )
            values = [
                w, s_f, s_q,
                sql_force(params.omega_m, params.gamma_m, w),
                uql_force(params.omega_m, params.gamma_m, w),
                sql_displacement(params.omega_m, params.gamma_m, w),
                uql_displacement(params.omega_m, params.gamma_m, w),
                lam_used.real, lam_used.imag,
            ]
            if not all(math.isfinite(v) for v in values):
                raise DetectorModelError("nonfinite")
            lines.append(",".join(_fmt(v) for v in values) + f",{stable_str}")
        except ZeroSignalError:
            lines.append("ERROR:zero-signal")
            n_errors += 1
        except LoopSingularityError:
            lines.append("ERROR:loop-singularity")
            n_errors += 1
        except PoleError:
            lines.append("ERROR:pole")
            n_errors += 1
        except DetectorModelError:
            lines.append("ERROR:nonfinite")
            n_errors += 1
    out = resolve_out(cfg.out)
    _write_lines(out, lines)
    print(f"wrote {out} ({len(grid)} points, {n_errors} errors, stable={stable_str})")
    if n_errors == len(grid):
        print("error: no grid point produced a sensitivity", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_UNSTABLE if verdict is False else EXIT_OK


def cmd_fig2(panel: str, out: str | None, svg: bool, grid_min: float,
             grid_max: float, grid_count: int) -> int:
    """Reference-figure curves: floors plus the two built-in detectors."""
    if panel not in ("a", "b"):
        raise ConfigError(f"panel must be 'a' or 'b', got {panel!r}")
    grid = frequency_grid(grid_min, grid_max, grid_count)
    p_det = OptomechParams(**FIG2_DETUNED)
    p_lock = OptomechParams(**FIG2_LOCKING[panel])
    policy = "optimize-force" if panel == "a" else "optimize-displacement"
    detuned = sweep_curve(p_det, grid, "detuned")
    locking = sweep_curve(p_lock, grid, "locking", policy)
    if panel == "a":
        sql, uql = detuned.sql_f, detuned.uql_f
        det_vals, lock_vals = detuned.s_f, locking.s_f
        quantity = "force sensitivity"
    else:
        sql, uql = detuned.sql_q, detuned.uql_q
        det_vals, lock_vals = detuned.s_q, locking.s_q
        quantity = "displacement sensitivity"

    lines = [FIG2_HEADER]
    for i, w in enumerate(grid):
        lines.append(",".join(_fmt(v) for v in
                              (w, sql[i], uql[i], det_vals[i], lock_vals[i])))
    out_path = resolve_out(out or f"fig2_{panel}.csv")
    _write_lines(out_path, lines)
    print(f"wrote {out_path}")
    if svg:
        svg_path = out_path.with_suffix(".svg")
        write_log_plot(
            svg_path, grid,
            [("SQL", "#888888", sql), ("UQL", "#2ca02c", uql),
             ("detuned", "#1f77b4", det_vals), ("locking", "#d62728", lock_vals)],
            title=f"{quantity} (panel {panel})",
            x_label="omega", y_label=quantity,
        )
        print(f"wrote {svg_path}")
    return EXIT_OK


def run_bounds(samples: int, seed: int, probes: int = 10, scale: float = 1.0,
               inject=()) -> tuple[list[str], int]:
    """Certify the optimization inequalities on sampled physical models.

    Returns (report lines, exit code). Models from `inject` replace the
    sampler; any injected model failing the positivity check is rejected and
    turns the run into a configuration error.
    """
    if not inject and samples < 1:
        raise ConfigError(f"samples must be >= 1, got {samples}")
    if probes < 1:
        raise ConfigError(f"probes must be >= 1, got {probes}")
    rng = np.random.default_rng(seed)
    lines = [
        "bounds certification",
        f"samples: {len(inject) if inject else samples}",
        f"probes per model: {probes}",
        f"seed: {seed}",
        f"scale: {scale}",
        f"tolerance: {BOUNDS_TOLERANCE}",
    ]
    n_chain = n_dominance = n_floor = n_rejected = 0
    for k in range(len(inject) if inject else samples):
        if inject:
            model = inject[k]
            if not is_physical(model):
                lines.append(f"rejected: {model!r} fails positivity")
                n_rejected += 1
                continue
        else:
            model = sample_physical_noise(rng, scale)
        a, b, c = bound_coefficients(model)
        s = model.s_yy + model.s_zz
        if c - (a * a + (abs(b) + s / 2.0) ** 2) < -BOUNDS_TOLERANCE:
            lines.append(f"violation[chain]: model={model!r}")
            n_chain += 1
        chi = complex(rng.normal(), rng.normal())
        bound = analytic_optimum_bound(model, chi)
        if bound - abs(chi.imag) < -BOUNDS_TOLERANCE:
            lines.append(f"violation[floor]: model={model!r} chi={chi!r}")
            n_floor += 1
        for _ in range(probes):
            g = 10.0 ** rng.uniform(-2.0, 2.0)
            lam = complex(rng.normal(), rng.normal())
            added = added_noise_spectrum(LoopGains(g, lam), model, chi)
            if added - bound < -BOUNDS_TOLERANCE:
                lines.append(
                    f"violation[dominance]: model={model!r} chi={chi!r} g={g!r} lam={lam!r}"
                )
                n_dominance += 1
    lines += [
        f"chain violations: {n_chain}",
        f"dominance violations: {n_dominance}",
        f"floor violations: {n_floor}",
        f"rejected models: {n_rejected}",
    ]
    if n_rejected:
        lines.append("result: REJECTED-INPUT")
        return lines, EXIT_CONFIG
    if n_chain or n_dominance or n_floor:
        lines.append("result: FAIL")
        return lines, EXIT_VIOLATION
    lines.append("result: PASS")
    return lines, EXIT_OK


def cmd_bounds(samples: int, seed: int, probes: int, scale: float,
               out: str | None) -> int:
    lines, code = run_bounds(samples, seed, probes, scale)
    if out:
        path = resolve_out(out)
        _write_lines(path, lines)
        print(f"wrote {path}")
    else:
        for line in lines:
            print(line)
    return code


def cmd_stability(cfg: RunConfig) -> int:
    """Print drift-matrix eigenvalues and the stability verdict."""
    params = _params_from(cfg)
    if cfg.model == "locking":
        if cfg.lambda_policy in ("optimize-force", "optimize-displacement"):
            print("stability: not applicable (frequency-dependent feedback)")
            return EXIT_OK
        lam = 0j if cfg.lambda_policy == "off" else complex(cfg.lambda_re, cfg.lambda_im)
        if lam.imag != 0:
            print("stability: not applicable (complex feedback transfer)")
            return EXIT_OK
        model = build_locking_model(params, lam)
    else:
        model = build_detuned_model(params)
    eigs = sorted(np.linalg.eigvals(model.a), key=lambda z: (z.real, z.imag))
    for z in eigs:
        print(f"eigenvalue: {z.real:+.12e} {z.imag:+.12e}j")
    verdict = stability(model.a)
    print(f"verdict: {'stable' if verdict else 'unstable'}")
    return EXIT_OK if verdict else EXIT_UNSTABLE


def _add_param_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat JSON config file")
    parser.add_argument("--model", choices=("detuned", "locking"))
    parser.add_argument("--omega-m", type=float, dest="omega_m")
    parser.add_argument("--gamma-m", type=float, dest="gamma_m")
    parser.add_argument("--gamma-c", type=float, dest="gamma_c")
    parser.add_argument("--detuning", type=float)
    parser.add_argument("--g", type=float)
    parser.add_argument("--g-ctrl", type=float, dest="g_ctrl")
    parser.add_argument("--phi", type=float)
    parser.add_argument("--theta", type=float)
    parser.add_argument("--n-th", type=float, dest="n_th")
    parser.add_argument("--include-mech-noise", action=argparse.BooleanOptionalAction,
                        default=None, dest="include_mech_noise")
    parser.add_argument("--lambda-policy", choices=LAMBDA_POLICIES, dest="lambda_policy")
    parser.add_argument("--lambda-re", type=float, dest="lambda_re")
    parser.add_argument("--lambda-im", type=float, dest="lambda_im")


def _add_grid_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid-min", type=float, dest="grid_min")
    parser.add_argument("--grid-max", type=float, dest="grid_max")
    parser.add_argument("--grid-count", type=int, dest="grid_count")
    parser.add_argument("--grid-scale", choices=("log", "linear"), dest="grid_scale")


def _overrides(args: argparse.Namespace) -> dict:
    return {
        name: getattr(args, name)
        for name in _CONFIG_FIELDS
        if hasattr(args, name) and getattr(args, name) is not None
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detlim",
        description="Sensitivity sweeps and quantum-limit certification for "
                    "linear optomechanical detectors with feedback",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="sensitivity spectra over a frequency grid")
    _add_param_args(p_sweep)
    _add_grid_args(p_sweep)
    p_sweep.add_argument("--out")

    p_fig2 = sub.add_parser("fig2", help="reference-figure curves (built-in parameters)")
    p_fig2.add_argument("--panel", choices=("a", "b"), required=True)
    p_fig2.add_argument("--out")
    p_fig2.add_argument("--svg", action="store_true")
    p_fig2.add_argument("--grid-min", type=float, default=1e-2, dest="grid_min")
    p_fig2.add_argument("--grid-max", type=float, default=10.0, dest="grid_max")
    p_fig2.add_argument("--grid-count", type=int, default=400, dest="grid_count")

    p_bounds = sub.add_parser("bounds", help="certify the quantum-limit inequalities")
    p_bounds.add_argument("--config", help="flat JSON config file")
    p_bounds.add_argument("--samples", type=int)
    p_bounds.add_argument("--seed", type=int)
    p_bounds.add_argument("--probes", type=int)
    p_bounds.add_argument("--scale", type=float, default=1.0)
    p_bounds.add_argument("--out")

    p_stab = sub.add_parser("stability", help="drift-matrix eigenvalues and verdict")
    _add_param_args(p_stab)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            return cmd_sweep(load_config(args.config, _overrides(args)))
        if args.command == "fig2":
            return cmd_fig2(args.panel, args.out, args.svg,
                            args.grid_min, args.grid_max, args.grid_count)
        if args.command == "bounds":
            cfg = load_config(args.config, _overrides(args))
            return cmd_bounds(cfg.samples, cfg.seed, cfg.probes, args.scale, args.out)
        if args.command == "stability":
            return cmd_stability(load_config(args.config, _overrides(args)))
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
