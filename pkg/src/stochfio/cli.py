"""Command-line interface.

Commands (all driven by a JSON config file, see README):

* ``verify``    - run phase / amplitude admissibility checks
* ``apply``     - apply a configured operator to a test function on a grid
* ``transport`` - transport solver u(x, t) = u0(gamma(x, t))
* ``halfwave``  - half-wave parametrix exp(i t c(x) P(D)) u0
* ``wave``      - two-branch wave evolution at speed c
* ``mc``        - Monte Carlo mean of the random-speed wave field
* ``converge``  - frequency-truncation convergence study

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(tolerance not reached, or a flow left its validity regime), 4 a
requested check failed.  Outputs embed a manifest with a SHA-256 of the
config; reruns with the same config and seed are byte-identical once
the manifest's ``timing`` entry is dropped.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields as dataclass_fields

import numpy as np

from .applications import (
    RegimeError,
    halfwave_solve,
    make_speed,
    regime_horizon,
    transport_solve,
    wave_solve,
)
from .io import (
    SCHEMA_VERSION,
    ConfigError,
    dump_json,
    field_to_dict,
    load_config,
    make_manifest,
    stats_to_dict,
    write_field_csv,
)
from .jets import SmoothMap, VarLayout, builtin_map
from .oscillatory import (
    FioOperator,
    QuadratureConfig,
    ToleranceError,
    convergence_study,
)
from .regularizer import CutoffChi, check_coefficient_symbol_bounds
from .stochastic import (
    TruncatedSpeedModel,
    expected_wave_analytic,
    mc_wave_estimate,
)
from .symbol_spaces import (
    Amplitude,
    PhaseFunction,
    check_alpha_membership,
    check_homogeneity,
    seminorm_q,
)

__all__ = ["main"]


class _CheckFailed(Exception):
    """A verification-style command found a violated criterion."""


# ---------------------------------------------------------------------------
# config parsing


def _require(cfg: dict, key: str, command: str):
    if key not in cfg:
        raise ConfigError(f"'{command}' requires a {key!r} entry in the config")
    return cfg[key]


def build_speed(spec) -> SmoothMap:
    """Speed from a number or a ``{"kind": ..., ...}`` object."""
    if isinstance(spec, (int, float)):
        return make_speed("constant", value=float(spec))
    if not isinstance(spec, dict):
        raise ConfigError("speed must be a number or an object with 'kind'")
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind is None:
        raise ConfigError("speed object needs a 'kind' entry")
    try:
        if kind == "trig_field":
            spec["terms"] = [tuple(term) for term in spec.get("terms", [])]
        return make_speed(kind, **spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad speed spec (kind {kind!r}): {exc}") from exc


def build_map(spec, what: str = "map") -> SmoothMap:
    """Smooth map from a ``{"family": ..., ...}`` object.

    ``product`` / ``sum`` / ``scaled`` nest recursively through their
    ``factors`` / ``terms`` / ``inner`` entries; ``scaled_norm_phase``
    accepts a number or speed object for its ``speed``.
    """
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"{what} spec must be an object with a 'family' key")
    spec = dict(spec)
    family = spec.pop("family")
    try:
        if family == "constant" and "layout" in spec:
            spec["layout"] = VarLayout(*(int(v) for v in spec["layout"]))
        elif family == "product":
            spec["factors"] = [build_map(s, what) for s in spec.get("factors", [])]
        elif family == "sum":
            spec["terms"] = [build_map(s, what) for s in spec.get("terms", [])]
        elif family == "scaled":
            spec["inner"] = build_map(_require(spec, "inner", family), what)
        elif family == "scaled_norm_phase":
            speed = spec.get("speed", 1.0)
            if isinstance(speed, dict):
                spec["speed"] = build_speed(speed)
        elif family == "trig_polynomial":
            spec["terms"] = [tuple(term) for term in spec.get("terms", [])]
        return builtin_map(family, **spec)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad {what} spec (family {family!r}): {exc}") from exc


def build_phase(cfg: dict, command: str) -> PhaseFunction:
    return PhaseFunction(build_map(_require(cfg, "phase", command), "phase"))


def build_amplitude(cfg: dict, command: str) -> Amplitude:
    spec = _require(cfg, "amplitude", command)
    if not isinstance(spec, dict):
        raise ConfigError("amplitude must be an object")
    spec = dict(spec)
    d = float(spec.pop("d", 0.0))
    rho = float(spec.pop("rho", 1.0))
    delta = float(spec.pop("delta", 0.0))
    try:
        return Amplitude(build_map(spec, "amplitude"), d=d, rho=rho, delta=delta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_test_function(cfg: dict, command: str, key: str = "test_function") -> SmoothMap:
    return build_map(_require(cfg, key, command), key)


def build_grid(cfg: dict, command: str) -> np.ndarray:
    spec = _require(cfg, "grid", command)
    if not isinstance(spec, dict):
        raise ConfigError("grid must be an object with lo / hi / n")
    try:
        lo, hi, n = float(spec["lo"]), float(spec["hi"]), int(spec["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"grid needs numeric lo / hi and integer n: {exc}") from exc
    if n < 1 or not hi > lo:
        raise ConfigError("grid needs n >= 1 and hi > lo")
    return np.linspace(lo, hi, n)


def build_quadrature(cfg: dict, workers=None) -> QuadratureConfig:
    spec = dict(cfg.get("quadrature", {}))
    known = {f.name for f in dataclass_fields(QuadratureConfig)}
    unknown = set(spec) - known
    if unknown:
        raise ConfigError(f"unknown quadrature options: {sorted(unknown)}")
    if workers is not None:
        spec["workers"] = int(workers)
    try:
        return QuadratureConfig(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad quadrature options: {exc}") from exc


def build_time(cfg: dict, command: str) -> float:
    t = _require(cfg, "time", command)
    if not isinstance(t, (int, float)):
        raise ConfigError("time must be a number")
    return float(t)


# ---------------------------------------------------------------------------
# output


def _emit(args, payload: dict, field=None) -> None:
    if args.format == "csv":
        if field is None:
            raise ConfigError(f"command {args.command!r} has no grid field; "
                              "use --format json")
        if not args.out:
            raise ConfigError("--out is required with --format csv")
        write_field_csv(field, args.out)
        dump_json(payload, args.out + ".manifest.json")
    else:
        text = dump_json(payload, args.out)
        if args.out is None:
            sys.stdout.write(text)


def _field_payload(command: str, cfg: dict, field) -> tuple:
    fdict = field_to_dict(field)
    timing = fdict.pop("timing", None)
    meta = fdict.get("meta", {})
    manifest = make_manifest(command, cfg, extra={
        "kappa": meta.get("kappa"),
        "nodes": meta.get("nodes"),
        "xi_radius": meta.get("xi_radius"),
    })
    if timing:
        manifest["timing"] = timing
    return {"manifest": manifest, "field": fdict}, manifest


# ---------------------------------------------------------------------------
# commands


def cmd_verify(cfg: dict, args) -> int:
    phase = build_phase(cfg, "verify")
    options = cfg.get("verify", {})
    alpha = float(options.get("alpha", 0.25))
    checks: dict = {}

    hom = check_homogeneity(phase)
    checks["homogeneity"] = {"passed": hom.passed,
                             "max_residual": hom.max_residual}
    mem = check_alpha_membership(phase, alpha)
    checks["membership"] = {"passed": mem.passed, "alpha": alpha,
                            "min_x_side": mem.min_x_side,
                            "min_y_side": mem.min_y_side}
    if hom.passed and mem.passed:
        coeff = check_coefficient_symbol_bounds(phase, CutoffChi())
        checks["coefficient_bounds"] = {"passed": coeff.passed,
                                        "max_misfit": coeff.max_misfit,
                                        "skipped": coeff.skipped}
    else:
        checks["coefficient_bounds"] = {
            "passed": False,
            "note": "skipped: phase failed homogeneity or nondegeneracy",
        }

    if "amplitude" in cfg:
        amp = build_amplitude(cfg, "verify")
        report = seminorm_q(amp, int(options.get("m", 2)))
        checks["amplitude_class"] = {"passed": not report.flagged,
                                     "seminorm": report.value,
                                     "note": report.note}

    passed = all(c["passed"] for c in checks.values())
    payload = {
        "manifest": make_manifest("verify", cfg),
        "checks": checks,
        "passed": passed,
    }
    _emit(args, payload)
    if not passed:
        failed = sorted(k for k, c in checks.items() if not c["passed"])
        raise _CheckFailed("violated: " + ", ".join(failed))
    return 0


def cmd_apply(cfg: dict, args) -> int:
    phase = build_phase(cfg, "apply")
    amplitude = build_amplitude(cfg, "apply")
    u = build_test_function(cfg, "apply")
    xs = build_grid(cfg, "apply")
    qc = build_quadrature(cfg, args.workers)
    operator_opts = cfg.get("operator", {})
    alpha = operator_opts.get("alpha", 0.25)
    alpha = None if alpha is None else float(alpha)
    try:
        op = FioOperator.build(phase, amplitude, alpha=alpha,
                               extra_decay=int(operator_opts.get("extra_decay", 0)),
                               config=qc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    field = op.apply(u, xs, workers=args.workers)
    payload, _ = _field_payload("apply", cfg, field)
    _emit(args, payload, field)
    return 0


def _solver_command(name: str, solver):
    def run(cfg: dict, args) -> int:
        speed = build_speed(_require(cfg, "speed", name))
        u0 = build_test_function(cfg, name)
        t = build_time(cfg, name)
        xs = build_grid(cfg, name)
        qc = build_quadrature(cfg, args.workers)
        field = solver(speed, u0, t, xs, config=qc, workers=args.workers)
        payload, _ = _field_payload(name, cfg, field)
        _emit(args, payload, field)
        return 0

    run.__name__ = f"cmd_{name}"
    return run


cmd_transport = _solver_command("transport", transport_solve)
cmd_halfwave = _solver_command("halfwave", halfwave_solve)
cmd_wave = _solver_command("wave", wave_solve)


def cmd_horizon(cfg: dict, args) -> int:
    speed = build_speed(_require(cfg, "speed", "horizon"))
    options = cfg.get("horizon", {})
    if "t_max" in options:
        t_max = float(options["t_max"])
    else:
        t_max = build_time(cfg, "horizon")
    result = regime_horizon(speed, float(options.get("x", 0.0)), t_max,
                            dt=float(options.get("dt", 0.05)),
                            threshold=float(options.get("threshold", 0.6)))
    payload = {"manifest": make_manifest("horizon", cfg), "horizon": result}
    _emit(args, payload)
    return 0


def cmd_mc(cfg: dict, args) -> int:
    model_spec = _require(cfg, "model", "mc")
    if not isinstance(model_spec, dict):
        raise ConfigError("model must be an object with c0 / s / alpha")
    try:
        model = TruncatedSpeedModel(float(model_spec["c0"]),
                                    float(model_spec["s"]),
                                    alpha=float(model_spec.get("alpha", 0.25)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad model spec: {exc}") from exc
    u0_spec = _require(cfg, "test_function", "mc")
    u0 = build_map(u0_spec, "test_function")
    t = build_time(cfg, "mc")
    xs = build_grid(cfg, "mc")
    mc_opts = cfg.get("mc", {})
    n_samples = int(mc_opts.get("n_samples", 256))
    base_seed = int(args.seed if args.seed is not None
                    else mc_opts.get("base_seed", 0))
    engine = mc_opts.get("engine", "translation")
    raw_pairs = mc_opts.get("autocov_pairs", [])
    if (not isinstance(raw_pairs, list)
            or any(not isinstance(p, list) or len(p) != 2 for p in raw_pairs)):
        raise ConfigError("mc.autocov_pairs must be a list of [p, q] index pairs")
    try:
        pairs = tuple((int(p), int(q)) for p, q in raw_pairs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad autocov_pairs entry: {exc}") from exc
    if any(not 0 <= p < xs.size or not 0 <= q < xs.size for p, q in pairs):
        raise ConfigError("autocov_pairs indices must lie inside the grid")
    qc = build_quadrature(cfg, args.workers) if engine == "fio" else None
    try:
        result = mc_wave_estimate(model, u0, t, xs, n_samples, base_seed,
                                  engine=engine, config=qc,
                                  autocov_pairs=pairs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    body = {
        "points": xs.tolist(),
        "stats": stats_to_dict(result.stats),
        "model": {"c0": model.c0, "s": model.s, "alpha": model.alpha,
                  "speed_bound": model.bound,
                  "truncation_mass": model.truncation_mass},
        "engine": engine,
        "base_seed": base_seed,
    }
    # gaussian initial data has a closed-form expectation; report the gap
    if (isinstance(u0_spec, dict) and u0_spec.get("family") == "gaussian_bump"
            and u0_spec.get("block", "y") == "y"):
        analytic = expected_wave_analytic(model, t, xs,
                                          u0_center=float(u0_spec.get("center", 0.0)),
                                          u0_width=float(u0_spec.get("width", 1.0)))
        deviation = np.abs(result.mean - analytic)
        body["analytic"] = {
            "values": analytic.tolist(),
            "max_deviation": float(deviation.max()),
            "max_std_error": float(np.max(result.std_error)),
        }
    payload = {"manifest": make_manifest("mc", cfg), "mc": body}
    _emit(args, payload)
    return 0


def cmd_converge(cfg: dict, args) -> int:
    phase = build_phase(cfg, "converge")
    amplitude = build_amplitude(cfg, "converge")
    u = build_test_function(cfg, "converge")
    xs = build_grid(cfg, "converge")
    options = cfg.get("converge", {})
    radii = tuple(float(r) for r in options.get("radii", (5.0, 10.0, 20.0, 40.0, 80.0)))
    if len(radii) < 3 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConfigError("converge radii must be at least three increasing values")
    m_tilde = int(options.get("m_tilde", 2))
    slack = float(options.get("slack", 2.0))
    qc = build_quadrature(cfg, args.workers)
    report = convergence_study(phase, amplitude, u, xs, m_tilde=m_tilde,
                               radii=radii, config=qc)
    respected = bool(report.bound_respected(slack=slack))
    payload = {
        "manifest": make_manifest("converge", cfg),
        "study": {
            "radii": list(report.radii),
            "errors": list(report.errors),
            "kappa": report.kappa,
            "guaranteed_rate": report.guaranteed_rate,
            "fitted_rate": report.fitted_rate,
            "slack": slack,
            "bound_respected": respected,
        },
    }
    _emit(args, payload)
    if not respected:
        raise _CheckFailed(
            f"observed truncation decay (fitted rate {report.fitted_rate:.2f}) "
            f"violates the guaranteed R^-{report.guaranteed_rate} envelope")
    return 0


_COMMANDS = {
    "verify": (cmd_verify, "check phase homogeneity, nondegeneracy and "
                           "amplitude class membership"),
    "apply": (cmd_apply, "apply a configured operator to a test function"),
    "transport": (cmd_transport, "transport solver via the flow phase"),
    "halfwave": (cmd_halfwave, "half-wave parametrix at time t"),
    "wave": (cmd_wave, "two-branch wave evolution at time t"),
    "horizon": (cmd_horizon, "largest time the half-wave flow stays in regime"),
    "mc": (cmd_mc, "Monte Carlo mean of the random-speed wave field"),
    "converge": (cmd_converge, "frequency-truncation convergence study"),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochfio",
        description="Oscillatory-integral operators with regularized "
                    "frequency integrals: checks, solvers and Monte Carlo.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True,
                        help=f"JSON config (schema_version {SCHEMA_VERSION})")
        sp.add_argument("--out", default=None,
                        help="output path (default: JSON to stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json",
                        help="output format; csv writes a manifest sidecar")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the Monte Carlo base seed")
        sp.add_argument("--workers", type=int, default=None,
                        help="quadrature worker processes")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command][0](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ToleranceError, RegimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except _CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
