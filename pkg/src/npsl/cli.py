"""Batch command-line interface.

Every pipeline is a subcommand; runs are reproducible from a JSON config
(``--config``) whose keys mirror the flags, with flags taking precedence.
Each output file embeds the SHA-256 digest of the resolved configuration.
Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np

from . import acceptance
from .assembly import AssemblyError, KernelKind, assemble
from .geometry import (GeometryError, assumption_a_margin, build_surface,
                       circle, ellipse2d, ellipsoid, node_set, smooth_star2d,
                       sphere, surface_point)
from .helmholtz import (HelmholtzError, MediumParams, drift_slope,
                        plane_wave, scattered_field)
from .localization import (LocalizationError, localization_ratio,
                           qe_variance)
from .spectrum import (SpectralBand, SpectralError, fractional_D_power,
                       symmetrized_eigensystem, weyl_diagnostic)
from .symbol_flow import (CotangentPoint, FlowError, F_alpha, SymbolError,
                          VarietyDegeneracyError, integrate_flow,
                          variety_sample, weighted_variety_volume)

NUMERICAL_ERRORS = (SpectralError, FlowError, SymbolError, AssemblyError,
                    VarietyDegeneracyError, LocalizationError, HelmholtzError,
                    np.linalg.LinAlgError)


class ValidationError(ValueError):
    pass


def parse_surface(text: str):
    """Parse 'kind:p1,p2,...' surface descriptors."""
    kind, _, params = text.partition(":")
    vals = [float(v) for v in params.split(",")] if params else []
    kind = kind.lower()
    try:
        if kind == "sphere":
            return sphere(*(vals or [1.0]))
        if kind in ("ellipsoid", "spheroid"):
            return ellipsoid(*vals)
        if kind == "circle":
            return circle(*(vals or [1.0]))
        if kind == "ellipse":
            return ellipse2d(*vals)
        if kind == "star":
            return smooth_star2d(vals)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for surface {text!r}: {exc}")
    raise ValidationError(f"unknown surface kind {kind!r}")


def _parse_point(text: str):
    if "," in text:
        return np.array([float(v) for v in text.split(",")])
    return text


def _config_digest(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()).hexdigest()


def _write_csv(path, header, rows, digest):
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_sha256={digest}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["%.17g" % v if isinstance(v, float) else v
                             for v in row])


def _write_json(path, payload, digest):
    payload = dict(payload)
    payload["config_sha256"] = digest
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _eigensystem(surface, resolution):
    nodes = node_set(surface, resolution)
    kstar = assemble(surface, nodes, KernelKind("laplace_npstar"))
    s = assemble(surface, nodes, KernelKind("laplace_single"))
    return symmetrized_eigensystem(kstar, s), nodes, s


# ---------------------------------------------------------------------------
# subcommand implementations (each takes resolved args, returns summary str)


def _cmd_surface_info(args, digest):
    spec = parse_surface(args.surface)
    surface = build_surface(spec)
    nodes = node_set(surface, args.resolution)
    info = {
        "surface": spec.as_config(),
        "node_count": len(nodes),
        "mean_spacing": nodes.spacing,
        "area": float(np.sum(nodes.weights)),
    }
    if spec.ambient_dim == 3:
        info["assumption_a_margin"] = assumption_a_margin(surface, nodes=nodes)
    if args.out:
        _write_json(args.out, info, digest)
    return json.dumps(info)


def _cmd_spectrum(args, digest):
    surface = build_surface(parse_surface(args.surface))
    es, _, _ = _eigensystem(surface, args.resolution)
    rows = [(int(i), float(lam), float(c))
            for i, (lam, c) in enumerate(zip(es.eigenvalues, es.weights))]
    _write_csv(args.out, ["index", "eigenvalue", "c_weight"], rows, digest)
    return f"n_eigenvalues={len(es)} lambda_0={es.eigenvalues[0]:.6g}"


def _cmd_weyl(args, digest):
    surface = build_surface(parse_surface(args.surface))
    es, _, _ = _eigensystem(surface, args.resolution)
    report = weyl_diagnostic(es, surface,
                             index_window=(args.window_lo, args.window_hi))
    payload = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
               for k, v in report.items()}
    if args.out:
        _write_json(args.out, payload, digest)
    return f"slope={report['slope']:.4f}"


def _cmd_flow(args, digest):
    surface = build_surface(parse_surface(args.surface))
    cp = surface_point(surface, _parse_point(args.point))
    xi = np.array([float(v) for v in args.xi.split(",")])
    traj = integrate_flow(surface, CotangentPoint(cp, xi), args.kind,
                          args.time, args.tol)
    rows = [( float(t), float(pt.base.u[0]), float(pt.base.u[1]),
              float(pt.xi[0]), float(pt.xi[1]), float(h))
            for t, pt, h in zip(traj.times, traj.states, traj.H_values)]
    _write_csv(args.out, ["t", "u1", "u2", "xi1", "xi2", "H"], rows, digest)
    return f"steps={len(traj.times)} relative_drift={traj.relative_drift:.3e}"


def _cmd_variety(args, digest):
    surface = build_surface(parse_surface(args.surface))
    cp = surface_point(surface, _parse_point(args.point))
    vs = variety_sample(surface.jet(cp), args.angular_res)
    vol = weighted_variety_volume(vs, args.alpha)
    if args.out:
        rows = list(zip(vs.angles.tolist(), vs.radii.tolist(),
                        vs.weights.tolist()))
        _write_csv(args.out, ["theta", "r", "weight"], rows, digest)
    print("%.17g" % vol)
    return f"V_alpha={vol:.8g}"


def _cmd_falpha(args, digest):
    kappas = [float(v) for v in args.kappas.split(",")]
    val = F_alpha(kappas, args.alpha, variant=args.variant,
                  angular_res=args.angular_res)
    print("%.17g" % val)
    return f"F_alpha={val:.8g}"


def _cmd_localize(args, digest):
    surface = build_surface(parse_surface(args.surface))
    es, nodes, s = _eigensystem(surface, args.resolution)
    band = SpectralBand(index_range=(args.band_lo,
                                     min(args.band_hi, len(es) - 1)))
    frac = fractional_D_power(s, args.alpha)
    p = surface_point(surface, _parse_point(args.p))
    q = surface_point(surface, _parse_point(args.q))
    report = localization_ratio(es, surface, surface.position(p),
                                surface.position(q), band, args.alpha,
                                args.delta, frac)
    payload = {
        "empirical_ratio": report.empirical_ratio,
        "predicted_ratio": report.predicted_ratio,
        "mass_p": report.mass_p,
        "mass_q": report.mass_q,
        "alpha": args.alpha,
        "delta": args.delta,
        "band": [args.band_lo, args.band_hi],
    }
    if args.out:
        _write_json(args.out, payload, digest)
    return (f"empirical_ratio={report.empirical_ratio:.4g} "
            f"predicted_ratio={report.predicted_ratio:.4g}")


def _cmd_qe_variance(args, digest):
    surface = build_surface(parse_surface(args.surface))
    es, nodes, s = _eigensystem(surface, args.resolution)
    band = SpectralBand(index_range=(args.band_lo,
                                     min(args.band_hi, len(es) - 1)))
    axis = {"x": 0, "y": 1, "z": 2}.get(args.observable)
    if axis is None:
        raise ValidationError("observable must be one of x, y, z")
    obs = nodes.positions[:, axis]
    result = qe_variance(es, band, obs, surface, s)
    payload = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
               for k, v in result.items()}
    if args.out:
        _write_json(args.out, payload, digest)
    return f"variance={result['variance']:.6e} m_pred={result['m_pred']:.3e}"


def _cmd_helmholtz_drift(args, digest):
    surface = build_surface(parse_surface(args.surface))
    nodes = node_set(surface, args.resolution)
    grid = np.geomspace(args.omega_lo, args.omega_hi, args.omega_count)
    slope, results = drift_slope(surface, nodes, args.target_lambda, grid,
                                 mu0=args.mu0, eps0=args.eps0,
                                 eps1=args.eps1)
    rows = [(float(r.omega), float(r.mu1.real), float(r.mu1.imag),
             float(r.drift), float(r.residual), int(r.iterations))
            for r in results]
    _write_csv(args.out, ["omega", "mu1_re", "mu1_im", "lambda_drift",
                          "residual", "iterations"], rows, digest)
    return f"slope={slope:.4f}"


def _cmd_scatter(args, digest):
    surface = build_surface(parse_surface(args.surface))
    nodes = node_set(surface, args.resolution)
    params = MediumParams(args.mu0, args.eps0,
                          complex(args.mu1_re, args.mu1_im), args.eps1,
                          args.omega)
    direction = np.array([float(v) for v in args.direction.split(",")])
    direction = direction / np.linalg.norm(direction)
    incident = plane_wave(params.k0 * direction)
    targets = np.array([[float(v) for v in part.split(",")]
                        for part in args.targets.split(";")])
    field = scattered_field(surface, nodes, params, incident, targets)
    rows = [(float(t[0]), float(t[1]), float(t[2]),
             float(np.real(v)), float(np.imag(v)))
            for t, v in zip(targets, field.values)]
    _write_csv(args.out, ["x", "y", "z", "re_u", "im_u"], rows, digest)
    return (f"max|u|={np.max(np.abs(field.values)):.6g} "
            f"transmission_error={field.transmission_error:.2e}")


def _cmd_selftest(args, digest):
    failures = 0
    for number, func in acceptance.ALL_CRITERIA:
        result = func()
        if result["passed"]:
            status = "PASS"
        elif number in acceptance.EXPECTED_UNMET:
            status = "FAIL (known limitation)"
        else:
            status = "FAIL"
            failures += 1
        print(f"criterion {number:2d}: {status} — {result['detail']}")
    if failures:
        raise SpectralError(f"{failures} acceptance criteria failed")
    return "selftest complete: no unexpected failures"


COMMANDS = {
    "surface-info": _cmd_surface_info,
    "spectrum": _cmd_spectrum,
    "weyl": _cmd_weyl,
    "flow": _cmd_flow,
    "variety": _cmd_variety,
    "falpha": _cmd_falpha,
    "localize": _cmd_localize,
    "qe-variance": _cmd_qe_variance,
    "helmholtz-drift": _cmd_helmholtz_drift,
    "scatter": _cmd_scatter,
    "selftest": _cmd_selftest,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="npsl", description="Neumann-Poincare spectral laboratory")
    parser.add_argument("--config", help="JSON config file; flags override")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/OpenMP parallelism "
                             "(fallback: NPSL_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **extra):
        p = sub.add_parser(name)
        p.add_argument("--surface", default="sphere:1")
        p.add_argument("--resolution", type=int, default=16)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        return p

    add("surface-info")
    p = add("spectrum")
    p.set_defaults(out="spectrum.csv")
    p = add("weyl")
    p.add_argument("--window-lo", type=int, default=20)
    p.add_argument("--window-hi", type=int, default=200)
    p = add("flow")
    p.add_argument("--point", default="equator")
    p.add_argument("--xi", default="1,0")
    p.add_argument("--kind", default="raw",
                   choices=("raw", "rho", "arctan"))
    p.add_argument("--time", type=float, default=10.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(out="trajectory.csv")
    p = add("variety")
    p.add_argument("--point", default="pole")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--angular-res", type=int, default=512)
    p = add("falpha")
    p.add_argument("--kappas", required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--variant", default="corrected",
                   choices=("paper", "corrected"))
    p.add_argument("--angular-res", type=int, default=512)
    p = add("localize")
    p.add_argument("--p", default="pole")
    p.add_argument("--q", default="equator")
    p.add_argument("--alpha", type=float, default=-0.5)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--band-lo", type=int, default=1)
    p.add_argument("--band-hi", type=int, default=50)
    p.add_argument("--band-count", type=int, default=None,
                   help="shorthand for --band-lo 1 --band-hi COUNT")
    p.set_defaults(out="localization.json")
    p = add("qe-variance")
    p.add_argument("--observable", default="z")
    p.add_argument("--band-lo", type=int, default=1)
    p.add_argument("--band-hi", type=int, default=50)
    p = add("helmholtz-drift")
    p.add_argument("--target-lambda", type=float, default=1.0 / 6.0)
    p.add_argument("--omega-lo", type=float, default=1e-3)
    p.add_argument("--omega-hi", type=float, default=1e-1)
    p.add_argument("--omega-count", type=int, default=6)
    p.add_argument("--mu0", type=float, default=1.0)
    p.add_argument("--eps0", type=float, default=1.0)
    p.add_argument("--eps1", type=float, default=1.0)
    p.set_defaults(out="drift.csv")
    p = add("scatter")
    p.add_argument("--omega", type=float, default=1e-2)
    p.add_argument("--mu0", type=float, default=1.0)
    p.add_argument("--eps0", type=float, default=1.0)
    p.add_argument("--mu1-re", type=float, default=2.0)
    p.add_argument("--mu1-im", type=float, default=0.0)
    p.add_argument("--eps1", type=float, default=1.0)
    p.add_argument("--direction", default="0,0,1")
    p.add_argument("--targets", default="3,0,0;0,3,0;0,0,3")
    p.set_defaults(out="field.csv")
    add("selftest")
    return parser


def _apply_config(parser, args, argv):
    """Overlay config-file values under explicit command-line flags."""
    with open(args.config) as fh:
        config = json.load(fh)
    known = {a.dest for a in parser._actions}
    for p in parser._subparsers._group_actions[0].choices.values():
        known |= {a.dest for a in p._actions}
    unknown = {k for k in config if k.replace("-", "_") not in known}
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    explicit = {tok.lstrip("-").replace("-", "_").split("=")[0]
                for tok in argv if tok.startswith("--")}
    for key, val in config.items():
        dest = key.replace("-", "_")
        if dest not in explicit:
            setattr(args, dest, val)
    return args


def run_command(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            args = _apply_config(parser, args, argv)
        if getattr(args, "band_count", None):
            args.band_lo, args.band_hi = 1, args.band_count
        threads = args.threads or int(os.environ.get("NPSL_THREADS", 0))
        np.random.seed(getattr(args, "seed", 0))
        resolved = {k: v for k, v in sorted(vars(args).items())
                    if k not in ("config", "threads", "out") and v is not None
                    and not callable(v)}
        digest = _config_digest(resolved)
        command = COMMANDS[args.command]
        if threads:
            import threadpoolctl
            with threadpoolctl.threadpool_limits(limits=threads):
                summary = command(args, digest)
        else:
            summary = command(args, digest)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, GeometryError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(summary)
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
