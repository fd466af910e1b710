"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 inconclusive
certificate.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path


from . import catalog
from .catalog import ProblemSpec
from .certifier import (
    CertifyConfig,
    ConclusionKind,
    certify_gs,
    default_flat_radii,
    flatness_probe,
)
from .errors import InputError, NumericalError
from .field import HYPERBOLIC_TOL, classify_singularity, inner_product_positivity, SamplingSpec
from .flow import Direction, Orbit, Termination, fit_sink_rate, integrate
from .inequality import verify_gronwall_along_orbit
from .report import (
    certificate_dict,
    dumps,
    fit_dict,
    flatness_dict,
    positivity_dict,
    ratio_sup_csv,
    spectrum_dict,
)

EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_INCONCLUSIVE = 4


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def _infer_dim(*texts) -> int:
    indices = [int(m) for t in texts if t for m in re.findall(r"x(\d+)", t)]
    return max(indices, default=1)


def resolve_spec(args, need_field: bool = True) -> ProblemSpec:
    data = {}
    if getattr(args, "catalog", None):
        data = catalog.get(args.catalog).spec.to_dict()
    elif args.spec:
        data = ProblemSpec.load(args.spec).to_dict()

    if getattr(args, "field", None):
        data["field_components"] = [t.strip() for t in args.field.split(",")]
    if getattr(args, "f", None):
        data["scalar_function"] = args.f
    if getattr(args, "c", None) is not None:
        data["constant_c"] = args.c
    if getattr(args, "f_origin_value", None) is not None:
        data["f_origin_value"] = args.f_origin_value
    if args.radius is not None:
        data["radius"] = args.radius
    if args.seed is not None:
        data["seed"] = args.seed
    if getattr(args, "dim", None) is not None:
        data["dimension"] = args.dim

    comps = data.get("field_components")
    if "dimension" not in data:
        data["dimension"] = len(comps) if comps else _infer_dim(data.get("scalar_function"))
    if not comps:
        if need_field:
            raise InputError("a vector field is required (--field, --spec or --catalog)")
        data["field_components"] = [f"x{i + 1}" for i in range(data["dimension"])]
    return ProblemSpec.from_dict(data).validate()


def _emit(obj, args):
    print(dumps(obj, args.json_indent))


def _problem_dict(spec: ProblemSpec) -> dict:
    return {
        "dimension": spec.dimension,
        "field": list(spec.field_components),
        "f": spec.scalar_function,
        "f_origin_value": spec.f_origin_value,
        "radius": spec.radius,
        "c": spec.constant_c,
        "seed": spec.seed,
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    spec = resolve_spec(args)
    h = spec.field()
    point = _floats(args.point) if args.point else [0.0] * spec.dimension
    if len(point) != spec.dimension:
        raise InputError(f"--point needs {spec.dimension} coordinates")
    spectrum = classify_singularity(h, point, args.tol_hyperbolic)
    inner = inner_product_positivity(h, spec.radius, SamplingSpec(seed=spec.seed))
    _emit({"problem": _problem_dict(spec), "spectrum": spectrum_dict(spectrum),
           "inner_product": positivity_dict(inner)}, args)
    return 0


def cmd_flow(args) -> int:
    spec = resolve_spec(args)
    h = spec.field()
    x0 = _floats(args.x0)
    if len(x0) != spec.dimension:
        raise InputError(f"--x0 needs {spec.dimension} coordinates")
    overrides = {}
    if args.t is not None:
        overrides["t_max"] = args.t
    if args.method:
        overrides["method"] = args.method
    if args.step is not None:
        overrides["step"] = args.step
    try:
        config = spec.integrator_config(**overrides)
    except TypeError as exc:
        raise InputError(str(exc)) from None
    orbit = integrate(h, x0, config, Direction(args.direction.capitalize()))
    if args.output:
        Path(args.output).write_text(orbit.to_csv())
    fit, note = None, ""
    if orbit.termination is Termination.CONVERGED:
        try:
            fit = fit_dict(fit_sink_rate(orbit, None, config.convergence_radius))
        except NumericalError as exc:
            note = f"{type(exc).__name__}: {exc}"
    _emit({
        "problem": _problem_dict(spec),
        "direction": orbit.direction,
        "termination": orbit.termination,
        "samples": len(orbit),
        "final_time": orbit.final_time,
        "final_state": orbit.final_state,
        "target": orbit.target,
        "fit": fit,
        "fit_note": note,
    }, args)
    return 0


def cmd_certify(args) -> int:
    spec = resolve_spec(args)
    config = CertifyConfig(c=spec.constant_c, tol_hyperbolic=args.tol_hyperbolic,
                           flat_tol=args.flat_tol, seed=spec.seed, rhs=args.rhs,
                           witness=not args.no_witness,
                           integrator=spec.integrator_config())
    cert = certify_gs(spec.field(), spec.function(), spec.radius, config)
    problem = _problem_dict(spec)
    problem["rhs"] = args.rhs
    if args.catalog:
        problem["catalog"] = args.catalog
    _emit(certificate_dict(cert, problem), args)
    if args.emit_plot_data:
        out = Path(args.emit_plot_data)
        out.mkdir(parents=True, exist_ok=True)
        (out / "flatness.csv").write_text(cert.hypothesis_flatness.to_csv())
        (out / "ratio_sup.csv").write_text(ratio_sup_csv(cert.hypothesis_constant.estimate))
        witness = cert.witness.to_csv() if cert.witness is not None else "t,lhs,rhs\n"
        (out / "witness.csv").write_text(witness)
    if cert.conclusion.kind is ConclusionKind.INCONCLUSIVE:
        return EXIT_INCONCLUSIVE
    return 0


def cmd_flatness(args) -> int:
    if args.catalog_f:
        entry = catalog.get(args.catalog_f).spec
        f_text, origin, dim = entry.scalar_function, entry.f_origin_value, entry.dimension
    elif args.f:
        f_text, origin = args.f, args.f_origin_value
        dim = args.dim or _infer_dim(args.f)
    else:
        raise InputError("flatness needs --f or --catalog-f")
    from .expr import parse

    f = parse(f_text, dim, origin)
    radius = args.radius if args.radius is not None else 1.0
    radii = _floats(args.radii) if args.radii else default_flat_radii(radius)
    seed = args.seed if args.seed is not None else 42
    report = flatness_probe(f, radii, args.kmax, args.directions, seed, args.flat_tol)
    if args.output:
        Path(args.output).write_text(report.to_csv())
    body = {"function": f_text, "dimension": dim, "seed": seed}
    body.update(flatness_dict(report))
    _emit(body, args)
    return 0


def cmd_gronwall(args) -> int:
    spec = resolve_spec(args)
    f = spec.function()
    c = spec.constant_c
    if c is None:
        raise InputError("gronwall needs a constant (--c, or constant_c in the --spec file)")
    if args.orbit:
        try:
            orbit = Orbit.from_csv(Path(args.orbit).read_text())
        except (OSError, ValueError, KeyError, IndexError) as exc:
            raise InputError(f"cannot read orbit {args.orbit}: {exc}") from None
        if orbit.dimension != spec.dimension:
            raise InputError("orbit dimension does not match the problem")
    else:
        if not args.x0:
            raise InputError("gronwall needs --x0 or --orbit")
        x0 = _floats(args.x0)
        overrides = {"t_max": args.t} if args.t is not None else {}
        orbit = integrate(spec.field(), x0, spec.integrator_config(**overrides),
                          Direction(args.direction.capitalize()))
    report = verify_gronwall_along_orbit(orbit, f, c, args.slack)
    if args.output:
        Path(args.output).write_text(report.to_csv())
    body = report.summary()
    body.update({"slack": report.slack, "samples": len(report.times),
                 "termination": orbit.termination, "problem": _problem_dict(spec)})
    _emit(body, args)
    return 0


def cmd_catalog(args) -> int:
    if args.action == "list":
        for name in catalog.names():
            print(f"{name}\t{catalog.CATALOG[name].expected_conclusion}")
        return 0
    if not args.name:
        raise InputError("catalog show needs an entry name")
    entry = catalog.get(args.name)
    _emit({"name": entry.name, "expected_conclusion": entry.expected_conclusion,
           "note": entry.note, "spec": entry.spec.to_dict()}, args)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="problem spec JSON file; inline flags override it")
    common.add_argument("--seed", type=int, help="sampler seed (default 42)")
    common.add_argument("--tol-hyperbolic", type=float, default=HYPERBOLIC_TOL)
    common.add_argument("--flat-tol", type=float, default=1e-12)
    common.add_argument("--radius", type=float, help="radius of the disc U")
    common.add_argument("--json-indent", type=int, default=2)

    problem = argparse.ArgumentParser(add_help=False)
    problem.add_argument("--field", help="comma-separated components, e.g. 'x1,x2'")
    problem.add_argument("--dim", type=int)
    problem.add_argument("--f", help="scalar function expression")
    problem.add_argument("--f-origin-value", type=float,
                         help="value of f at the origin (removable singularity)")
    problem.add_argument("--c", type=float, help="inequality constant")
    problem.add_argument("--catalog", help="start from a catalog entry")

    parser = argparse.ArgumentParser(prog="gscert", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common, problem],
                       help="classify the singularity and check <h(x),x> > 0")
    p.add_argument("--point", help="singular point to classify (default: origin)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("flow", parents=[common, problem], help="integrate an orbit")
    p.add_argument("--x0", required=True)
    p.add_argument("--t", type=float, help="final time (t_max)")
    p.add_argument("--direction", choices=["forward", "backward"], default="forward")
    p.add_argument("--method", choices=["AdaptiveRK45", "FixedRK4"])
    p.add_argument("--step", type=float, help="step size for FixedRK4")
    p.add_argument("--output", help="orbit CSV path")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("certify", parents=[common, problem], help="build a certificate")
    p.add_argument("--rhs", choices=["f", "norm"], default="f")
    p.add_argument("--emit-plot-data", metavar="DIR")
    p.add_argument("--no-witness", action="store_true")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("flatness", parents=[common], help="probe |f(x)|/|x|^k near 0")
    p.add_argument("--f")
    p.add_argument("--dim", type=int)
    p.add_argument("--f-origin-value", type=float)
    p.add_argument("--catalog-f", help="take f from a catalog entry")
    p.add_argument("--radii", help="comma-separated decreasing radii")
    p.add_argument("--kmax", type=int, default=8)
    p.add_argument("--directions", type=int)
    p.add_argument("--output", help="CSV path (radius,k,ratio)")
    p.set_defaults(func=cmd_flatness)

    p = sub.add_parser("gronwall", parents=[common, problem],
                       help="check |f(phi_t)| <= |f(phi_0)| e^(ct) along an orbit")
    p.add_argument("--x0")
    p.add_argument("--t", type=float)
    p.add_argument("--direction", choices=["forward", "backward"], default="forward")
    p.add_argument("--orbit", help="orbit CSV to check instead of integrating")
    p.add_argument("--slack", type=float, default=1e-12, help="absolute tolerance on observed - bound")
    p.add_argument("--output", help="CSV path (t,observed,bound)")
    p.set_defaults(func=cmd_gronwall)

    p = sub.add_parser("catalog", parents=[common], help="list or show catalog entries")
    p.add_argument("action", choices=["list", "show"])
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_catalog)
    return parser


# options whose values may legitimately start with '-' (e.g. --field "-x1")
_EXPRESSION_OPTIONS = {"--field", "--f", "--x0", "--point", "--radii"}


def _attach_values(argv: list) -> list:
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _EXPRESSION_OPTIONS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_attach_values(argv))
    try:
        return args.func(args)
    except InputError as exc:
        print(f"gscert: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"gscert: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
