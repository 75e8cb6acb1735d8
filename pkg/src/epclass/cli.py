"""Command-line interface.

Every subcommand prints one JSON document ``{"meta": ..., "result": ...}``
to stdout. Exit codes: 0 success, 1 usage or I/O error, 2 the loop touches a
degeneracy, 3 a cycle phase is not quantized.
"""
import argparse
import json
import os
import sys

from . import emit
from .berry import QUANTIZE_TOL, cycle_phases
from .classes import classify, enumerate_classes
from .eps import eps_csv, locate_eps, parse_region
from .errors import EpClassError, LoopTouchesEP, UnquantizedPhase
from .flow import DEFAULT_BZ_SAMPLES, LoopPath, default_plane, extract_permutation, load_loop, \
    track_loop
from .model import load_model
from .obc import KAPPA, gap_csv, gap_vs_parameter, obc_report
from .phase_diagram import DEFAULT_CELL_SAMPLES, Axis, scan

EXIT_OK, EXIT_IO, EXIT_CRITICAL, EXIT_UNQUANTIZED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which is reserved for critical loops
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def _parse_sets(items):
    out = {}
    for item in items or []:
        name, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects name=value, got {item!r}")
        try:
            out[name.strip()] = float(val)
        except ValueError:
            raise UsageError(f"--set {name}: {val!r} is not a number") from None
    return out


def _parse_loop(text, spec, fixed, samples):
    """``bz``, ``bz:n``, ``circle:c1,c2,r[,n]`` or a loop-file path."""
    if text is None or text == "bz":
        return LoopPath.bz(samples, fixed=fixed)
    kind, _, rest = text.partition(":")
    if kind == "bz" and rest:
        return LoopPath.bz(int(rest), fixed=fixed)
    if kind == "circle" and rest:
        nums = [float(x) for x in rest.split(",")]
        if len(nums) not in (3, 4):
            raise UsageError("circle loop needs c1,c2,r[,n]")
        n = int(nums[3]) if len(nums) == 4 else 128
        return LoopPath.circle(nums[:2], nums[2], n=n, params=default_plane(spec), fixed=fixed)
    return load_loop(text, spec=spec, fixed=fixed)


def _emit(meta, result, stream=None):
    (stream or sys.stdout).write(emit.dumps({"meta": meta, "result": result}))


def _write_outputs(args, csv=None, json_doc=None, svg=None):
    if getattr(args, "csv", None) and csv is not None:
        emit.write_text(args.csv, csv)
    if getattr(args, "json", None) and json_doc is not None:
        emit.write_text(args.json, emit.dumps(json_doc))
    if getattr(args, "svg", None) and svg is not None:
        if isinstance(svg, (tuple, list)):
            root, ext = os.path.splitext(args.svg)
            emit.write_text(args.svg, svg[0])
            for i, extra in enumerate(svg[1:], start=2):
                emit.write_text(f"{root}-{i}{ext or '.svg'}", extra)
        else:
            emit.write_text(args.svg, svg)


def cmd_classify(args):
    spec = load_model(args.model)
    fixed = spec.resolve(_parse_sets(args.set))
    loop = _parse_loop(args.loop, spec, fixed, args.samples)
    meta = emit.run_metadata(spec, command="classify", overrides=_parse_sets(args.set),
                             loop=loop.to_dict(), tol=args.tol, quant_tol=args.quant_tol)
    try:
        flow = track_loop(spec, loop, tol=args.tol)
    except LoopTouchesEP as exc:
        _emit(meta, {"status": "critical", "lam": exc.lam, "gap": exc.gap, "message": str(exc)})
        return EXIT_CRITICAL
    perm = extract_permutation(flow)
    phases = cycle_phases(flow, perm, args.quant_tol)
    result = {"permutation": list(perm.images), "cycles": [p.to_dict() for p in phases],
              "min_gap": flow.min_gap, "samples": len(flow.lams)}
    try:
        cls = classify(perm, phases)
    except UnquantizedPhase:
        result["status"] = "unquantized"
        _emit(meta, result)
        return EXIT_UNQUANTIZED
    result.update(status="ok", signature=str(cls))
    _emit(meta, result)
    return EXIT_OK


def cmd_loop(args):
    spec = load_model(args.model)
    fixed = spec.resolve(_parse_sets(args.set))
    loop = _parse_loop(args.loop, spec, fixed, args.samples)
    meta = emit.run_metadata(spec, command="loop", overrides=_parse_sets(args.set),
                             loop=loop.to_dict(), tol=args.tol)
    try:
        flow = track_loop(spec, loop, tol=args.tol)
    except LoopTouchesEP as exc:
        _emit(meta, {"status": "critical", "lam": exc.lam, "gap": exc.gap, "message": str(exc)})
        return EXIT_CRITICAL
    perm = extract_permutation(flow)
    rows = [(lam, i, v.real, v.imag)
            for lam, vals in zip(flow.lams, flow.values) for i, v in enumerate(vals)]
    result = {"status": "ok", "permutation": list(perm.images), "min_gap": flow.min_gap,
              "samples": len(flow.lams), "refined": flow.refined,
              "start": flow.values[0].tolist(), "end": flow.values[-1].tolist()}
    _write_outputs(args, csv=emit.csv_text(["lam", "strand", "re_E", "im_E"], rows),
                   json_doc={"meta": meta, "result": {**result, "lams": flow.lams,
                                                      "values": flow.values}})
    _emit(meta, result)
    return EXIT_OK


def cmd_phase_diagram(args):
    spec = load_model(args.model)
    if len(args.axis) != 2:
        raise UsageError("phase-diagram needs exactly two --axis options")
    axes = tuple(Axis.parse(a) for a in args.axis)
    fixed = _parse_sets(args.set)
    diagram = scan(spec, axes, fixed=fixed, samples=args.samples, tol=args.tol,
                   workers=args.workers)
    counts = {}
    for row in diagram.labels:
        for lab in row:
            counts[lab] = counts.get(lab, 0) + 1
    _write_outputs(args, csv=diagram.to_csv(), json_doc=diagram.to_dict(), svg=diagram.to_svg())
    _emit(diagram.meta, {"counts": dict(sorted(counts.items())),
                         "boundaries": len(diagram.boundaries),
                         "labels": diagram.distinct_labels})
    return EXIT_OK


def cmd_locate_eps(args):
    spec = load_model(args.model)
    region = parse_region(args.region)
    try:
        g1, g2 = (int(x) for x in args.grid.lower().replace("x", ",").split(","))
    except ValueError:
        raise UsageError("--grid expects n1,n2 or n1xn2") from None
    fixed = _parse_sets(args.set)
    eps = locate_eps(spec, region, grid=(g1, g2), fixed=fixed, tol=args.tol)
    meta = emit.run_metadata(spec, command="locate-eps", region=region, grid=[g1, g2],
                             overrides=fixed, tol=args.tol)
    result = {"count": len(eps), "eps": [e.to_dict() for e in eps]}
    _write_outputs(args, csv=eps_csv(eps), json_doc={"meta": meta, "result": result})
    _emit(meta, result)
    return EXIT_OK


def cmd_obc(args):
    spec = load_model(args.model)
    fixed = _parse_sets(args.set)
    if args.axis:
        axis = Axis.parse(args.axis)
        values, gaps, at = gap_vs_parameter(spec, args.cells, axis, fixed=fixed, kappa=args.kappa,
                                            workers=args.workers)
        meta = emit.run_metadata(spec, command="obc", cells=args.cells, overrides=fixed,
                                 axis=axis.to_dict(), kappa=args.kappa)
        result = {"argmin": at, "min_gap": float(gaps.min()),
                  "sweep": [[v, g] for v, g in zip(values, gaps)]}
        _write_outputs(args, csv=gap_csv(axis.param, values, gaps),
                       json_doc={"meta": meta, "result": result})
        _emit(meta, result)
        return EXIT_OK
    rep = obc_report(spec, args.cells, fixed, kappa=args.kappa)
    meta = emit.run_metadata(spec, command="obc", cells=args.cells, overrides=fixed,
                             kappa=args.kappa)
    full = rep.to_dict()
    _write_outputs(args, csv=rep.to_csv(), json_doc={"meta": meta, "result": full},
                   svg=rep.to_svg())
    summary = {k: full[k] for k in ("n_cells", "ordering", "gap", "midgap", "max_abs_im",
                                    "bulk_median_rigidity")}
    summary["midgap_rigidity"] = [float(rep.rigidities[i]) for i in rep.midgap]
    summary["midgap_edge_weight"] = [float(rep.edge_weight[i]) for i in rep.midgap]
    _emit(meta, summary)
    return EXIT_OK


def cmd_enumerate(args):
    classes = enumerate_classes(args.n)
    meta = emit.run_metadata(None, command="enumerate", n=args.n, rule="ParityOnly")
    _emit(meta, {"n": args.n, "count": len(classes), "classes": [str(c) for c in classes]})
    return EXIT_OK


def _default_workers():
    try:
        return max(1, int(os.environ.get("EPCLASS_WORKERS", "1")))
    except ValueError:
        return 1


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--workers", type=int, default=_default_workers(),
                        help="worker processes (default: $EPCLASS_WORKERS or 1)")

    model = _Parser(add_help=False)
    model.add_argument("--model", required=True, help="built-in name or model JSON path")
    model.add_argument("--set", action="append", metavar="NAME=VALUE",
                       help="override a model parameter (repeatable)")

    out = _Parser(add_help=False)
    out.add_argument("--csv", metavar="PATH")
    out.add_argument("--json", metavar="PATH")
    out.add_argument("--svg", metavar="PATH")

    p = _Parser(prog="epclass", description="Classify closed loops of non-Hermitian band models "
                "by eigenstate exchange and Berry phase.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", parents=[common, model],
                       help="exceptional class of one closed loop")
    c.add_argument("--loop", help="bz, bz:N, circle:C1,C2,R[,N] or loop JSON path")
    c.add_argument("--samples", type=int, default=DEFAULT_BZ_SAMPLES)
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--quant-tol", type=float, default=QUANTIZE_TOL)
    c.set_defaults(func=cmd_classify)

    lp = sub.add_parser("loop", parents=[common, model, out], help="track a loop, dump strands")
    lp.add_argument("--loop")
    lp.add_argument("--samples", type=int, default=DEFAULT_BZ_SAMPLES)
    lp.add_argument("--tol", type=float, default=1e-8)
    lp.set_defaults(func=cmd_loop)

    d = sub.add_parser("phase-diagram", parents=[common, model, out],
                       help="classify the BZ loop on a 2-D grid")
    d.add_argument("--axis", action="append", default=[], metavar="NAME=FROM:TO:N")
    d.add_argument("--samples", type=int, default=DEFAULT_CELL_SAMPLES)
    d.add_argument("--tol", type=float, default=1e-8)
    d.set_defaults(func=cmd_phase_diagram)

    e = sub.add_parser("locate-eps", parents=[common, model, out],
                       help="find eigenvalue degeneracies in a 2-D box")
    e.add_argument("--region", required=True, metavar="A=LO:HI,B=LO:HI")
    e.add_argument("--grid", default="64,64")
    e.add_argument("--tol", type=float, default=1e-13)
    e.set_defaults(func=cmd_locate_eps)

    o = sub.add_parser("obc", parents=[common, model, out], help="open-chain diagnostics")
    o.add_argument("--cells", type=int, default=40)
    o.add_argument("--kappa", type=float, default=KAPPA)
    o.add_argument("--axis", metavar="NAME=FROM:TO:N", help="sweep the bulk gap instead")
    o.set_defaults(func=cmd_obc)

    n = sub.add_parser("enumerate", parents=[common], help="list admissible classes")
    n.add_argument("--n", type=int, required=True)
    n.set_defaults(func=cmd_enumerate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnquantizedPhase as exc:
        print(f"epclass: {exc}", file=sys.stderr)
        return EXIT_UNQUANTIZED
    except LoopTouchesEP as exc:
        print(f"epclass: {exc}", file=sys.stderr)
        return EXIT_CRITICAL
    except (UsageError, EpClassError, ValueError, KeyError, OSError,
            json.JSONDecodeError) as exc:
        print(f"epclass: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
