"""Command-line front end.

Exit codes: 0 when every requested check passes, 1 when a check fails,
2 on usage or I/O errors.  Results go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import families as fam
from .bundle import (curvature_F11, curvature_F20, ks_tensor,
                     pseudo_curvature_G11)
from .errors import FibrekitError, NotRelativelyHolomorphic, UnknownFamily
from .simpson import entrywise_conjugate, simpson_flat_to_higgs, simpson_higgs_to_flat
from .transport import BasePath, horizontal_lift, monodromy
from .verify import SuiteConfig, report_serialize, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
MONODROMY_TOL = 1e-6
SIMPSON_TOL = 1e-12


class UsageError(Exception):
    pass


# --- parsing helpers -------------------------------------------------------

def _complex_entry(x) -> complex:
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, (int, float)):
        return complex(x)
    raise UsageError(f"complex numbers are [re, im] pairs, got {x!r}")


def parse_point(text: str) -> tuple[np.ndarray, np.ndarray]:
    """``{"s": [[re, im], ...], "z": [[re, im], ...]}`` to a chart point."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--point is not valid JSON: {exc}") from None
    if not isinstance(data, dict) or "s" not in data or "z" not in data:
        raise UsageError('--point needs an object with "s" and "z"')
    s = np.array([_complex_entry(x) for x in data["s"]], dtype=complex)
    z = np.array([_complex_entry(x) for x in data["z"]], dtype=complex)
    return s, z


def parse_complex_list(text: str) -> np.ndarray:
    """Comma-separated Python complex literals, e.g. ``0.5`` or ``1+2j,0.3``."""
    try:
        return np.array([complex(part.strip().replace(" ", "")) for part in text.split(",")], dtype=complex)
    except ValueError:
        raise UsageError(f"cannot parse complex value(s) {text!r}") from None


def _encode(a) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [_encode(x) for x in a]


def _load(family_id: str) -> fam.Family:
    try:
        return fam.load_family(family_id)
    except UnknownFamily as exc:
        raise UsageError(str(exc)) from None


def _emit(payload: dict) -> None:
    # serialize fully before writing so a failure never leaves partial JSON
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    sys.stdout.write(text + "\n")


def _seed(flag: Optional[int]) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("GEOM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"GEOM_SEED must be an integer, got {env!r}") from None


# --- subcommands -----------------------------------------------------------

def cmd_verify(args) -> int:
    _load(args.family)
    report = run_suite(SuiteConfig(args.family, samples=args.samples, seed=_seed(args.seed)))
    text = report_serialize(report)
    if args.json:
        try:
            with open(args.json, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            raise UsageError(f"cannot write {args.json}: {exc}") from None
        _emit({"family": report.family, "ok": report.ok, "report": args.json,
               "failed": [r.check_id for r in report.records if not r.as_expected]})
    else:
        sys.stdout.write(text + "\n")
    for r in report.records:
        if not r.as_expected:
            print(f"unexpected result: {r.check_id} defect={r.max_defect:.3e} tol={r.tolerance:.1e}"
                  f" expect={r.expect}{' (' + r.error + ')' if r.error else ''}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_curvature(args) -> int:
    family = _load(args.family)
    point = parse_point(args.point)
    chart = family.connection.chart
    if len(point[0]) != chart.n or len(point[1]) != chart.m:
        raise UsageError(f"family {family.id} needs {chart.n} base and {chart.m} fiber coordinates")
    try:
        if args.kind == "f11":
            tensor = curvature_F11(family.connection, family.dbar, point)
        elif args.kind == "f20":
            tensor = curvature_F20(family.connection, point)
        elif args.kind == "ks":
            tensor = ks_tensor(family.connection, point)
        else:
            if family.higgs is None:
                raise UsageError(f"family {family.id} has no Higgs field")
            tensor = pseudo_curvature_G11(family.higgs, family.dbar, point)
    except NotRelativelyHolomorphic as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit({"family": family.id, "kind": args.kind, "signature": list(tensor.signature),
           "values": _encode(tensor.values), "max_abs": tensor.max_abs()})
    return EXIT_OK


def _path_from_arg(family: fam.Family, spec: Optional[str]) -> BasePath:
    if spec is None:
        return next(iter(family.paths.values()))
    if spec in family.paths:
        return family.paths[spec]
    try:
        data = json.loads(spec)
    except json.JSONDecodeError:
        raise UsageError(f"unknown path {spec!r}; known: {', '.join(family.paths)}") from None
    if not isinstance(data, list) or len(data) < 2:
        raise UsageError("a JSON path is a list of at least two base points")
    pts = []
    for p in data:
        entries = p if isinstance(p, list) and p and isinstance(p[0], list) else [p]
        pts.append([_complex_entry(x) for x in entries])
    return BasePath.polyline(np.array(pts, dtype=complex))


def cmd_transport(args) -> int:
    family = _load(args.family)
    path = _path_from_arg(family, args.path)
    m = family.connection.chart.m
    z0 = parse_complex_list(args.z0) if args.z0 is not None else family.default_point[1]
    if len(z0) != m:
        raise UsageError(f"--z0 needs {m} components")
    res = horizontal_lift(family.connection, path, z0, step=args.step)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"{part}_z{a + 1}" for a in range(m) for part in ("re", "im")])
    for t, z in zip(res.times, res.states):
        writer.writerow([repr(float(t))] + [repr(float(v)) for x in z for v in (x.real, x.imag)])
    if args.csv:
        try:
            with open(args.csv, "w", encoding="utf-8") as fh:
                fh.write(buf.getvalue())
        except OSError as exc:
            raise UsageError(f"cannot write {args.csv}: {exc}") from None
        _emit({"family": family.id, "status": res.status.value, "endpoint": _encode(res.endpoint),
               "blowup_time": res.blowup_time, "error_estimate": res.error_estimate, "csv": args.csv})
    else:
        sys.stdout.write(buf.getvalue())
    if not res.completed:
        extra = f" at t*={res.blowup_time:.6f}" if res.blowup_time is not None else ""
        print(f"transport did not complete: {res.status.value}{extra}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_monodromy(args) -> int:
    family = _load(args.family)
    if family.kind != "flat-quotient":
        raise UsageError("monodromy runs on flat-quotient:lambda=L families")
    if args.loops < 1:
        raise UsageError("--loops must be positive")
    lam = family.parameters["lambda"]
    samples = parse_complex_list(args.samples)
    images = monodromy(family.connection, family.paths["loop"], samples, loops=args.loops)[:, 0]
    expected = samples / lam ** args.loops
    defect = float(np.max(np.abs(images - expected)))
    ok = defect <= MONODROMY_TOL
    _emit({"family": family.id, "loops": args.loops,
           "samples": [{"z0": _encode(z), "image": _encode(w), "expected": _encode(e)}
                       for z, w, e in zip(samples, images, expected)],
           "max_defect": format(defect, ".16e"), "tolerance": MONODROMY_TOL, "ok": ok})
    return EXIT_OK if ok else EXIT_FAIL


def _abelian_columns(point: fam.AbelianFamilyPoint, field) -> np.ndarray:
    cols = [field(point, i, j) for i, j in fam.base_pairs(point.k)]
    return np.stack([np.concatenate([v.q, v.p]) for v in cols], axis=1)


def cmd_simpson(args) -> int:
    family = _load(args.family)
    if family.kind != "abelian":
        raise UsageError("simpson runs on abelian:k=K families")
    s, z = parse_point(args.point)
    k = int(family.parameters["k"])
    if len(s) != fam.base_dimension(k) or len(z) != 2 * k:
        raise UsageError(f"abelian:k={k} needs {fam.base_dimension(k)} base and {2 * k} fiber coordinates")
    try:
        point = fam.AbelianFamilyPoint.from_chart(s, z)
    except ValueError as exc:
        raise UsageError(f"point is not in the family: {exc}") from None
    gm = _abelian_columns(point, fam.gauss_manin_lift)
    chern = gm + _abelian_columns(point, fam.symplectic_connection_abelian)
    theta_ks = _abelian_columns(point, fam.kodaira_spencer_higgs)
    dbar0 = np.zeros_like(gm)
    if args.direction == "flat-to-higgs":
        theta, dbar = simpson_flat_to_higgs(gm, chern, entrywise_conjugate, dbar0, (s, z))
        back_dbar, back_partial = simpson_higgs_to_flat(dbar, theta, chern, entrywise_conjugate, (s, z))
        checks = {"theta_vs_kodaira_spencer": float(np.max(np.abs(theta - theta_ks))),
                  "round_trip": float(max(np.max(np.abs(back_dbar - dbar0)), np.max(np.abs(back_partial - gm))))}
        out = {"theta": _encode(theta), "dbar": _encode(dbar)}
    else:
        dbar, partial = simpson_higgs_to_flat(dbar0, theta_ks, chern, entrywise_conjugate, (s, z))
        back_theta, back_dbar = simpson_flat_to_higgs(partial, chern, entrywise_conjugate, dbar, (s, z))
        checks = {"partial_vs_gauss_manin": float(np.max(np.abs(partial - gm))),
                  "round_trip": float(max(np.max(np.abs(back_theta - theta_ks)),
                                          np.max(np.abs(back_dbar - dbar0))))}
        out = {"dbar": _encode(dbar), "partial": _encode(partial)}
    scale = max(1.0, float(np.max(np.abs(chern))))
    ok = all(v <= SIMPSON_TOL * scale for v in checks.values())
    _emit({"family": family.id, "direction": args.direction, **out,
           "checks": {k_: format(v, ".16e") for k_, v in checks.items()}, "ok": ok})
    return EXIT_OK if ok else EXIT_FAIL


# --- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fibrekit", description="Numerical checks on complex fiber bundles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the verification suite of a family")
    p.add_argument("--family", required=True)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=None, help="defaults to $GEOM_SEED, then 0")
    p.add_argument("--json", metavar="PATH", help="write the full report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("curvature", help="evaluate a tensor at one chart point")
    p.add_argument("--family", required=True)
    p.add_argument("--point", required=True, help='JSON {"s": [[re, im], ...], "z": [...]}')
    p.add_argument("--kind", required=True, choices=("f11", "f20", "g11", "ks"))
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("transport", help="horizontal lift of a base path")
    p.add_argument("--family", required=True)
    p.add_argument("--path", help="a path id of the family or a JSON list of base points")
    p.add_argument("--z0", help="initial fiber point, comma-separated complex literals")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--csv", metavar="PATH", help="write the trajectory here instead of stdout")
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("monodromy", help="monodromy of the flat-quotient family")
    p.add_argument("--family", required=True)
    p.add_argument("--loops", type=int, default=1)
    p.add_argument("--samples", default="1,0.5+0.5j,-2j", help="fiber points, comma-separated")
    p.set_defaults(func=cmd_monodromy)

    p = sub.add_parser("simpson", help="plain Simpson transform on the abelian family")
    p.add_argument("--family", required=True)
    p.add_argument("--direction", required=True, choices=("flat-to-higgs", "higgs-to-flat"))
    p.add_argument("--point", required=True)
    p.set_defaults(func=cmd_simpson)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    if getattr(args, "samples", None) is not None and isinstance(args.samples, int) and args.samples < 1:
        print("error: --samples must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FibrekitError as exc:
        print(f"check failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
