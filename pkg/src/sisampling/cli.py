"""Command-line front end.

    sisampling analyze <scenario> [--out DIR] [--json]
    sisampling reconstruct <scenario> [--seed N] [--force] [--coeffs random|zero] [--out DIR]
    sisampling verify <scenario> [--seed N] [--out DIR]

``<scenario>`` is a JSON file or the name of a shipped scenario
(classical, oversampled, averaging, rank_deficient, quincunx,
two_generators, vector). Exit codes: 0 consistent, 2 invariant
violation, 3 input or precondition error.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from .errors import NotLeftInvertible, SamplingError
from .gridfn import Grid
from .scenario import EXTRA, GOLDEN, golden_path, load_scenario
from .sispace import CoefficientArray, synthesize
from .reconstruction import reconstruct, take_samples
from .verify import analysis_block, reconstruction_error, verify_scenario, working_box

REPORT_SCHEMA = "sisampling-report v1"
EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 2, 3


def _plain(obj):
    """Recursively convert to JSON-native types (complex -> [re, im])."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_plain(obj.real), _plain(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def dumps(report):
    return json.dumps(_plain(report), sort_keys=True, indent=2) + "\n"


def _resolve(name):
    if not os.path.exists(name) and name in GOLDEN + EXTRA:
        return golden_path(name)
    return name


def _write(out, filename, text):
    if out is None:
        return
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, filename), "w") as fh:
        fh.write(text)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def summary_table(rows, file=None):
    file = sys.stdout if file is None else file
    rows = [(str(a), _fmt(b), _fmt(c), str(d)) for a, b, c, d in rows]
    head = ("item", "value", "reference", "status")
    widths = [max(len(r[i]) for r in rows + [head]) for i in range(4)]
    for r in [head] + rows:
        print("  ".join(x.ljust(w) for x, w in zip(r, widths)).rstrip(), file=file)


def cmd_analyze(sc, args):
    run = sc.build()
    report = {"schema": REPORT_SCHEMA, "command": "analyze", "scenario": sc.as_dict(), "analysis": analysis_block(run)}
    b, cl = run.bounds, run.classification
    rows = [
        ("A_G", b.A_G, "", ""),
        ("B_G", b.B_G, "", ""),
        ("refinement change", b.refined["relative_change"], sc.tolerances["refinement_tol"],
         "ok" if b.refined["accepted"] else "unresolved"),
        ("complete", cl.complete, "", ""),
        ("bessel bound B_G/m", cl.bessel_bound, "", ""),
        ("frame bounds", list(cl.frame_bounds) if cl.frame else "-", "", ""),
        ("verdict", cl.verdict, "", ""),
    ]
    return report, rows, EXIT_OK


def cmd_reconstruct(sc, args):
    run = sc.build()
    cl = run.classification
    if not cl.frame and not args.force:
        raise NotLeftInvertible(
            f"scenario '{sc.name}' is classified '{cl.verdict}' (A_G = {run.bounds.A_G:.3g}); "
            "no bounded dual exists; rerun with --force to observe the failure"
        )
    p = sc.params
    K = p["K_coeff"]
    if args.coeffs == "zero":
        coeffs = CoefficientArray.zeros(run.gens.N, run.gens.d, K)
    else:
        coeffs = CoefficientArray.random(run.rng("cli-reconstruct"), run.gens.N, run.gens.d, K)
    f = synthesize(run.gens, coeffs, resolution=p["space_resolution"])
    kernels = run.kernels(force=args.force)
    samples = take_samples(f, run.bank, run.lat, p["K_samp"], p["filter_resolution"])
    fhat = reconstruct(samples, kernels, run.lat)
    err = reconstruction_error(run, f, kernels)
    ok = err <= sc.tolerances["tol_reconstruct"]
    report = {
        "schema": REPORT_SCHEMA,
        "command": "reconstruct",
        "scenario": sc.as_dict(),
        "forced": bool(args.force),
        "verdict": cl.verdict,
        "coefficients": args.coeffs,
        "samples": len(samples.values),
        "samples_truncated": samples.truncated,
        "error": err,
        "error_kind": "relative" if coeffs.norm_sq() > 0 else "absolute",
        "passed": ok,
    }
    if args.out:
        box = working_box(f)
        os.makedirs(args.out, exist_ok=True)
        samples.to_csv(os.path.join(args.out, "samples.csv"))
        f.tabulate(_box_grid(box, p["space_resolution"])).to_csv(os.path.join(args.out, "f.csv"))
        fhat.tabulate(_box_grid(box, p["space_resolution"])).to_csv(os.path.join(args.out, "f_hat.csv"))
        for (j, q), S in sorted(kernels.kernels.items()):
            S.tabulate().to_csv(os.path.join(args.out, f"kernel_{j}_{q}.csv"))
    rows = [
        ("verdict", cl.verdict, "", "forced" if args.force else ""),
        ("samples", len(samples.values), "", ""),
        (f"{report['error_kind']} L2 error", err, sc.tolerances["tol_reconstruct"], "pass" if ok else "FAIL"),
    ]
    return report, rows, EXIT_OK if ok else EXIT_VIOLATION


def _box_grid(box, resolution):
    return Grid(tuple(int(v) for v in box[0]), tuple(int(v) for v in box[1]), resolution)


def cmd_verify(sc, args):
    run = sc.build()
    rep = verify_scenario(run)
    report = {"schema": REPORT_SCHEMA, "command": "verify", "scenario": sc.as_dict()}
    report.update(rep)
    rows = [(c["name"], c["value"], c["threshold"], "pass" if c["passed"] else "FAIL") for c in rep["checks"]]
    eq = rep["equivalence"]
    rows.append(("equivalence a/b/c/d", [eq["a_positive_lower_bound"], eq["b_stable_sampler"],
                                         eq["c_bounded_dual"], eq["d_reconstructs"]], "", ""))
    return report, rows, EXIT_OK if rep["passed"] else EXIT_VIOLATION


COMMANDS = {"analyze": cmd_analyze, "reconstruct": cmd_reconstruct, "verify": cmd_verify}


def build_parser():
    ap = argparse.ArgumentParser(prog="sisampling", description="Sampling and reconstruction in shift-invariant spaces.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("scenario", help="scenario JSON file or shipped scenario name")
        sp.add_argument("--out", help="directory for the JSON report and CSV exports")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--json", action="store_true", help="print the JSON report instead of the summary table")
        if name == "reconstruct":
            sp.add_argument("--force", action="store_true", help="reconstruct even without a bounded dual")
            sp.add_argument("--coeffs", choices=("random", "zero"), default="random")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(_resolve(args.scenario))
        if args.seed is not None:
            sc = sc.with_overrides(seed=args.seed)
        report, rows, code = COMMANDS[args.command](sc, args)
    except SamplingError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = dumps(report)
    _write(args.out, f"{args.command}.json", text)
    if args.json:
        sys.stdout.write(text)
    else:
        print(f"{args.command}: {sc.name}")
        summary_table(rows)
    return code


if __name__ == "__main__":
    sys.exit(main())
