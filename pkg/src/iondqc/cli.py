"""Command line: benchmark tables, calibration, tomography, gate-level runs, remote server.

Exit codes: 0 ok, 2 bad flags, 3 transport failure, 4 contract violation,
5 output could not be written.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import gatelevel as gl
from . import netapi
from . import protocol as pr
from . import tomography as tomo
from .errors import ContractViolation, ServerContractError, TransportError

EXIT_OK, EXIT_FLAGS, EXIT_TRANSPORT, EXIT_CONTRACT, EXIT_OUTPUT = 0, 2, 3, 4, 5
CSV_HEADER = ("pauli", "chi", "shots", "raw", "calibrated", "stderr", "theory")

log = logging.getLogger("iondqc")


class OutputError(OSError):
    pass


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


# -- bench rows ------------------------------------------------------------------

def bench_row(label: str, chi: Optional[float], result: pr.EstimateResult, theory: Optional[float]) -> dict:
    return {
        "pauli": label,
        "chi": _fmt(chi),
        "shots": str(result.shots),
        "raw": _fmt(result.raw_mean),
        "calibrated": _fmt(result.calibrated),
        "stderr": _fmt(result.stderr),
        "theory": _fmt(theory),
    }


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def describe(spec: pr.UnitarySpec) -> tuple[str, Optional[float], float]:
    """CSV label, chi and |T(U)|^2 for a spec (reporting only)."""
    if spec.kind == "identity":
        label, chi = "I", 0.0
    elif spec.kind == "pauli_rotation":
        label, chi = f"sigma{spec.params['axis']}", spec.params["chi"]
    elif spec.kind == "euler":
        label, chi = "euler", spec.params["chi"]
    else:
        label, chi = spec.kind, None
    return label, chi, gl.direct_trace(spec.matrix())


def _load_lambda_hat(path) -> Optional[float]:
    if path is None:
        return None
    return float(json.loads(Path(path).read_text())["lambda_hat"])


def run_bench(shots: int, lam: float, seed: int, schedule: str, lambda_hat: Optional[float] = None,
              realization: str = "matrix") -> list[dict]:
    noise = pr.NoiseConfig(lam)
    rows = []
    for idx, b in enumerate(pr.benchmark_unitaries()):
        res = pr.estimate_trace(pr.LocalServer(b.spec, realization), shots, noise, seed, schedule, idx)
        if lambda_hat is not None:
            res = res.with_calibration(lambda_hat)
        rows.append(bench_row(b.label, b.chi, res, b.theory))
    return rows


def run_single(server: pr.ServerHandle, shots: int, lam: float, seed: int, schedule: str,
               lambda_hat: Optional[float], report_spec: Optional[pr.UnitarySpec]) -> list[dict]:
    res = pr.estimate_trace(server, shots, pr.NoiseConfig(lam), seed, schedule, 0)
    if lambda_hat is not None:
        res = res.with_calibration(lambda_hat)
    if report_spec is not None:
        label, chi, theory = describe(report_spec)
    else:
        label, chi, theory = "remote", None, None
    return [bench_row(label, chi, res, theory)]


# -- plots -------------------------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def bench_svg(rows: list[dict], path, lambda_hat: Optional[float] = None) -> None:
    plt = _pyplot()
    by_axis = {a: [r for r in rows if r["pauli"] in ("I", f"sigma{a}")] for a in (1, 2, 3)}
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4), sharey=True)
    for ax, (a, rs) in zip(axes, by_axis.items()):
        chis = np.array([float(r["chi"]) for r in rs])
        key = "calibrated" if lambda_hat else "raw"
        vals = np.array([float(r[key]) for r in rs])
        errs = np.array([float(r["stderr"]) for r in rs]) / (lambda_hat or 1.0)
        ax.bar(chis / math.pi, vals, width=0.12, yerr=errs, color="tab:blue", capsize=2)
        fine = np.linspace(0, math.pi, 200)
        ax.plot(fine / math.pi, np.cos(fine / 2) ** 2, color="black", lw=1)
        ax.set_title(f"sigma_{a}")
        ax.set_xlabel("chi / pi")
    axes[0].set_ylabel("|T(U)|^2 estimate")
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)


def tomography_svg(table: tomo.TruthTable, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.4, 5.4))
    pops = table.populations
    for i in range(8):
        for o in range(8):
            p = pops[o, i]
            if p > 0:
                ax.add_patch(plt.Circle((i, 7 - o), 0.45 * math.sqrt(p), color="tab:blue", alpha=0.8))
    for key, phase in table.phases.items():
        out, inp = key[1:4], key[-4:-1]
        i, o = tomo.LABELS.index(inp), tomo.LABELS.index(out)
        ax.annotate("", xy=(i + 0.4 * math.cos(phase), 7 - o + 0.4 * math.sin(phase)), xytext=(i, 7 - o),
                    arrowprops=dict(arrowstyle="->", color="tab:red", lw=1.2))
    ax.set_xticks(range(8), tomo.LABELS, rotation=90)
    ax.set_yticks(range(8), tomo.LABELS[::-1])
    ax.set_xlabel("input")
    ax.set_ylabel("output")
    ax.set_xlim(-0.6, 7.6)
    ax.set_ylim(-0.6, 7.6)
    ax.set_aspect("equal")
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)


# -- commands ----------------------------------------------------------------------

def _emit_csv(rows, out_csv) -> None:
    text = rows_to_csv(rows)
    if out_csv:
        _write_text(out_csv, text)
    else:
        sys.stdout.write(text)


def cmd_bench(args) -> int:
    lambda_hat = _load_lambda_hat(args.calibration)
    if args.unitary_file:
        spec, realization = pr.load_unitary_spec(args.unitary_file)
        rows = run_single(pr.LocalServer(spec, realization), args.shots, args.lam, args.seed,
                          args.schedule, lambda_hat, spec)
    else:
        rows = run_bench(args.shots, args.lam, args.seed, args.schedule, lambda_hat, args.realization)
    _emit_csv(rows, args.out_csv)
    if args.out_svg:
        bench_svg(rows, args.out_svg, lambda_hat)
    return EXIT_OK


def cmd_run_remote(args) -> int:
    lambda_hat = _load_lambda_hat(args.calibration)
    report = pr.load_unitary_spec(args.unitary_file)[0] if args.unitary_file else None
    address = netapi.parse_address(args.address) if args.address else netapi.default_address()
    with netapi.remote_server_handle(address, args.timeout) as server:
        rows = run_single(server, args.shots, args.lam, args.seed, args.schedule, lambda_hat, report)
    _emit_csv(rows, args.out_csv)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cal = pr.calibrate(args.shots, pr.NoiseConfig(args.lam), args.seed)
    doc = cal.to_dict()
    doc["lambda_true"] = args.lam
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        _write_text(args.out, text)
    print(f"lambda_hat = {cal.lambda_hat:.4f} +- {cal.half_width:.4f} (95%, {cal.shots} shots)")
    return EXIT_OK


def cmd_tomography(args) -> int:
    table = tomo.full_truth_table(args.shots_per_cell, tomo.TomographyNoise(args.lambda_f), args.seed,
                                  workers=args.workers)
    fid = tomo.classical_fidelity(table)
    doc = table.to_dict()
    doc["fidelity"] = fid.to_dict()
    text = json.dumps(doc, indent=2) + "\n"
    if args.out_json:
        _write_text(args.out_json, text)
    else:
        sys.stdout.write(text)
    if args.out_svg:
        tomography_svg(table, args.out_svg)
    print(f"classical fidelity = {fid.classical_fidelity:.4f} +- {fid.half_width:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_gate_bench(args) -> int:
    unitaries = []
    for f in args.unitary_file or []:
        spec, _ = pr.load_unitary_spec(f)
        unitaries.append((Path(f).name, spec.matrix()))
    rng = np.random.default_rng(args.seed)
    for k in range(args.random):
        unitaries.append((f"haar{k}", gl.random_unitary(2 ** args.n, rng)))
    if not unitaries:
        unitaries.append(("identity", np.eye(2 ** args.n)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("unitary", "n", "pairs", "shots_per_pair", "estimate", "stderr", "oracle"))
    for idx, (name, u) in enumerate(unitaries):
        if u.shape[0] != 2 ** args.n:
            raise ContractViolation(f"{name} acts on {u.shape[0]} levels, expected {2 ** args.n}")
        res = gl.modular_dqc1_gate_level(u, args.pairs, args.shots, args.seed + idx)
        w.writerow((name, args.n, args.pairs, args.shots, _fmt(res.raw_mean), _fmt(res.stderr),
                    _fmt(gl.direct_trace(u))))
    _emit_text(buf.getvalue(), args.out_csv)
    return EXIT_OK


def _emit_text(text, path) -> None:
    if path:
        _write_text(path, text)
    else:
        sys.stdout.write(text)


def cmd_serve(args) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    address = netapi.parse_address(args.address) if args.address else netapi.default_address()
    netapi.serve(args.unitary_file, address)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iondqc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def bench_flags(sp):
        sp.add_argument("--shots", type=int, default=4000)
        sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--schedule", choices=(pr.ENUMERATED, pr.UNIFORM), default=pr.ENUMERATED)
        sp.add_argument("--calibration", help="calibration report from 'iondqc calibrate'")
        sp.add_argument("--out-csv")

    b = sub.add_parser("bench", help="estimate |T(U)|^2 for the 19 benchmark rotations")
    bench_flags(b)
    b.add_argument("--unitary-file", help="run a single server spec instead of the benchmark set")
    b.add_argument("--realization", choices=("matrix", "pulses"), default="matrix")
    b.add_argument("--out-svg")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("run-remote", help="bench against a server started with 'iondqc serve'")
    bench_flags(r)
    r.add_argument("--address", help=f"host:port (default ${netapi.ADDRESS_ENV} or "
                                     f"{netapi.DEFAULT_HOST}:{netapi.DEFAULT_PORT})")
    r.add_argument("--unitary-file", help="spec used only to label the CSV row and theory column")
    r.add_argument("--timeout", type=float, default=10.0)
    r.set_defaults(func=cmd_run_remote)

    c = sub.add_parser("calibrate", help="estimate lambda with the identity server")
    c.add_argument("--shots", type=int, default=10000)
    c.add_argument("--lambda", dest="lam", type=float, default=1.0)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)

    t = sub.add_parser("tomography", help="truth table and phases of the controlled swap")
    t.add_argument("--shots-per-cell", type=int, default=1000)
    t.add_argument("--lambda-f", type=float, default=1.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--out-json")
    t.add_argument("--out-svg")
    t.set_defaults(func=cmd_tomography)

    g = sub.add_parser("gate-bench", help="gate-level n-qubit estimator against the direct trace")
    g.add_argument("--n", type=int, default=2)
    g.add_argument("--unitary-file", action="append")
    g.add_argument("--random", type=int, default=0, help="also run this many Haar-random unitaries")
    g.add_argument("--pairs", type=int, default=4000)
    g.add_argument("--shots", type=int, default=1, help="shots per (l, m) pair")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-csv")
    g.set_defaults(func=cmd_gate_bench)

    s = sub.add_parser("serve", help="serve a unitary spec over TCP")
    s.add_argument("--unitary-file", required=True)
    s.add_argument("--address")
    s.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_FLAGS
    try:
        return args.func(args)
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except (ContractViolation, ServerContractError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FLAGS


def entry() -> None:
    sys.exit(main())
