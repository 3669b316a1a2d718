"""Command-line interface.

Subcommands: sweep, reconstruct, certify, emulate-ion, rank-scan, plot.
Exit codes: 0 success, 1 usage error, 2 input-format error, 3 solve did
not converge (reconstruct only).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys

import numpy as np

from . import formats, harness, plots, solver, states
from .sampling import MeasurementRecord
from .solver import SolverConfig, svt_solve

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FORMAT = 2
EXIT_NOT_CONVERGED = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; the documented code is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=float, default=5.0, help="trace-norm weight")
    p.add_argument(
        "--delta",
        type=float,
        default=None,
        help="constraint band; default 3x the largest reported stderr",
    )
    p.add_argument("--step", type=float, default=None, help="dual step (default 1.5/d)")
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--stop-tol", type=float, default=1e-7)
    p.add_argument(
        "--path", choices=("auto", "dense", "sparse"), default="auto",
        help="linear-algebra route (auto: sparse for hybrid records)",
    )


def _solver_config(args, record: MeasurementRecord) -> SolverConfig:
    delta = args.delta
    if delta is None:
        delta = 3.0 * float(np.max(record.stderr))
    return SolverConfig(
        tau=args.tau,
        delta_band=delta,
        step=args.step,
        max_iter=args.max_iter,
        stop_tol=args.stop_tol,
        path=args.path,
    )


def _cmd_sweep(args) -> int:
    try:
        cfg = harness.read_config(args.config)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ValueError as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    rows = list(harness.run_sweep(cfg))
    harness.write_rows_csv(rows, args.output, timing=args.timing)
    failed = sum(1 for r in rows if r.status != "ok")
    print(f"wrote {len(rows)} rows to {args.output}" + (f" ({failed} failed)" if failed else ""))
    if args.plot:
        plots.plot_sweep([dataclasses.asdict(r) for r in rows], args.plot)
        print(f"wrote {args.plot}")
    return EXIT_OK


def _load_record(path):
    try:
        return formats.read_mrec(path)
    except OSError as exc:
        print(f"cannot read record: {exc}", file=sys.stderr)
        return None
    except formats.FormatError as exc:
        print(f"bad MREC file: {exc}", file=sys.stderr)
        return None


def _cmd_reconstruct(args) -> int:
    record = _load_record(args.record)
    if record is None:
        return EXIT_FORMAT
    cfg = _solver_config(args, record)
    res = svt_solve(record, cfg)
    formats.write_dmat(res.sigma_state, args.output)
    audit = solver.residuals(res.sigma_state, record)
    report = {
        "n": record.scheme.n,
        "m": record.m,
        "scheme": record.scheme.kind,
        "noise": record.noise.tag(),
        "delta_band": cfg.delta_band,
        "converged": res.converged,
        "status": res.status,
        "iterations": res.iterations,
        "max_residual": res.max_residual,
        "max_audit_residual": float(np.max(np.abs(audit))),
        "wall_time_seconds": res.wall_time_seconds,
        "purity": states.purity(res.sigma_state),
        "top_eigenvalues": [float(x) for x in res.spectrum[:8]],
        "clipped_negative_mass": res.clipped_negative_mass,
        "output": str(args.output),
    }
    text = json.dumps(report, indent=2)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if args.plot:
        plots.plot_reconstruction(res, args.plot)
    if not res.converged:
        print(
            f"solver did not converge within {cfg.max_iter} iterations "
            f"(max residual {res.max_residual:.3e}); the measured set may be "
            "too small for the state's rank",
            file=sys.stderr,
        )
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_certify(args) -> int:
    record = _load_record(args.record)
    if record is None:
        return EXIT_FORMAT
    from . import certify as certify_mod

    top = None
    if args.solve:
        res = svt_solve(record, _solver_config(args, record))
        top = float(np.linalg.eigvalsh(res.sigma_state)[-1])
    try:
        cert = certify_mod.certificate(
            record, args.delta2, args.mu, top_eigenvalue=top
        )
    except ValueError as exc:
        print(f"cannot certify: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    text = json.dumps(dataclasses.asdict(cert), indent=2)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _cmd_emulate_ion(args) -> int:
    d = 1 << args.n
    profile = states.geometric_profile(d, args.top, args.top_mass, args.ratio)
    stderr = args.stderr if args.stderr is not None else 3.0 / d
    rows = []
    for i in range(args.seeds):
        row = harness.run_experimental_emulation(
            profile,
            args.fraction,
            stderr,
            args.r_approx,
            seed=args.seed + i,
            solver_cfg=SolverConfig(max_iter=args.max_iter, stop_tol=args.stop_tol),
        )
        fid = "failed" if row.fidelity is None else f"{row.fidelity:.4f}"
        print(f"seed {args.seed + i}: rank-{args.r_approx} fidelity {fid}")
        rows.append(row)
    if args.output:
        harness.write_rows_csv(rows, args.output, timing=args.timing)
        print(f"wrote {args.output}")
    good = [r.fidelity for r in rows if r.fidelity is not None]
    if good:
        print(f"mean fidelity over {len(good)} runs: {np.mean(good):.4f}")
    return EXIT_OK


def _cmd_rank_scan(args) -> int:
    try:
        cfg = harness.read_config(args.config)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ValueError as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    schedule = sorted(cfg.m_values)

    def source(m_value):
        rho = states.depolarize(
            states.random_rank_r_state(
                cfg.d, cfg.r, harness.child_rng(cfg.seed, 0, 0, harness.STAGE_STATE)
            ),
            cfg.gamma,
        )
        scheme = harness._draw_scheme(
            cfg, m_value, harness.child_rng(cfg.seed, m_value, 0, harness.STAGE_SCHEME)
        )
        return harness.measure(
            rho, scheme, cfg.noise,
            harness.child_rng(cfg.seed, m_value, 0, harness.STAGE_MEASURE),
        )

    scan = harness.rank_scan(source, schedule, cfg.solver)
    for t in scan.trace:
        print(
            f"m={t.m}: {'converged' if t.converged else 'no convergence'} "
            f"({t.iterations} iterations, max residual {t.max_residual:.3e})"
        )
    if scan.threshold_m is None:
        print("no m in the schedule converged")
    else:
        print(f"smallest converged m: {scan.threshold_m}")
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write("m,converged,iterations,max_residual\r\n")
            for t in scan.trace:
                fh.write(
                    f"{t.m},{'true' if t.converged else 'false'},"
                    f"{t.iterations},{t.max_residual!r}\r\n"
                )
        print(f"wrote {args.output}")
    if args.plot:
        plots.plot_rank_scan(scan.trace, args.plot)
        print(f"wrote {args.plot}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    try:
        rows = harness.read_rows_csv(args.csv)
    except OSError as exc:
        print(f"cannot read CSV: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ValueError, KeyError) as exc:
        print(f"bad sweep CSV: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    plots.plot_sweep(rows, args.output, title=args.title)
    print(f"wrote {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="cstomo",
        description="Compressed-sensing quantum state tomography toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a seeded experiment sweep from a config file")
    p.add_argument("config")
    p.add_argument("-o", "--output", default="sweep.csv")
    p.add_argument("--timing", action="store_true", help="record wall times (breaks byte-identical reruns)")
    p.add_argument("--plot", default=None, help="also render benchmark curves to this image")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("reconstruct", help="reconstruct a state from an MREC file")
    p.add_argument("record")
    p.add_argument("-o", "--output", default="reconstruction.dmat")
    p.add_argument("--report", default=None, help="write the JSON report here instead of stdout")
    p.add_argument("--plot", default=None, help="render residual history and spectrum to this image")
    _solver_flags(p)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("certify", help="near-purity certificate from an MREC file")
    p.add_argument("record")
    p.add_argument("--delta2", type=float, default=0.0, help="measurement-precision estimate")
    p.add_argument("--mu", type=float, default=2.0, help="confidence exponent (failure prob exp(-mu))")
    p.add_argument("-o", "--output", default=None, help="write certificate JSON here instead of stdout")
    p.add_argument(
        "--no-solve", dest="solve", action="store_false",
        help="skip the reconstruction that supplies the top-eigenvalue validity check",
    )
    _solver_flags(p)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("emulate-ion", help="approximately-low-rank experimental-state emulation")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--top", type=int, default=11, help="eigenvectors carrying the head mass")
    p.add_argument("--top-mass", type=float, default=0.99)
    p.add_argument("--ratio", type=float, default=0.42, help="geometric decay within the head")
    p.add_argument("--fraction", type=float, default=0.3, help="fraction of all d^2 Paulis measured")
    p.add_argument("--stderr", type=float, default=None, help="per-observable std target (default 3/d)")
    p.add_argument("--r-approx", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds to run")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--stop-tol", type=float, default=1e-4)
    p.add_argument("--timing", action="store_true")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_emulate_ion)

    p = sub.add_parser("rank-scan", help="find the smallest m whose solve converges")
    p.add_argument("config")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--plot", default=None)
    p.set_defaults(func=_cmd_rank_scan)

    p = sub.add_parser("plot", help="render benchmark curves from a sweep CSV")
    p.add_argument("csv")
    p.add_argument("-o", "--output", default="sweep.png")
    p.add_argument("--title", default=None)
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
