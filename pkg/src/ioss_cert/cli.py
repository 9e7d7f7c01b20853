"""Command-line entry point: certify, simulate, check-assumptions, stats.

Exit status: 0 certified / clean, 1 refuted / violations, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .assumptions import AssumptionProbeConfig, check_assumptions, fit_gammas, parse_scalar_fn, quadratic
from .certifier import THREADS_ENV, CertificationReport, Overall, certify
from .config import load_spec, resolve_path, spec_to_dict
from .enumeration import CycleCapError, DEFAULT_MAX_CYCLES
from .expr import ExprError, to_string
from .graph import build_graph
from .model import SpecError, SystemSpec
from .signals import DeadEndError, MalformedSignalError, read_signal, sample_signal, stats, validate_signal, write_signal
from .simulator import BlowUpError, RandomHoldInput, check_bound, integrate, write_trajectory

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

X0_BOX = (-1.0, 1.0)
INPUT_BOX = (-0.5, 0.5)
INPUT_HOLD = 0.1


class UsageError(Exception):
    pass


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _parse_id(text: str | None, spec: SystemSpec):
    if text is None:
        return spec.subsystems[0].id
    for s in spec.subsystems:
        if str(s.id) == text:
            return s.id
    raise UsageError(f"--start {text!r} is not a subsystem id")


def _out_dir(args) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _config_lines(spec: SystemSpec, path: Path, extra: dict) -> list[str]:
    lines = ["[config]", f"spec_file = {path}"]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    lines.append("spec = " + json.dumps(spec_to_dict(spec), sort_keys=False))
    return lines


def format_report(report: CertificationReport) -> str:
    """Plain-text certificate: verdict, weights, per-cycle and per-pair sums."""
    g = report.graph
    out = ["[result]", f"overall = {report.overall.value}", f"tolerance = {report.tolerance!r}", f"max_cycles = {report.max_cycles}"]
    if report.min_block_margin is not None:
        out.append(f"min_block_margin = {report.min_block_margin!r}")
        out.append(f"residual_bound = {report.residual_bound}")
        out.append(f"psi2_bound = {report.psi2_bound!r}")
    out.append("")
    out.append("[vertices]")
    for v in g.vertices:
        out.append(f"{v.id}  w = {v.w!r}  delta = {v.delta!r}  Delta = {v.Delta!r}  {'stable' if v.stable else 'unstable'}")
    out.append("")
    out.append("[edges]")
    for (a, b), w in g.edges.items():
        out.append(f"{a} -> {b}  w = {w!r}")
    out.append("")
    pc = report.precheck
    out.append("[precheck]")
    if pc is not None:
        mcm = "acyclic" if pc.max_cycle_mean is None else repr(pc.max_cycle_mean)
        out.append(f"max_cycle_mean = {mcm}")
        out.append(f"consistent = {str(pc.consistent).lower()}")
        if pc.note:
            out.append(f"note = {pc.note}")
    out.append("")
    out.append("[cycles]")
    for c in report.per_cycle:
        out.append(f"root {c.root}  cycle {c.cycle}  xi_worst = {c.xi_worst!r}  margin = {c.margin!r}  {'ok' if c.verdict else 'FAIL'}")
    out.append("")
    out.append("[pairs]")
    for p in report.per_pair:
        out.append(
            f"root {p.root}  walk {p.simple_walk}  cycle {p.cycle}  joint_xi = {p.joint_xi!r}  "
            f"margin = {p.margin!r}  {'ok' if p.verdict else 'FAIL'}"
        )
    wit = report.witnesses()
    out.append("")
    out.append("[witnesses]")
    for w in wit:
        if hasattr(w, "simple_walk"):
            out.append(f"C2 walk {w.simple_walk} + cycle {w.cycle}: joint_xi = {w.joint_xi!r}")
        else:
            out.append(f"C1 cycle {w.cycle}: xi_worst = {w.xi_worst!r}")
    if report.warnings:
        out.append("")
        out.append("[warnings]")
        out.extend(report.warnings)
    return "\n".join(out) + "\n"


def cmd_certify(args) -> int:
    path = resolve_path(args.spec)
    spec = load_spec(path)
    tol = spec.defaults.tolerance if args.tolerance is None else args.tolerance
    report = certify(spec, tol, args.max_cycles)
    text = format_report(report)
    text += "\n" + "\n".join(_config_lines(spec, path, {"tolerance": repr(tol), "max_cycles": args.max_cycles})) + "\n"
    dest = _out_dir(args) / f"{path.stem}.cert.txt"
    dest.write_text(text)
    print(f"{report.overall.value}  ({len(report.per_cycle)} rooted cycles, {len(report.per_pair)} pairs)")
    for w in report.witnesses()[:5]:
        if hasattr(w, "simple_walk"):
            print(f"  C2 witness: walk {w.simple_walk} + cycle {w.cycle}, joint Xi = {w.joint_xi:.6g}")
        else:
            print(f"  C1 witness: cycle {w.cycle}, Xi = {w.xi_worst:.6g}")
    for w in report.warnings:
        print(f"  warning: {w}")
    print(f"report: {dest}")
    return EXIT_OK if report.overall is Overall.CERTIFIED else EXIT_FAIL


def _gammas(args, spec):
    g1 = parse_scalar_fn(args.gamma1) if args.gamma1 else None
    g2 = parse_scalar_fn(args.gamma2) if args.gamma2 else None
    fitted = []
    if g1 is None or g2 is None:
        c1, c2, _ = fit_gammas(spec, AssumptionProbeConfig(seed=args.seed0))
        if g1 is None:
            g1 = quadratic(c1)
            fitted.append("gamma1")
        if g2 is None:
            g2 = quadratic(c2)
            fitted.append("gamma2")
    return g1, g2, fitted


def _simulate_one(spec, graph, start, k, args, g1, g2, out: Path, stem: str):
    seed = args.seed0 + k
    signal = sample_signal(graph, start, args.horizon, seed)
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(*X0_BOX, size=spec.dims.d)
    u = RandomHoldInput(spec.dims.m, *INPUT_BOX, args.horizon, INPUT_HOLD, seed)
    traj = integrate(spec, signal, x0, u, args.horizon, args.step)
    bc = check_bound(spec, signal, traj, g1, g2, graph)
    write_trajectory(out / f"{stem}.seed{k}.csv", traj, bc.psi1, bc.psi2, bc.slack)
    write_signal(signal, out / f"{stem}.seed{k}.signal.txt")
    return {
        "seed": seed,
        "switches": signal.n_switches,
        "max_norm": traj.max_norm,
        "max_psi2": float(np.max(bc.psi2)),
        "min_slack": bc.min_slack,
    }


def cmd_simulate(args) -> int:
    path = resolve_path(args.spec)
    spec = load_spec(path)
    if not spec.has_dynamics:
        raise UsageError("simulate needs dynamics f for every subsystem")
    if args.seeds < 1 or args.horizon <= 0:
        raise UsageError("--seeds must be >= 1 and --horizon > 0")
    step = spec.defaults.rk_step if args.step is None else args.step
    args.step = step
    graph = build_graph(spec)
    start = _parse_id(args.start, spec)
    g1, g2, fitted = _gammas(args, spec)
    out = _out_dir(args)
    stem = path.stem

    def job(k):
        try:
            return _simulate_one(spec, graph, start, k, args, g1, g2, out, stem)
        except BlowUpError as exc:
            return {"seed": args.seed0 + k, "error": str(exc)}

    n = min(_threads(), args.seeds)
    if n > 1:
        with ThreadPoolExecutor(n) as pool:
            rows = list(pool.map(job, range(args.seeds)))
    else:
        rows = [job(k) for k in range(args.seeds)]
    bad = 0
    for k, r in enumerate(rows):
        if "error" in r:
            bad += 1
            print(f"seed {k}: {r['error']}")
            continue
        finite = math.isfinite(r["max_norm"])
        bad += not finite
        print(
            f"seed {k}: switches {r['switches']:3d}  max |x| {r['max_norm']:.4g}  "
            f"max psi2 {r['max_psi2']:.4g}  min slack {r['min_slack']:.3g}"
        )
    summary = _config_lines(
        spec,
        path,
        {
            "seeds": f"{args.seed0}..{args.seed0 + args.seeds - 1}",
            "horizon": repr(args.horizon),
            "step": repr(step),
            "start": start,
            "x0_box": X0_BOX,
            "input_box": INPUT_BOX,
            "input_hold": INPUT_HOLD,
            "gamma1": to_string(g1) + (" (fitted)" if "gamma1" in fitted else ""),
            "gamma2": to_string(g2) + (" (fitted)" if "gamma2" in fitted else ""),
        },
    )
    summary += ["", "[runs]"] + [json.dumps(r) for r in rows]
    (out / f"{stem}.simulate.txt").write_text("\n".join(summary) + "\n")
    print(f"wrote {args.seeds} trajectories to {out}")
    return EXIT_FAIL if bad else EXIT_OK


def cmd_check_assumptions(args) -> int:
    path = resolve_path(args.spec)
    spec = load_spec(path)
    if not spec.has_dynamics or any(s.lyapunov is None for s in spec.subsystems):
        raise UsageError("check-assumptions needs f and V for every subsystem")
    probe = AssumptionProbeConfig(
        samples=args.samples,
        state_box=tuple(args.state_box),
        input_box=tuple(args.input_box),
        gamma1=parse_scalar_fn(args.gamma1) if args.gamma1 else None,
        gamma2=parse_scalar_fn(args.gamma2) if args.gamma2 else None,
        alpha_lo=parse_scalar_fn(args.alpha_lo) if args.alpha_lo else None,
        alpha_hi=parse_scalar_fn(args.alpha_hi) if args.alpha_hi else None,
        seed=args.seed0,
    )
    rep = check_assumptions(spec, probe)
    lines = ["[result]", f"clean = {str(rep.ok).lower()}", f"samples = {rep.samples}", f"violations = {len(rep.violations)}", ""]
    lines.append("[functions]")
    for k, v in rep.functions.items():
        lines.append(f"{k} = {v}" + ("  (fitted)" if rep.fitted.get(k) else ""))
    lines += ["", "[worst_margins]"] + [f"{k} = {v!r}" for k, v in rep.worst_margins.items()]
    if rep.notes:
        lines += ["", "[notes]"] + rep.notes
    lines += ["", "[violations]"]
    lines += [f"{v.kind}  at {v.where}  xi = {list(v.xi)}  eta = {list(v.eta)}  margin = {v.margin!r}" for v in rep.violations]
    lines += [""] + _config_lines(spec, path, {"state_box": args.state_box, "input_box": args.input_box, "seed": args.seed0})
    dest = _out_dir(args) / f"{path.stem}.assumptions.txt"
    dest.write_text("\n".join(lines) + "\n")
    print(f"{'clean' if rep.ok else 'VIOLATIONS'}: {len(rep.violations)} of {rep.samples} samples flagged")
    for k, v in rep.functions.items():
        print(f"  {k} = {v}" + (" (fitted)" if rep.fitted.get(k) else ""))
    print(f"report: {dest}")
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_stats(args) -> int:
    spec = load_spec(args.spec)
    graph = build_graph(spec)
    signal = read_signal(args.signal)
    chk = validate_signal(graph, signal)
    s = 0.0 if args.window_from is None else args.window_from
    t = signal.horizon if args.window_to is None else args.window_to
    st = stats(signal, s, t)
    print(f"window ({s:g}, {t:g}]")
    print(f"N = {st.N}")
    for p in graph.ids:
        print(f"T[{p}] = {st.T.get(p, 0.0)!r}")
    for (p, q), n in sorted(st.N_pq.items(), key=lambda kv: (graph.index(kv[0][0]), graph.index(kv[0][1]))):
        print(f"N[{p},{q}] = {n}")
    for v in chk.violations:
        print(f"violation: {v.message}")
    return EXIT_OK if chk.ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ioss-cert", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("spec", help="JSON system description")
        p.add_argument("--out-dir", default=".", help="directory for reports and trajectories")

    p = sub.add_parser("certify", help="decide the graph conditions and write <stem>.cert.txt")
    common(p)
    p.add_argument("--tolerance", type=float, default=None, help="strictness margin (default from spec, else 1e-9)")
    p.add_argument("--max-cycles", type=int, default=DEFAULT_MAX_CYCLES)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="integrate random admissible runs, write <stem>.seed<k>.csv")
    common(p)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed0", type=int, default=0, help="first seed")
    p.add_argument("--horizon", type=float, default=15.0)
    p.add_argument("--step", type=float, default=None, help="RK4 step (default from spec, else 1e-3)")
    p.add_argument("--start", default=None, help="initial subsystem id (default: first declared)")
    p.add_argument("--gamma1", default=None, help="gain on |v| as a function of s")
    p.add_argument("--gamma2", default=None, help="gain on |y| as a function of s")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-assumptions", help="sample the Lyapunov hypotheses")
    common(p)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed0", type=int, default=0)
    p.add_argument("--state-box", type=float, nargs=2, default=(-2.0, 2.0), metavar=("LO", "HI"))
    p.add_argument("--input-box", type=float, nargs=2, default=(-1.0, 1.0), metavar=("LO", "HI"))
    for name in ("gamma1", "gamma2", "alpha-lo", "alpha-hi"):
        p.add_argument(f"--{name}", default=None, help="function of s (fitted quadratic if omitted)")
    p.set_defaults(func=cmd_check_assumptions)

    p = sub.add_parser("stats", help="switch counts and activation times of a recorded signal")
    p.add_argument("spec")
    p.add_argument("signal", help="two-column 'instant index' file")
    p.add_argument("--from", dest="window_from", type=float, default=None)
    p.add_argument("--to", dest="window_to", type=float, default=None)
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (
        UsageError,
        SpecError,
        ExprError,
        OSError,
        ValueError,
        CycleCapError,
        DeadEndError,
        MalformedSignalError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
