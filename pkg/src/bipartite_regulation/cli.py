"""Command-line entry point.

Exit codes: 0 success, 1 validation error (bad input, unbalanced graph,
unknown flag), 2 numerical failure (blow-up, certificate search).
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import engine, pgm, regulation, scenarios, turing
from .signed_graph import (
    CertificateSearchFailed,
    GraphError,
    StructurallyUnbalanced,
    has_leader_spanning_tree,
    laplacian_family,
    load_edge_list,
    structural_balance,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _fmt_eig(z):
    if abs(z.imag) <= 1e-12 * max(1.0, abs(z)):
        return f"{z.real:.10g}"
    return f"{z.real:.10g}{z.imag:+.10g}i"


def _fmt_set(s):
    return "{" + ", ".join(str(i) for i in sorted(s)) + "}"


def cmd_check_graph(args, out):
    g = load_edge_list(args.file)
    out.write(f"followers: {g.n_followers}\n")
    try:
        gp = structural_balance(g)
    except StructurallyUnbalanced as exc:
        out.write("structurally balanced: no\n")
        out.write("negative cycle: " + " -> ".join(str(c) for c in exc.cycle) + "\n")
        return EXIT_INVALID
    out.write("structurally balanced: yes\n")
    out.write(f"V1 = {_fmt_set(gp.v1)}\n")
    out.write(f"V2 = {_fmt_set(gp.v2)}\n")
    if gp.isolated:
        out.write(f"isolated followers: {_fmt_set(gp.isolated)}\n")
    rooted = has_leader_spanning_tree(g)
    out.write(f"leader spanning tree: {'yes' if rooted else 'no'}\n")
    mats = laplacian_family(g, gp)
    eig = np.linalg.eigvals(mats.h_signed)
    eig = eig[np.lexsort((-eig.imag, -eig.real))]
    out.write("H^s eigenvalues: " + ", ".join(_fmt_eig(z) for z in eig) + "\n")
    return EXIT_OK if rooted else EXIT_INVALID


def cmd_gains(args, out):
    poles = regulation.parse_poles(args.poles)
    gains = regulation.choose_gains(args.order, poles)
    out.write("beta = " + ", ".join(f"{b:.10g}" for b in gains.beta) + "\n")
    eig = np.linalg.eigvals(gains.a_matrix)
    out.write("closed-loop eigenvalues: " + ", ".join(_fmt_eig(z) for z in np.sort_complex(eig)) + "\n")
    return EXIT_OK


def _report_lines(rep):
    lines = []
    if rep.final_tracking is not None:
        lines.append("final |e_i|: " + ", ".join(f"{v:.3e}" for v in rep.final_tracking))
        lines.append("bipartite residuals: " + ", ".join(f"{v:.3e}" for v in rep.bipartite_residuals))
    lines.append("final ||eta_i - phi_i v||: " + ", ".join(f"{v:.3e}" for v in rep.final_estimation))
    for name, rate in (("tracking", rep.tracking_rate), ("estimation", rep.estimation_rate)):
        if name == "tracking" and rep.final_tracking is None:
            continue
        lines.append(f"{name} rate fit: " + ("n/a" if rate is None else f"{rate:.4g}"))
    lines.append(f"bounded: {'yes' if rep.bounded else 'no'}")
    return lines


def cmd_simulate(args, out):
    sc = scenarios.load_config(args.config, mu_override=args.mu, safety_factor=args.safety_factor)
    overrides = {k: v for k, v in (("dt", args.dt), ("t_final", args.t_final)) if v is not None}
    if overrides:
        sc = replace(sc, **overrides)
    out.write(f"mu = {sc.mu:.6g}\n")
    try:
        traj = engine.integrate(sc)
    except engine.BlowUp as exc:
        if args.out and exc.trajectory is not None:
            with open(args.out, "w", newline="") as fh:
                engine.write_csv(exc.trajectory, fh)
        raise
    with open(args.out, "w", newline="") as fh:
        engine.write_csv(traj, fh)
    out.write(f"wrote {args.out}\n")
    for line in _report_lines(engine.convergence_report(traj)):
        out.write(line + "\n")
    if args.plot_dir:
        from .plotting import simulation_report

        for p in simulation_report(traj, args.plot_dir, stem=Path(args.out).stem):
            out.write(f"wrote {p}\n")
    return EXIT_OK


def _parse_size(text):
    try:
        w, h = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"bad size {text!r}; expected WIDTHxHEIGHT") from None
    if w <= 0 or h <= 0:
        raise UsageError("size must be positive")
    return w, h


def cmd_turing(args, out):
    if (args.target is None) == (args.stripes is None):
        raise UsageError("give exactly one of --target and --stripes")
    if args.target is not None:
        pixels, maxval = pgm.read_pgm(args.target)
        target = pgm.threshold_dark(pixels, maxval)
    else:
        target = turing.zebra_stripes(*_parse_size(args.stripes))
    spec = turing.TuringSpec(target)
    overrides = {
        k: v for k, v in (("mu", args.mu), ("dt", args.dt), ("t_final", args.t_final),
                          ("safety_factor", args.safety_factor)) if v is not None
    }
    spec = replace(spec, **overrides)
    every = None
    if args.plot_dir:
        every = max(1, int(round(0.05 / spec.dt)))
    res = turing.run_turing(spec, sample_every=every)
    Path(args.out).write_bytes(pgm.render_pgm(res.image))
    want = np.where(spec.target, -1.0, 1.0)
    match = float(np.mean(np.sign(res.image) == want))
    out.write(f"mu = {res.mu:.6g}\n")
    out.write(f"pixels: {spec.width}x{spec.height}, sign match {100 * match:.2f}%\n")
    out.write(f"|y| range: [{np.abs(res.image).min():.6f}, {np.abs(res.image).max():.6f}]\n")
    out.write(f"wrote {args.out}\n")
    if args.plot_dir:
        from .plotting import turing_report

        for p in turing_report(res, args.plot_dir, stem=Path(args.out).stem):
            out.write(f"wrote {p}\n")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="bipreg", description="Bipartite output regulation over signed digraphs.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    c = sub.add_parser("check-graph", help="structural balance, spanning tree and H^s spectrum")
    c.add_argument("file")
    c.set_defaults(func=cmd_check_graph)

    c = sub.add_parser("gains", help="companion-form gains from closed-loop poles")
    c.add_argument("--order", type=int, required=True)
    c.add_argument("--poles", required=True, help="comma list, e.g. -1,-1 or -1+1j,-1-1j")
    c.set_defaults(func=cmd_gains)

    c = sub.add_parser("simulate", help="run a scenario config and export CSV")
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--plot-dir")
    c.add_argument("--mu", type=float)
    c.add_argument("--safety-factor", type=float)
    c.add_argument("--dt", type=float)
    c.add_argument("--t-final", type=float)
    c.set_defaults(func=cmd_simulate)

    c = sub.add_parser("turing", help="regenerate a binary image by bipartite regulation")
    c.add_argument("--target", help="input PGM (P5/P2), thresholded at 128")
    c.add_argument("--stripes", help="use a generated zebra pattern of size WxH instead")
    c.add_argument("--out", required=True)
    c.add_argument("--plot-dir")
    c.add_argument("--mu", type=float)
    c.add_argument("--dt", type=float)
    c.add_argument("--t-final", type=float)
    c.add_argument("--safety-factor", type=float)
    c.set_defaults(func=cmd_turing)
    return p


def _join_negative_values(argv):
    # "--poles -1,-1" would otherwise be read as an unknown option
    out, it = [], iter(argv)
    for tok in it:
        if tok in ("--poles", "--mu", "--dt", "--t-final", "--safety-factor"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    argv = _join_negative_values(sys.argv[1:] if argv is None else list(argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "bipreg: error: a subcommand is required")
        return args.func(args, out)
    except UsageError as exc:
        err.write(str(exc).rstrip() + "\n")
        return EXIT_INVALID
    except (engine.BlowUp, CertificateSearchFailed, FloatingPointError) as exc:
        err.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (GraphError, scenarios.ConfigError, engine.InvalidScenario, pgm.PGMError,
            ValueError, OSError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
