"""Command line entry point ``entropy-lab``.

Subcommands::

    entropy-lab run <config.ini> [--out DIR] [--seed N] [--strict-aliasing] [--tol-overrides k=v,...]
    entropy-lab accept <dir>
    entropy-lab spectrum [--l-max 8]
    entropy-lab flow [--mode 2 --amplitude 0.05]
    entropy-lab sweep [--modes 2,3,4,5,6 --amplitudes=-0.1,-0.05,0.05,0.1]

Exit codes: 0 every check passed, 1 a check failed, 2 configuration error,
3 solver error (diagnostics written next to the artifacts).
"""

import argparse
import sys

from . import experiments
from .errors import ConfigurationError

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _common(p):
    p.add_argument("--out", default="results", help="artifact directory (default: results)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--strict-aliasing", action="store_true",
                   help="reject inputs with content above the grid truncation")
    p.add_argument("--tol-overrides", default="", metavar="K=V[,K=V]",
                   help="override named tolerances of the scenario")


def build_parser():
    parser = _Parser(prog="entropy-lab", description="λ-entropy experiments on S² and S²×S².")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("run", help="run one scenario config")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("accept", help="aggregate artifacts into the acceptance summary")
    p.add_argument("dir")

    p = sub.add_parser("spectrum", help="modal operator table at the round metric")
    p.add_argument("--l-max", type=int, default=8)
    p.add_argument("--grid-l-max", type=int, default=32)
    _common(p)

    p = sub.add_parser("flow", help="one Kähler-Ricci flow run from a zonal perturbation")
    p.add_argument("--mode", type=int, default=2)
    p.add_argument("--amplitude", type=float, default=0.05)
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--integrator", choices=("imex", "rk4"), default="imex")
    p.add_argument("--grid-l-max", type=int, default=32)
    _common(p)

    p = sub.add_parser("sweep", help="basin sweep over zonal perturbations")
    p.add_argument("--modes", default="2,3,4,5,6")
    p.add_argument("--amplitudes", default="-0.1,-0.05,0.05,0.1")
    p.add_argument("--mixed-samples", type=int, default=4)
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--grid-l-max", type=int, default=32)
    _common(p)
    return parser


def _synth_config(args):
    if args.command == "spectrum":
        return "\n".join([
            "[scenario]", "name = spectrum", "kind = spectrum",
            "[grid]", f"l_max = {args.grid_l_max}",
            "[parameters]", f"table_l_max = {args.l_max}",
        ])
    if args.command == "flow":
        return "\n".join([
            "[scenario]", "name = flow", "kind = flow", "criterion = 8",
            "[grid]", f"l_max = {args.grid_l_max}",
            "[parameters]", f"mode = {args.mode}", f"amplitude = {args.amplitude!r}",
            f"t_end = {args.t_end!r}", f"integrator = {args.integrator}",
        ])
    return "\n".join([
        "[scenario]", "name = basin_sweep", "kind = basin_sweep", "criterion = 8",
        "[grid]", f"l_max = {args.grid_l_max}",
        "[parameters]", f"modes = {args.modes}", f"amplitudes = {args.amplitudes}",
        f"mixed_samples = {args.mixed_samples}", f"t_end = {args.t_end!r}",
    ])


def _report(art):
    if art.exit_code == EXIT_CONFIG:
        print(f"config error: {art.config.get('error')}", file=sys.stderr)
        return
    if art.exit_code == EXIT_SOLVER:
        print(f"solver error in {art.name}; diagnostics: {art.paths[0]}", file=sys.stderr)
        return
    for c in art.checks:
        value = "" if c.value is None else f" value={float(c.value)!r}"
        timing = art.timings.get(c.check)
        measured = f" measured={timing:.3g}s" if timing is not None else ""
        print(f"{'PASS' if c.passed else 'FAIL'} {art.name}:{c.check}{value} tol={c.tolerance!r}{measured}"
              + (f" [{c.detail}]" if c.detail and not c.passed else ""))
    print(f"{art.name}: {'passed' if art.passed else 'FAILED'} in {art.wall_clock:.2f}s "
          f"({len(art.paths)} files)")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        experiments.thread_cap()
        if args.command == "accept":
            rows, code = experiments.acceptance(args.dir)
            for crit, title, status, n, _, failures in rows:
                print(f"criterion {crit:2d} {status:6s} {title}" + (f" :: {failures}" if failures else ""))
            return code
        overrides = experiments.parse_tol_overrides(args.tol_overrides)
        if args.command == "run":
            art = experiments.run_scenario(args.config, args.out, seed=args.seed,
                                           strict_aliasing=args.strict_aliasing,
                                           tol_overrides=overrides)
        else:
            scen = experiments.parse_scenario(_synth_config(args), seed=args.seed,
                                              tol_overrides=overrides,
                                              strict_aliasing=args.strict_aliasing)
            art = experiments.run_validated(scen, args.out)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _report(art)
    return art.exit_code


if __name__ == "__main__":
    sys.exit(main())
