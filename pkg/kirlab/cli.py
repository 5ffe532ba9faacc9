"""
configuration driven experiment runner.

    kirlab <command> --config run.toml [--out prefix] [--threads n] [--resolution n]

every command writes <prefix>.report.json (status, resolved config, results or errors) and, where a table
is produced, <prefix>.csv. Exit codes: 0 ok, 1 failed checks, 2 invalid configuration, 3 solver error.
"""

import argparse
import sys

import pandas as pd

from kirlab.branch import (CaseLabel, asymptotic_b_to_zero, bifurcation_table, eval_fsecond, extremum_value,
                           find_roots)
from kirlab.config import load_config
from kirlab.exceptions import ConfigurationError, KirlabError
from kirlab.grid import build_domain
from kirlab.groundstate import solve_groundstate
from kirlab.kirchhoff import continuation, reconstruct
from kirlab.output import make_writer, save_field, save_report, save_table
from kirlab.shooting import shooting_oracle
from kirlab.sweep import blowup_probe, bound_sweep, limit_probe, regime_of
from kirlab.verify import run_verify

COMMANDS = ("groundstate", "branch", "solve", "continuation", "sweep", "probe", "oracle", "verify")
EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def build_parser():
    parser = argparse.ArgumentParser(prog="kirlab", description='Kirchhoff Dirichlet problem lab')

    ####################################################################################################################
    # pipeline stage
    ####################################################################################################################

    parser.add_argument("command", choices=COMMANDS, metavar="command",
                        help=f"pipeline stage to run, one of: {', '.join(COMMANDS)}")

    ####################################################################################################################
    # configuration and overrides
    ####################################################################################################################

    parser.add_argument("-c", "--config", type=str, metavar="", default=None,
                        help="TOML experiment configuration (optional for verify)")

    parser.add_argument("-o", "--out", type=str, metavar="", default=None,
                        help="output prefix, overrides `output` of the configuration")

    parser.add_argument("--threads", type=int, metavar="", default=None,
                        help="number of sweep cells evaluated concurrently")

    parser.add_argument("--resolution", type=int, metavar="", default=None,
                        help="grid resolution, overrides [domain] resolution")

    ####################################################################################################################
    # diagnostics
    ####################################################################################################################

    parser.add_argument("--tensorboard", action="store_true",
                        help="log solver iterations to <prefix>_TB_NNN")

    parser.add_argument("--dump-fields", action="store_true",
                        help="write every computed grid function to <prefix>.<name>.csv")

    parser.add_argument("-v", "--verbose", action="store_true", help="print solver progress")
    return parser


def _groundstate(cfg, writer=None, verbose=False):
    grid = build_domain(cfg.domain)
    gs = solve_groundstate(grid, cfg.params.p, tol=cfg.tolerances.groundstate, cg_tol=cfg.tolerances.cg,
                           writer=writer, verbose=verbose)
    return grid, gs


def _step_kwargs(cfg, writer):
    kwargs = cfg.step_kwargs()
    kwargs["writer"] = writer
    return kwargs


def cmd_groundstate(cfg, prefix, args, writer):
    grid, gs = _groundstate(cfg, writer, args.verbose)
    save_table(prefix, gs.to_frame())
    return EXIT_OK, {"groundstate": gs.to_dict()}


def cmd_branch(cfg, prefix, args, writer):
    S = cfg.branch.S
    result = {}
    if S is None:
        _, gs = _groundstate(cfg, writer, args.verbose)
        S = gs.S
        result["groundstate"] = gs.to_dict()
    params = cfg.params
    report = find_roots(params, S, root_tol=cfg.tolerances.root)
    result["regime"] = report.to_dict()
    result["extremum_value"] = extremum_value(params, S)
    result["fsecond_at_roots"] = [eval_fsecond(y, params, S) for y in report.roots]
    if report.case_label is CaseLabel.TWO_BRANCH and params.b > 0:
        result["asymptotics"] = asymptotic_b_to_zero(params, S, cfg.branch.b_sequence,
                                                     root_tol=cfg.tolerances.root).to_dict()
    table = bifurcation_table(params, S, cfg.branch.variable, cfg.branch.values, root_tol=cfg.tolerances.root)
    save_table(prefix, table)
    return EXIT_OK, result


def cmd_solve(cfg, prefix, args, writer):
    grid, gs = _groundstate(cfg, writer, args.verbose)
    report = find_roots(cfg.params, gs.S, root_tol=cfg.tolerances.root)
    records = [reconstruct(gs, beta, cfg.params, root_index=k) for k, beta in enumerate(report.roots)]
    save_table(prefix, pd.DataFrame([{k: v for k, v in r.to_dict().items() if k not in ("params", "perturbation")}
                                     for r in records]))
    if args.dump_fields:
        for k, r in enumerate(records):
            save_field(prefix, grid.to_frame(r.u, name="u"), f"u{k}")
    return EXIT_OK, {"groundstate": gs.to_dict(), "regime": report.to_dict(),
                     "records": [r.to_dict() for r in records]}


def cmd_continuation(cfg, prefix, args, writer):
    grid, gs = _groundstate(cfg, writer, args.verbose)
    path = continuation(grid, cfg.params, cfg.perturbation, cfg.schedule, gs=gs, verbose=args.verbose,
                        **_step_kwargs(cfg, writer))
    save_table(prefix, pd.DataFrame([{"t": r.t, "sup": r.sup_norm, "min": r.min, "grad_sq": r.grad_sq,
                                      "residual": r.residual_rel, "iterations": r.iterations} for r in path]))
    if args.dump_fields:
        save_field(prefix, grid.to_frame(path[-1].u, name="u"), "endpoint")
    result = {"groundstate": gs.to_dict(), "path": [r.to_dict() for r in path]}
    if cfg.perturbation.kind != "none":
        result["hypothesis_limits"] = cfg.perturbation.hypothesis_limits(cfg.params.p)
    return EXIT_OK, result


def cmd_sweep(cfg, prefix, args, writer):
    if cfg.sweep is None:
        raise ConfigurationError("the sweep command needs a [sweep] section")
    kwargs = _step_kwargs(cfg, writer)
    kwargs.pop("lam1")
    report = bound_sweep(cfg.domain, cfg.params, cfg.perturbation, cfg.sweep, t_schedule=cfg.schedule,
                         threads=cfg.threads, gs_tol=cfg.tolerances.groundstate, verbose=args.verbose, **kwargs)
    save_table(prefix, report.table)
    return (EXIT_OK if report.ok else EXIT_FAILED), {"bounds": report.to_dict()}


def cmd_probe(cfg, prefix, args, writer):
    grid, gs = _groundstate(cfg, writer, args.verbose)
    probe = blowup_probe if regime_of(cfg.params) == "intermediate" else limit_probe
    report = probe(grid, cfg.params, cfg.branch.b_sequence, gs=gs, verbose=args.verbose)
    save_table(prefix, report.table)
    return (EXIT_OK if report.ok else EXIT_FAILED), {"probe": probe.__name__, "report": report.to_dict()}


def cmd_oracle(cfg, prefix, args, writer):
    if cfg.domain.shape != "disk":
        raise ConfigurationError("the shooting oracle needs a disk domain")
    result = shooting_oracle(cfg.params.p, cfg.domain.radius, verbose=args.verbose)
    save_table(prefix, result.profile)
    return EXIT_OK, {"oracle": result.to_dict()}


def cmd_verify(cfg, prefix, args, writer):
    passed, checks = run_verify(verbose=True)
    save_table(prefix, pd.DataFrame([{"name": c["name"], "passed": c["passed"]} for c in checks]))
    return (EXIT_OK if passed else EXIT_FAILED), {"passed": passed, "checks": checks}


HANDLERS = {"groundstate": cmd_groundstate, "branch": cmd_branch, "solve": cmd_solve,
            "continuation": cmd_continuation, "sweep": cmd_sweep, "probe": cmd_probe, "oracle": cmd_oracle,
            "verify": cmd_verify}


def run(argv=None):
    """
    parse argv, run one command and write its report
    :return: exit status
    """
    args = build_parser().parse_args(argv)
    overrides = {"output": args.out, "threads": args.threads, "resolution": args.resolution}
    prefix = args.out or f"kirlab_{args.command}"
    cfg, writer = None, None
    try:
        if args.config is not None:
            cfg = load_config(args.config, overrides)
            prefix = cfg.output
        elif args.command != "verify":
            raise ConfigurationError(f"the {args.command} command needs --config")
        if args.tensorboard:
            writer = make_writer(prefix)
        status, result = HANDLERS[args.command](cfg, prefix, args, writer)
    except ConfigurationError as err:
        save_report(prefix, args.command, "error", None if cfg is None else cfg.to_dict(), errors=err.violations)
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except KirlabError as err:
        result = {"path": [r.to_dict() for r in err.path]} if hasattr(err, "path") else None
        save_report(prefix, args.command, "error", None if cfg is None else cfg.to_dict(), result=result,
                    errors=[f"{type(err).__name__}: {err}"])
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_SOLVER
    finally:
        if writer is not None:
            writer.close()

    path = save_report(prefix, args.command, "ok" if status == EXIT_OK else "failed",
                       None if cfg is None else cfg.to_dict(), result=result)
    print("save output to: ", path)
    return status


def main():
    sys.exit(run())
