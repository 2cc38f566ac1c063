"""``spadenoise`` command line.

Exit codes: 0 on success, 1 on a configuration error, 2 when a ``*-check``
command finds a numerical identity violated.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config, parse_grid
from .experiments import (
    cmd_decoupled_fisher_sweep,
    cmd_fisher_sweep,
    cmd_group_check,
    cmd_prob_check,
    cmd_protocol_sim,
)
from .protocol import DegenerateGrid

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2


def _fmt(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def write_csv(schema, rows):
    """CSV text: ``#schema:`` comment, header row, one line per row, LF endings."""
    buf = io.StringIO(newline="")
    buf.write("#schema: " + ",".join(f"{name}:{kind}" for name, kind in schema) + "\n")
    buf.write(",".join(name for name, _ in schema) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[name]) for name, _ in schema) + "\n")
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return _jsonable(obj.item())
    return obj


def write_json(cfg: ExperimentConfig, results):
    doc = {
        "config": cfg.to_dict(),
        "results": results,
        "provenance": {"seed": cfg.seed, "dim": cfg.dim, "version": __version__},
    }
    return json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n"


def _emit(text, path):
    if path is None:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            pass
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _grid_arg(integer=False):
    def parse(text):
        try:
            return parse_grid(text, integer=integer)
        except ConfigError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


class _Parser(argparse.ArgumentParser):
    # bad flags are configuration errors, not check failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--seed", type=int)
    common.add_argument("--dim", type=int)
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--workers", type=int)

    parser = _Parser(prog="spadenoise", description="Noisy SPADE and decoupling experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fisher-sweep", parents=[common], help="bi-SPADE Fisher curves under displacement noise")
    p.add_argument("--d", type=_grid_arg())
    p.add_argument("--sigma-tilde", dest="sigma_tilde", type=_grid_arg())

    p = sub.add_parser("decoupled-fisher-sweep", parents=[common], help="Fisher curves after parity decoupling")
    p.add_argument("--d", type=_grid_arg())
    p.add_argument("--sigma-tilde", dest="sigma_tilde", type=_grid_arg())
    p.add_argument("--epsilon", type=_grid_arg())

    p = sub.add_parser("prob-check", parents=[common], help="closed-form vs Monte Carlo probabilities")
    p.add_argument("--d", type=_grid_arg())
    p.add_argument("--sigma-tilde", dest="sigma_tilde", type=_grid_arg())
    p.add_argument("--n", type=_grid_arg(integer=True))
    p.add_argument("--samples", type=int)

    p = sub.add_parser("protocol-sim", parents=[common], help="decoupling error vs noise scale")
    p.add_argument("--m", type=_grid_arg(integer=True))
    p.add_argument("--N", dest="N", type=_grid_arg(integer=True))
    p.add_argument("--lambda", dest="lam", type=_grid_arg())
    p.add_argument("--seeds", type=_grid_arg(integer=True))
    p.add_argument("--noise-mode", dest="noise_mode",
                   choices=("identical", "fresh-per-step", "fresh-per-cycle"))
    p.add_argument("--degree", type=int)

    p = sub.add_parser("group-check", parents=[common], help="control-group averaging identities")
    p.add_argument("--m", type=_grid_arg(integer=True))
    return parser


def resolve_config(args):
    """Config file (if any) with command-line flags applied on top."""
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if cfg.command is not None and cfg.command != args.command:
        raise ConfigError(f"config is for {cfg.command!r}, not {args.command!r}", "command")
    overrides = {k: v for k, v in vars(args).items() if k not in ("config",)}
    return cfg.updated(**overrides)


def run(cfg: ExperimentConfig):
    """Execute ``cfg`` and return ``(text, exit_code, sidecar_text)``."""
    cmd = cfg.command
    if cmd == "fisher-sweep":
        schema, rows = cmd_fisher_sweep(cfg)
    elif cmd == "decoupled-fisher-sweep":
        schema, rows = cmd_decoupled_fisher_sweep(cfg)
    elif cmd == "protocol-sim":
        schema, rows, reports = cmd_protocol_sim(cfg)
        summary = write_json(cfg, {"reports": reports, "rows": rows})
        if cfg.format == "json":
            return summary, EXIT_OK, None
        return write_csv(schema, rows), EXIT_OK, summary
    elif cmd in ("prob-check", "group-check"):
        report = cmd_prob_check(cfg) if cmd == "prob-check" else cmd_group_check(cfg)
        return write_json(cfg, report), EXIT_OK if report["passed"] else EXIT_CHECK, None
    else:
        raise ConfigError(f"unknown command {cmd!r}", "command")
    if cfg.format == "json":
        return write_json(cfg, rows), EXIT_OK, None
    return write_csv(schema, rows), EXIT_OK, None


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        text, code, sidecar = run(cfg)
    except (ConfigError, DegenerateGrid, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(text, cfg.out)
    if sidecar is not None and cfg.out is not None:
        _emit(sidecar, cfg.out + ".json")
    return code


if __name__ == "__main__":
    sys.exit(main())
