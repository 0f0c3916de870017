"""Command-line entry point: ``dnnchoice {synth,train,search,repeat,econ,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import commands
from .config import ConfigError, load_config, schema_text


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("usage", message, code=2)


def _fail(kind: str, message: str, code: int = 1):
    line = json.dumps({"error": kind, "message": " ".join(str(message).split())})
    print(line, file=sys.stderr)
    sys.exit(code)


def _common(p):
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--data", help="dataset CSV (schema sidecar <stem>.schema.json)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="override the command's seed")
    p.add_argument("--workers", type=int, help="concurrent trainings (default $DNNCHOICE_WORKERS or 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dnnchoice", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _common(sub.add_parser("synth", help="write a synthetic dataset and its ground truth"))
    _common(sub.add_parser("train", help="train one model"))
    p = sub.add_parser("search", help="random hyperparameter search")
    _common(p)
    p.add_argument("--s", type=int, help="number of sampled configurations")
    p = sub.add_parser("repeat", help="repeated trainings with fixed hyperparameters")
    _common(p)
    p.add_argument("--m", type=int, help="number of trainings")
    p.add_argument("--model", help="take hyperparameters from this model file (e.g. best_model.json)")
    p = sub.add_parser("econ", help="extract the economic-information bundle")
    _common(p)
    p.add_argument("--ensemble", required=True, help="repeat output directory or a model file")
    p = sub.add_parser("report", help="text summary and figures for an econ bundle")
    _common(p)
    p.add_argument("--bundle", required=True, help="econ output directory")
    sub.add_parser("schema", help="print the configuration schema")
    return ap


_SEED_KEY = {"synth": ("synth", "seed"), "train": ("train", "seed"), "search": ("search", "seed"),
             "repeat": ("repeat", "seed_base")}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "schema":
        print(schema_text())
        return 0
    try:
        cfg = load_config(args.config)
        if args.data:
            cfg["data"]["path"] = args.data
        if args.seed is not None and args.command in _SEED_KEY:
            sec, key = _SEED_KEY[args.command]
            cfg[sec][key] = args.seed
        if args.workers is not None:
            cfg["run"]["workers"] = args.workers
        if getattr(args, "s", None) is not None:
            cfg["search"]["s"] = args.s
        if getattr(args, "m", None) is not None:
            cfg["repeat"]["m"] = args.m
        out = args.out
        if args.command == "report":
            manifest = commands.cmd_report(args.bundle, out)
        else:
            if not out:
                raise commands.CommandError("--out is required")
            if args.command == "synth":
                manifest = commands.cmd_synth(cfg, out)
            elif args.command == "train":
                manifest = commands.cmd_train(cfg, out)
            elif args.command == "search":
                manifest = commands.cmd_search(cfg, out)
            elif args.command == "repeat":
                manifest = commands.cmd_repeat(cfg, out, args.model)
            else:
                manifest = commands.cmd_econ(cfg, out, args.ensemble)
    except ConfigError as e:
        _fail("config", str(e))
    except commands.COMMAND_ERRORS as e:
        _fail(type(e).__name__, str(e))
    print(json.dumps({"command": args.command, "artifacts": len(manifest["artifacts"])}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
