"""Command line entry point.

  audiofab chat  --config cfg.json          interactive REPL
  audiofab serve --config cfg.json [--port] HTTP service (+ web UI)
  audiofab tools list   [--config]          one line per registered tool
  audiofab tools match "<query>" [-k N]     rank tools for a query
  audiofab validate <manifest.json>         check one manifest file

Exit codes: 0 ok, 1 runtime failure, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import gateway, selection
from .gateway import Config, ConfigInvalid, load_config
from .registry import load_registry, manifest_from_obj, validate_manifest


def _load_cfg(path: str) -> Config:
    return load_config(path)


def _cmd_chat(ns) -> int:
    try:
        cfg = _load_cfg(ns.config)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return gateway.run_repl(cfg)


def _cmd_serve(ns) -> int:
    try:
        cfg = _load_cfg(ns.config)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if ns.port is not None:
        cfg.port = ns.port
    return gateway.serve(cfg)


def _registry_from_config(ns):
    cfg = _load_cfg(ns.config)
    return load_registry(cfg.registry_dir)


def _cmd_tools_list(ns) -> int:
    try:
        reg = _registry_from_config(ns)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    listing = selection.enumerate_instructions(reg)
    for name, instruction in listing.entries:
        print(f"{name}: {instruction}")
    return 0

def _cmd_tools_match(ns) -> int:
    try:
        reg = _registry_from_config(ns)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result = selection.match_tools(ns.query, reg, ns.k)
    except selection.SelectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not result.candidates:
        print("(no tool matched)")
        return 0
    for rank, (name, score) in enumerate(result.candidates, start=1):
        print(f"{rank:>2}. {name}  (score {score:.4f})")
    return 0


def _cmd_validate(ns) -> int:
    path = Path(ns.manifest)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"invalid JSON: {exc}", file=sys.stderr)
        return 1
    objs = data if isinstance(data, list) else [data]
    all_ok = True
    for i, obj in enumerate(objs):
        label = f"{path}[{i}]" if isinstance(data, list) else str(path)
        try:
            manifest = manifest_from_obj(obj, source=label)
        except Exception as exc:
            print(f"{label}: {exc}")
            all_ok = False
            continue
        problems = validate_manifest(manifest)
        if problems:
            all_ok = False
            for p in problems:
                print(f"{label}: {p}")
        else:
            print(f"{label}: ok ({manifest.name})")
    return 0 if all_ok else 1


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="audiofab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p_chat = sub.add_parser("chat", help="interactive REPL")
    p_chat.add_argument("--config", default="config.json")
    p_chat.set_defaults(func=_cmd_chat)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--config", default="config.json")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.set_defaults(func=_cmd_serve)

    p_tools = sub.add_parser("tools", help="inspect the tool registry")
    tools_sub = p_tools.add_subparsers(dest="tools_command", required=True)
    p_list = tools_sub.add_parser("list")
    p_list.add_argument("--config", default="config.json")
    p_list.set_defaults(func=_cmd_tools_list)
    p_match = tools_sub.add_parser("match")
    p_match.add_argument("query")
    p_match.add_argument("-k", type=int, default=selection.DEFAULT_K)
    p_match.add_argument("--config", default="config.json")
    p_match.set_defaults(func=_cmd_tools_match)

    p_val = sub.add_parser("validate", help="validate a manifest JSON file")
    p_val.add_argument("manifest")
    p_val.set_defaults(func=_cmd_validate)

    ns = ap.parse_args(argv)
    try:
        return ns.func(ns)
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
