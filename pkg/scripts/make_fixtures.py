#!/usr/bin/env python3
"""Materialize the demo fixtures: registry manifests, scenario rules, configs.

Writes under fixtures/ (or a given target dir):
  registry/        the 36 canonical technique manifests
  registry_full/   the same 36 plus demo extras (text_edit) and diagnostics
  rules.json       scripted planner rules for the three demo scenarios
  config.json      REPL/serve config over the canonical registry
  config_full.json same, over the full registry (needed for the speech demo)
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from audiofab import fixtures  # noqa: E402


def main() -> int:
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("fixtures")
    target.mkdir(parents=True, exist_ok=True)

    n_core = fixtures.write_registry(target / "registry")
    n_full = fixtures.write_registry(
        target / "registry_full", extras=True, specials=True
    )
    fixtures.write_rules(target / "rules.json")

    base_cfg = {
        "planner": {"backend": "scripted", "rules_file": "rules.json"},
        "budget_tokens": 4096,
        "k": 5,
        "port": 8723,
        "ui_dir": "../frontend/dist",
    }
    (target / "config.json").write_text(
        json.dumps({"registry_dir": "registry", **base_cfg}, indent=2) + "\n"
    )
    (target / "config_full.json").write_text(
        json.dumps({"registry_dir": "registry_full", **base_cfg}, indent=2) + "\n"
    )
    print(f"wrote {n_core} manifests to {target / 'registry'}")
    print(f"wrote {n_full} manifests to {target / 'registry_full'}")
    print(f"wrote {target / 'rules.json'}, config.json, config_full.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
