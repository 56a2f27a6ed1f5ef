"""Tool library: JSON manifests loaded into an immutable registry.

A registry directory holds one manifest per ``*.json`` file; a single
aggregate ``registry.json`` containing an array of manifests is also
accepted. Loading is fail-fast: one broken manifest aborts the whole load.
See docs/manifest.md for the on-disk schema.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

MODALITIES = ("speech", "sound", "music", "multimodal")
CATEGORIES = ("editing", "understanding", "generation")
PARAM_TYPES = ("string", "number", "boolean", "path", "enum")
OUTPUT_KINDS = ("text", "audio_path", "image_path", "video_path", "json")

MAX_TIMEOUT_S = 600.0
MAX_OUTPUT_BYTES = 16 * 2**20

_NAME_RE = re.compile(r"[a-z][a-z0-9_]*\Z")


class RegistryError(Exception):
    pass


class ManifestInvalid(RegistryError):
    def __init__(self, source: str, violations: list[str]):
        self.source = source
        self.violations = violations
        super().__init__(f"{source}: " + "; ".join(violations))


class DuplicateName(RegistryError):
    pass


class IoError(RegistryError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str
    required: bool
    description: str = ""
    enum_values: tuple[str, ...] = ()


@dataclass(frozen=True)
class UsageExample:
    query: str
    arguments: dict
    expected_output_kind: str


@dataclass(frozen=True)
class EnvSpec:
    """How a tool's process is launched. ``{request_file}`` in args expands
    to the per-call request file path at launch time."""

    command: str
    args: tuple[str, ...] = ()
    env_vars: dict = field(default_factory=dict)
    working_dir: str = "."
    timeout_s: float = 60.0
    max_output_bytes: int = MAX_OUTPUT_BYTES


@dataclass(frozen=True)
class ToolManifest:
    name: str
    instruction: str
    description: str
    modality: str
    category: str
    parameters: tuple[ParamSpec, ...]
    examples: tuple[UsageExample, ...]
    env: EnvSpec


def check_arguments(m: ToolManifest, args: dict, where: str) -> list[str]:
    """Validate an example's arguments against the manifest's own schema."""
    v: list[str] = []
    by_name = {p.name: p for p in m.parameters}
    for key in args:
        if key not in by_name:
            v.append(f"{where}: unknown argument {key!r}")
    for p in m.parameters:
        if p.required and p.name not in args:
            v.append(f"{where}: missing required param {p.name!r}")
    for key, value in args.items():
        p = by_name.get(key)
        if p is None:
            continue
        if p.type == "string" and not isinstance(value, str):
            v.append(f"{where}: {key} must be a string")
        elif p.type == "number" and (
            isinstance(value, bool) or not isinstance(value, (int, float))
        ):
            v.append(f"{where}: {key} must be a number")
        elif p.type == "boolean" and not isinstance(value, bool):
            v.append(f"{where}: {key} must be a boolean")
        elif p.type == "path" and (not isinstance(value, str) or not value):
            v.append(f"{where}: {key} must be a nonempty path string")
        elif p.type == "enum" and value not in p.enum_values:
            v.append(f"{where}: {key} must be one of {list(p.enum_values)}")
    return v


def validate_manifest(m: ToolManifest) -> list[str]:
    """Return all invariant violations, each as "field: rule". Empty = valid."""
    v: list[str] = []
    if not isinstance(m.name, str) or not _NAME_RE.match(m.name or ""):
        v.append("name: must match [a-z][a-z0-9_]*")
    if not isinstance(m.instruction, str) or not m.instruction.strip():
        v.append("instruction: required")
    elif len(m.instruction) > 200:
        v.append("instruction: must be <= 200 chars")
    elif "\n" in m.instruction:
        v.append("instruction: must be one line")
    if m.modality not in MODALITIES:
        v.append(f"modality: {m.modality!r} not in taxonomy {list(MODALITIES)}")
    if m.category not in CATEGORIES:
        v.append(f"category: {m.category!r} not in taxonomy {list(CATEGORIES)}")
    seen_params: set[str] = set()
    for i, p in enumerate(m.parameters):
        where = f"parameters[{i}]"
        if not isinstance(p.name, str) or not p.name:
            v.append(f"{where}: name required")
        elif p.name in seen_params:
            v.append(f"{where}: duplicate param name {p.name!r}")
        else:
            seen_params.add(p.name)
        if p.type not in PARAM_TYPES:
            v.append(f"{where}: type {p.type!r} not in {list(PARAM_TYPES)}")
        if (p.type == "enum") != bool(p.enum_values):
            v.append(f"{where}: enum_values nonempty iff type is enum")
    if not m.examples:
        v.append("examples: at least one usage example required")
    for i, ex in enumerate(m.examples):
        where = f"examples[{i}]"
        if not isinstance(ex.query, str) or not ex.query.strip():
            v.append(f"{where}: query required")
        if ex.expected_output_kind not in OUTPUT_KINDS:
            v.append(
                f"{where}: expected_output_kind {ex.expected_output_kind!r}"
                f" not in {list(OUTPUT_KINDS)}"
            )
        if not isinstance(ex.arguments, dict):
            v.append(f"{where}: arguments must be a JSON object")
        else:
            v.extend(check_arguments(m, ex.arguments, where))
    env = m.env
    if not isinstance(env.command, str) or not env.command.strip():
        v.append("env.command: required")
    if not (0 < env.timeout_s <= MAX_TIMEOUT_S):
        v.append(f"env.timeout_s: must be in (0, {MAX_TIMEOUT_S:g}]")
    if not (0 < env.max_output_bytes <= MAX_OUTPUT_BYTES):
        v.append(f"env.max_output_bytes: must be in (0, {MAX_OUTPUT_BYTES}]")
    return v


@dataclass(frozen=True)
class Registry:
    """Immutable, name-sorted collection of validated manifests."""

    tools: tuple[ToolManifest, ...] = ()

    def __len__(self) -> int:
        return len(self.tools)

    def __iter__(self):
        return iter(self.tools)

    def names(self) -> list[str]:
        return [t.name for t in self.tools]

    def get(self, name: str) -> ToolManifest | None:
        for t in self.tools:
            if t.name == name:
                return t
        return None


def manifest_from_obj(obj: dict, source: str = "<obj>") -> ToolManifest:
    """Build a ToolManifest from its JSON object form. Structural problems
    (wrong shapes, missing keys) raise ManifestInvalid immediately; value
    rules are left to validate_manifest."""
    if not isinstance(obj, dict):
        raise ManifestInvalid(source, ["manifest: must be a JSON object"])

    def _str(key: str, default: str | None = None) -> str:
        val = obj.get(key, default)
        if not isinstance(val, str):
            raise ManifestInvalid(source, [f"{key}: required string"])
        return val

    params = []
    raw_params = obj.get("parameters", [])
    if not isinstance(raw_params, list):
        raise ManifestInvalid(source, ["parameters: must be an array"])
    for i, p in enumerate(raw_params):
        if not isinstance(p, dict):
            raise ManifestInvalid(source, [f"parameters[{i}]: must be an object"])
        params.append(
            ParamSpec(
                name=p.get("name", ""),
                type=p.get("type", ""),
                required=bool(p.get("required", False)),
                description=p.get("description", ""),
                enum_values=tuple(p.get("enum_values", ())),
            )
        )
    examples = []
    raw_examples = obj.get("examples", [])
    if not isinstance(raw_examples, list):
        raise ManifestInvalid(source, ["examples: must be an array"])
    for i, ex in enumerate(raw_examples):
        if not isinstance(ex, dict):
            raise ManifestInvalid(source, [f"examples[{i}]: must be an object"])
        examples.append(
            UsageExample(
                query=ex.get("query", ""),
                arguments=ex.get("arguments", {}),
                expected_output_kind=ex.get("expected_output_kind", ""),
            )
        )
    raw_env = obj.get("env")
    if not isinstance(raw_env, dict):
        raise ManifestInvalid(source, ["env: required object"])
    env = EnvSpec(
        command=raw_env.get("command", ""),
        args=tuple(raw_env.get("args", ())),
        env_vars=dict(raw_env.get("env_vars", {})),
        working_dir=raw_env.get("working_dir", "."),
        timeout_s=float(raw_env.get("timeout_s", 60.0)),
        max_output_bytes=int(raw_env.get("max_output_bytes", MAX_OUTPUT_BYTES)),
    )
    return ToolManifest(
        name=_str("name"),
        instruction=_str("instruction"),
        description=_str("description", ""),
        modality=_str("modality"),
        category=_str("category"),
        parameters=tuple(params),
        examples=tuple(examples),
        env=env,
    )


def manifest_to_obj(m: ToolManifest) -> dict:
    obj: dict = {
        "name": m.name,
        "instruction": m.instruction,
        "description": m.description,
        "modality": m.modality,
        "category": m.category,
        "parameters": [],
        "examples": [
            {
                "query": ex.query,
                "arguments": ex.arguments,
                "expected_output_kind": ex.expected_output_kind,
            }
            for ex in m.examples
        ],
        "env": {
            "command": m.env.command,
            "args": list(m.env.args),
            "env_vars": dict(m.env.env_vars),
            "working_dir": m.env.working_dir,
            "timeout_s": m.env.timeout_s,
            "max_output_bytes": m.env.max_output_bytes,
        },
    }
    for p in m.parameters:
        pd: dict = {
            "name": p.name,
            "type": p.type,
            "required": p.required,
            "description": p.description,
        }
        if p.enum_values:
            pd["enum_values"] = list(p.enum_values)
        obj["parameters"].append(pd)
    return obj


def load_registry(dir: str | Path) -> Registry:
    """Load every manifest in `dir`, sorted by tool name.

    Deterministic for identical directory contents regardless of filesystem
    listing order. Raises ManifestInvalid on the first broken manifest
    (including duplicate names), IoError on filesystem problems.
    """
    root = Path(dir)
    if not root.is_dir():
        raise IoError(f"registry dir not found: {root}")
    manifests: list[tuple[str, ToolManifest]] = []
    try:
        files = sorted(root.glob("*.json"))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    for path in files:
        try:
            raw = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(f"{path}: {exc}") from exc
        try:
            data = json.loads(raw)
        except ValueError as exc:
            raise ManifestInvalid(str(path), [f"invalid JSON: {exc}"]) from exc
        objs = data if isinstance(data, list) else [data]
        for obj in objs:
            m = manifest_from_obj(obj, source=str(path))
            bad = validate_manifest(m)
            if bad:
                raise ManifestInvalid(str(path), bad)
            manifests.append((str(path), m))
    seen: dict[str, str] = {}
    for src, m in manifests:
        if m.name in seen:
            raise ManifestInvalid(
                src, [f"name: duplicate tool name {m.name!r} (also in {seen[m.name]})"]
            )
        seen[m.name] = src
    tools = tuple(sorted((m for _, m in manifests), key=lambda t: t.name))
    return Registry(tools=tools)


def register_tool(reg: Registry, m: ToolManifest) -> Registry:
    """Return a new registry with `m` added; `reg` itself is never mutated."""
    bad = validate_manifest(m)
    if bad:
        raise ManifestInvalid(m.name or "<manifest>", bad)
    if reg.get(m.name) is not None:
        raise DuplicateName(m.name)
    return Registry(tools=tuple(sorted(reg.tools + (m,), key=lambda t: t.name)))
