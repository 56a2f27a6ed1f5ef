"""Task planning: decomposition, revision on feedback, response synthesis.

Two interchangeable backends produce plans:

* ScriptedPlanner -- a rules file maps query patterns (exact string or
  token-subset) to canned plans, with per-subtask argument templates.
  Fully deterministic; this is what every automated scenario runs on.
* LlmPlanner -- posts the planning prompt to a chat-completions endpoint
  and parses the strict-JSON plan out of the reply.

Plans are strict JSON. A reply that is not a valid plan is rejected
(after fence-stripping), not repaired.
"""

from __future__ import annotations

import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .executor import ToolResult
from .wire import UNSET
from .selection import ContextDocument, tokenize

MAX_RETRIES = 2
MAX_PARSE_RETRIES = 2

TERMINAL_STATUSES = ("done", "failed", "skipped")
_STATUSES = ("pending", "running", "done", "failed", "skipped")

# legal status transitions; skipped additionally needs a failed dependency
_TRANSITIONS = {
    ("pending", "running"),
    ("running", "done"),
    ("running", "failed"),
    ("pending", "skipped"),
}


class PlannerError(Exception):
    pass


class PlannerUnavailable(PlannerError):
    pass


class UnparseablePlan(PlannerError):
    def __init__(self, message: str, position: int = -1):
        self.position = position
        super().__init__(
            f"{message} (at offset {position})" if position >= 0 else message
        )


class IllegalTransition(PlannerError):
    pass


@dataclass
class Subtask:
    id: str
    description: str
    tool_hint: str | None = None
    depends_on: tuple[str, ...] = ()
    status: str = "pending"


@dataclass
class Plan:
    plan_id: str
    subtasks: list[Subtask] = field(default_factory=list)

    def get(self, subtask_id: str) -> Subtask | None:
        for s in self.subtasks:
            if s.id == subtask_id:
                return s
        return None


@dataclass(frozen=True)
class Revision:
    action: str  # continue | retry_subtask | replan | abort
    replacement: Plan | None = None
    reason: str = ""


def advance_status(sub: Subtask, new_status: str) -> None:
    """Move a subtask along the status automaton; illegal moves raise."""
    if new_status not in _STATUSES:
        raise IllegalTransition(f"unknown status {new_status!r}")
    if (sub.status, new_status) not in _TRANSITIONS:
        raise IllegalTransition(f"{sub.id}: {sub.status} -> {new_status}")
    sub.status = new_status


def validate_plan(plan: Plan) -> list[str]:
    v: list[str] = []
    if not plan.plan_id or not isinstance(plan.plan_id, str):
        v.append("plan_id: required nonempty string")
    if not plan.subtasks:
        v.append("subtasks: at least one required")
    seen: set[str] = set()
    for i, sub in enumerate(plan.subtasks):
        where = f"subtasks[{i}]"
        if not sub.id or not isinstance(sub.id, str):
            v.append(f"{where}: id required")
            continue
        if sub.id in seen:
            v.append(f"{where}: duplicate id {sub.id!r}")
        if not isinstance(sub.description, str) or not sub.description:
            v.append(f"{where}: description required")
        for dep in sub.depends_on:
            if dep == sub.id:
                v.append(f"{where}: depends on itself")
            elif dep not in seen:
                v.append(f"{where}: dangling dependency {dep!r}")
        if sub.status not in _STATUSES:
            v.append(f"{where}: unknown status {sub.status!r}")
        seen.add(sub.id)
    return v


def _subtask_from_obj(obj: dict, where: str) -> tuple[Subtask, dict | None]:
    if not isinstance(obj, dict):
        raise UnparseablePlan(f"{where}: subtask must be an object")
    hint = obj.get("tool_hint", obj.get("tool"))
    deps = obj.get("depends_on", [])
    if not isinstance(deps, list) or not all(isinstance(d, str) for d in deps):
        raise UnparseablePlan(f"{where}: depends_on must be a list of ids")
    arguments = obj.get("arguments")
    if arguments is not None and not isinstance(arguments, dict):
        raise UnparseablePlan(f"{where}: arguments must be an object")
    sub = Subtask(
        id=str(obj.get("id", "")),
        description=str(obj.get("description", "")),
        tool_hint=hint if isinstance(hint, str) and hint else None,
        depends_on=tuple(deps),
    )
    return sub, arguments


def plan_from_obj(obj: dict) -> tuple[Plan, dict[str, dict]]:
    """Build a Plan from its JSON object form; returns (plan, argument
    templates keyed by subtask id)."""
    if not isinstance(obj, dict):
        raise UnparseablePlan("plan must be a JSON object")
    raw_subs = obj.get("subtasks")
    if not isinstance(raw_subs, list):
        raise UnparseablePlan("subtasks: required array")
    subtasks: list[Subtask] = []
    args_map: dict[str, dict] = {}
    for i, raw in enumerate(raw_subs):
        sub, arguments = _subtask_from_obj(raw, f"subtasks[{i}]")
        subtasks.append(sub)
        if arguments is not None:
            args_map[sub.id] = arguments
    plan = Plan(plan_id=str(obj.get("plan_id", "")), subtasks=subtasks)
    problems = validate_plan(plan)
    if problems:
        raise UnparseablePlan("; ".join(problems))
    return plan, args_map


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n?")


def parse_plan(text: str) -> Plan:
    """Extract the first JSON object from free text and validate it as a Plan.

    Markdown code fences are tolerated; anything else around the JSON is
    ignored. No other repair is attempted.
    """
    stripped = _FENCE_RE.sub("", text or "")
    decoder = json.JSONDecoder()
    idx = stripped.find("{")
    last_error: tuple[str, int] | None = None
    while idx != -1:
        try:
            obj, _end = decoder.raw_decode(stripped, idx)
        except ValueError as exc:
            last_error = (f"invalid JSON: {exc}", idx)
        else:
            if isinstance(obj, dict):
                plan, _args = plan_from_obj(obj)
                return plan
            last_error = ("first JSON value is not an object", idx)
        idx = stripped.find("{", idx + 1)
    if last_error:
        raise UnparseablePlan(*last_error)
    raise UnparseablePlan("no JSON object found in text", 0)


@dataclass(frozen=True)
class TurnRecord:
    """One prior conversational turn, as planning history."""

    user_text: str
    response_text: str


class ScriptedPlanner:
    """Deterministic rules-file backend.

    Each rule carries a match condition (exact query, token subset, or
    always), the plan to emit, per-subtask argument templates, and
    optionally replacement suffixes for failed subtasks.
    """

    backend_name = "scripted"

    def __init__(self, rules: dict | str | Path):
        if not isinstance(rules, dict):
            try:
                rules = json.loads(Path(rules).read_text(encoding="utf-8"))
            except OSError as exc:
                raise PlannerUnavailable(f"rules file unreadable: {exc}") from exc
            except ValueError as exc:
                raise PlannerUnavailable(f"rules file invalid JSON: {exc}") from exc
        self.rules = rules.get("rules", [])
        self._arguments: dict[str, dict[str, dict]] = {}
        self._replans: dict[str, dict] = {}
        for rule in self.rules:
            plan_obj = rule.get("plan", {})
            plan, args_map = plan_from_obj(plan_obj)
            self._arguments[plan.plan_id] = args_map
            if "replan" in rule:
                self._replans[plan.plan_id] = rule["replan"]

    @staticmethod
    def _matches(match: dict, query: str) -> bool:
        if match.get("always"):
            return True
        if "exact" in match:
            return query.strip() == match["exact"]
        if "tokens_all" in match:
            qtokens = set(tokenize(query))
            return all(tok in qtokens for tok in match["tokens_all"])
        return False

    def plan_task(
        self,
        query: str,
        context: ContextDocument | None = None,
        history: list[TurnRecord] | None = None,
    ) -> Plan:
        for rule in self.rules:
            if self._matches(rule.get("match", {}), query):
                plan, _ = plan_from_obj(rule["plan"])
                return plan
        # nothing matched: answer directly, without tools
        return Plan(
            plan_id="direct_answer",
            subtasks=[
                Subtask(
                    id="s1",
                    description="answer the request directly without invoking any tool",
                )
            ],
        )

    def arguments_for(self, plan: Plan, subtask: Subtask) -> dict:
        return dict(self._arguments.get(plan.plan_id, {}).get(subtask.id, {}))

    def can_replan(self, plan: Plan, failed_id: str) -> bool:
        return failed_id in self._replans.get(plan.plan_id, {})

    def replacement_suffix(self, plan: Plan, failed_id: str) -> Plan | None:
        spec = self._replans.get(plan.plan_id, {}).get(failed_id)
        if spec is None:
            return None
        suffix_subs: list[Subtask] = []
        for i, raw in enumerate(spec.get("subtasks", [])):
            sub, arguments = _subtask_from_obj(raw, f"replan[{i}]")
            suffix_subs.append(sub)
            if arguments is not None:
                self._arguments.setdefault(plan.plan_id, {})[sub.id] = arguments
        if not suffix_subs:
            return None
        return Plan(plan_id=f"{plan.plan_id}+replan", subtasks=suffix_subs)

    def synthesize_response(
        self, query: str, results: list[tuple[Subtask, ToolResult | None]]
    ) -> str:
        done = [(s, r) for s, r in results if s.status == "done"]
        failed = [(s, r) for s, r in results if s.status == "failed"]
        skipped = [s for s, _ in results if s.status == "skipped"]
        lines: list[str] = []
        if failed and not done:
            first = failed[0][1]
            detail = first.stderr_excerpt.strip() if first else ""
            lines.append(f"I could not complete the request: {detail or 'all steps failed.'}")
        else:
            lines.append(f"Here is what I did for: {query}")
        for sub, res in results:
            label = f"[{sub.tool_hint}] " if sub.tool_hint else ""
            if sub.status == "done":
                lines.append(f"- {sub.id} {label}{sub.description}: done")
                if res is not None and res.artifacts:
                    for a in res.artifacts:
                        lines.append(f"    artifact: {a}")
            elif sub.status == "failed":
                detail = (res.stderr_excerpt.strip() or res.status) if res else "failed"
                lines.append(f"- {sub.id} {label}{sub.description}: FAILED ({detail})")
            elif sub.status == "skipped":
                lines.append(f"- {sub.id} {label}{sub.description}: skipped (dependency failed)")
        artifacts = [a for _, r in done if r is not None for a in r.artifacts]
        if artifacts:
            lines.append("Artifacts: " + ", ".join(artifacts))
        if skipped and not failed:
            lines.append("Some steps were skipped.")
        return "\n".join(lines)


def _load_prompt(name: str) -> str:
    return (
        resources.files("audiofab").joinpath("prompts", name).read_text(encoding="utf-8")
    )


class LlmPlanner:
    """Chat-completions backend: one POST per planning / synthesis call."""

    backend_name = "llm"

    def __init__(
        self,
        url: str,
        model: str = "default",
        api_key: str | None = None,
        timeout_s: float = 60.0,
    ):
        self.url = url
        self.model = model
        self.api_key = api_key
        self.timeout_s = timeout_s

    def _chat(self, messages: list[dict]) -> str:
        body = json.dumps({"model": self.model, "messages": messages}).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        if self.api_key:
            req.add_header("Authorization", f"Bearer {self.api_key}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                data = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise PlannerUnavailable(f"LLM endpoint failed: {exc}") from exc
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise PlannerUnavailable(f"malformed completion response: {exc}") from exc

    def plan_task(
        self,
        query: str,
        context: ContextDocument | None = None,
        history: list[TurnRecord] | None = None,
    ) -> Plan:
        template = _load_prompt("planning.txt")
        prompt = template.format(
            tool_context=context.render() if context else "(no tools matched)",
        )
        messages: list[dict] = [{"role": "system", "content": prompt}]
        for turn in history or []:
            messages.append({"role": "user", "content": turn.user_text})
            messages.append({"role": "assistant", "content": turn.response_text})
        messages.append({"role": "user", "content": query})
        self._last_arguments: dict[str, dict] = {}
        last_exc: UnparseablePlan | None = None
        for _attempt in range(1 + MAX_PARSE_RETRIES):
            content = self._chat(messages)
            try:
                stripped = _FENCE_RE.sub("", content)
                idx = stripped.find("{")
                if idx == -1:
                    raise UnparseablePlan("no JSON object found in text", 0)
                obj, _ = json.JSONDecoder().raw_decode(stripped, idx)
                plan, args_map = plan_from_obj(obj)
                self._last_arguments = args_map
                return plan
            except (ValueError, UnparseablePlan) as exc:
                last_exc = exc if isinstance(exc, UnparseablePlan) else UnparseablePlan(str(exc))
                messages.append({"role": "assistant", "content": content})
                messages.append({
                    "role": "user",
                    "content": f"That was not a valid plan ({last_exc}). "
                    "Reply with ONLY the JSON plan object.",
                })
        raise last_exc or UnparseablePlan("no parseable plan")

    def arguments_for(self, plan: Plan, subtask: Subtask) -> dict:
        return dict(getattr(self, "_last_arguments", {}).get(subtask.id, {}))

    def can_replan(self, plan: Plan, failed_id: str) -> bool:
        return True

    def replacement_suffix(self, plan: Plan, failed_id: str) -> Plan | None:
        failed = plan.get(failed_id)
        prompt = (
            "A subtask of the current plan failed and will not be retried.\n"
            f"Failed subtask: {json.dumps({'id': failed_id, 'description': failed.description if failed else ''})}\n"
            'Reply with ONLY a JSON object {"subtasks": [...]} holding replacement '
            "subtasks (same schema as before, ids must be new)."
        )
        try:
            content = self._chat([{"role": "user", "content": prompt}])
            stripped = _FENCE_RE.sub("", content)
            idx = stripped.find("{")
            if idx == -1:
                return None
            obj, _ = json.JSONDecoder().raw_decode(stripped, idx)
            subs = []
            for i, raw in enumerate(obj.get("subtasks", [])):
                sub, arguments = _subtask_from_obj(raw, f"replan[{i}]")
                subs.append(sub)
                if arguments is not None:
                    getattr(self, "_last_arguments", {})[sub.id] = arguments
            return Plan(plan_id=f"{plan.plan_id}+replan", subtasks=subs) if subs else None
        except (PlannerUnavailable, UnparseablePlan, ValueError):
            return None

    def synthesize_response(
        self, query: str, results: list[tuple[Subtask, ToolResult | None]]
    ) -> str:
        template = _load_prompt("synthesis.txt")
        summary = []
        for sub, res in results:
            entry = {
                "id": sub.id,
                "description": sub.description,
                "tool": sub.tool_hint,
                "status": sub.status,
            }
            if res is not None:
                entry["artifacts"] = list(res.artifacts)
                if res.status != "ok":
                    entry["error"] = res.stderr_excerpt
                elif res.payload is not UNSET:
                    entry["payload"] = res.payload
            summary.append(entry)
        prompt = template.format(query=query, results=json.dumps(summary, indent=2))
        return self._chat([{"role": "user", "content": prompt}])



def evaluate_and_revise(
    backend,
    plan: Plan,
    finished: str,
    result: ToolResult,
    retries_so_far: int,
    max_retries: int = MAX_RETRIES,
) -> Revision:
    """The feedback policy: keep going on success, retry a bounded number
    of times on failure, then replan if the backend can, else abort."""
    sub = plan.get(finished)
    if sub is None:
        raise PlannerError(f"unknown subtask {finished!r}")
    if result.status == "ok":
        return Revision(action="continue", reason="subtask succeeded")
    if retries_so_far < max_retries:
        return Revision(
            action="retry_subtask",
            reason=f"{result.status} on attempt {retries_so_far + 1}",
        )
    if backend.can_replan(plan, finished):
        suffix = backend.replacement_suffix(plan, finished)
        if suffix is not None:
            return Revision(
                action="replan", replacement=suffix, reason="retries exhausted"
            )
    return Revision(action="abort", reason="retries exhausted, no replan available")
