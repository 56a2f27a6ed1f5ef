"""One conversational turn through the full 13-step pipeline.

Steps 1-3 plan the request, 4-7 select tools, 8-11 invoke them, 12-13
synthesize the reply. Steps 4-11 repeat once per tool-bearing subtask
(and from step 8 on retries); every executed step emits a TraceEvent.
Subtask failures are contained: the turn always reaches steps 12-13 so
the user gets a response over whatever completed.

Sessions are in-memory plus a per-session workspace directory; one turn
may be in flight per session at a time, any number of sessions may run
concurrently.
"""

from __future__ import annotations

import json
import re
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import planner as planner_mod
from . import selection
from .executor import ToolCall, ToolExecutor, ToolResult, UnknownTool
from .planner import Plan, Subtask, TurnRecord, advance_status, validate_plan
from .registry import Registry
from .wire import UNSET

STAGE_FOR_STEP = {
    1: "task_planning", 2: "task_planning", 3: "task_planning",
    4: "tool_selection", 5: "tool_selection", 6: "tool_selection", 7: "tool_selection",
    8: "tool_invocation", 9: "tool_invocation", 10: "tool_invocation", 11: "tool_invocation",
    12: "response_generation", 13: "response_generation",
}

_PHASE = {s: (0 if s <= 3 else 1 if s <= 11 else 2) for s in range(1, 14)}


class OrchestratorError(Exception):
    pass


class TurnInFlight(OrchestratorError):
    pass


class ExecutionAborted(OrchestratorError):
    """The turn could not reach a response; carries the partial trace."""

    def __init__(self, message: str, trace: list["TraceEvent"]):
        self.trace = trace
        super().__init__(message)


@dataclass(frozen=True)
class TraceEvent:
    step: int
    stage: str
    summary: str
    at: float

    def to_obj(self) -> dict:
        return {"step": self.step, "stage": self.stage,
                "summary": self.summary, "at": self.at}


@dataclass
class Turn:
    user_text: str
    response_text: str
    plan: Plan
    calls: list[tuple[ToolCall, ToolResult]]
    trace: list[TraceEvent]


class Session:
    def __init__(self, session_id: str, workspace: Path):
        self.session_id = session_id
        self.workspace = workspace
        self.turns: list[Turn] = []
        self.turn_lock = threading.Lock()
        self.live_events: list[TraceEvent] = []

    def history(self) -> list[TurnRecord]:
        return [TurnRecord(t.user_text, t.response_text) for t in self.turns]


def validate_trace(trace: list[TraceEvent]) -> list[str]:
    """Check a completed turn's trace against the step contract.

    Rules: every step maps to its fixed stage; planning (1-3) precedes all
    selection/invocation (4-11) precedes synthesis (12-13); the middle
    region is a series of per-subtask cycles, each internally
    non-decreasing and restarting only at step 4 (new subtask) or step 8
    (retry); a step-11 result needs a step-8 request earlier in its cycle,
    every step-8 is eventually followed by a step-11; steps 1, 2, 3 and
    the terminal step 13 must be present.
    """
    v: list[str] = []
    for i, e in enumerate(trace):
        if e.step not in STAGE_FOR_STEP:
            v.append(f"[{i}] step {e.step} out of range 1..13")
        elif e.stage != STAGE_FOR_STEP[e.step]:
            v.append(
                f"[{i}] step {e.step} carries stage {e.stage!r},"
                f" expected {STAGE_FOR_STEP[e.step]!r}"
            )
    valid = [(i, e) for i, e in enumerate(trace) if e.step in STAGE_FOR_STEP]
    prev_phase = -1
    prev_step = 0
    saw8_in_cycle = False
    first_middle = True
    for i, e in valid:
        ph = _PHASE[e.step]
        if ph < prev_phase:
            v.append(f"[{i}] ordering violation: step {e.step} after stage"
                     f" {prev_phase} events")
            prev_phase = ph
            prev_step = e.step
            continue
        if ph != prev_phase:
            if ph == 1:
                if first_middle and e.step != 4:
                    v.append(f"[{i}] ordering violation: first tool cycle"
                             f" starts at step {e.step}, expected 4")
                first_middle = False
                saw8_in_cycle = e.step == 8
            prev_phase = ph
            prev_step = e.step
            if ph == 1 and e.step == 11 and not saw8_in_cycle:
                v.append(f"[{i}] ordering violation: step 11 before step 8")
            continue
        if ph in (0, 2):
            if e.step < prev_step:
                v.append(f"[{i}] ordering violation: step {e.step}"
                         f" after step {prev_step}")
        else:
            if e.step < prev_step:  # a new cycle begins
                if e.step not in (4, 8):
                    v.append(f"[{i}] ordering violation: cycle restarts"
                             f" at step {e.step}")
                saw8_in_cycle = e.step == 8
            elif e.step == 8:
                saw8_in_cycle = True
            if e.step == 11 and not saw8_in_cycle:
                v.append(f"[{i}] ordering violation: step 11 before step 8")
        prev_step = e.step
    steps_present = {e.step for _, e in valid}
    for required in (1, 2, 3):
        if required not in steps_present:
            v.append(f"missing step {required}")
    if 13 not in steps_present:
        v.append("missing terminal step 13")
    indices_11 = [i for i, e in valid if e.step == 11]
    last11 = indices_11[-1] if indices_11 else -1
    for i, e in valid:
        if e.step == 8 and i > last11:
            v.append(f"[{i}] step 8 never followed by a step 11")
    return v


_RESULT_RE = re.compile(r"\{result:([^}:]+)\}")
_ARTIFACT_RE = re.compile(r"\{artifact:([^}:]+)(?::(\d+))?\}")


class PlaceholderError(OrchestratorError):
    pass


def resolve_placeholders(
    value, workspace: Path, results: dict[str, ToolResult]
):
    """Expand {workspace}, {result:ID} and {artifact:ID[:N]} in argument
    templates. Non-strings pass through untouched."""
    if isinstance(value, dict):
        return {k: resolve_placeholders(v, workspace, results) for k, v in value.items()}
    if isinstance(value, list):
        return [resolve_placeholders(v, workspace, results) for v in value]
    if not isinstance(value, str):
        return value

    def _result_text(sid: str) -> str:
        res = results.get(sid)
        if res is None or res.status != "ok":
            raise PlaceholderError(f"no successful result for subtask {sid!r}")
        payload = res.payload
        if payload is UNSET or payload is None:
            return ""
        if isinstance(payload, str):
            return payload
        return json.dumps(payload, sort_keys=True)

    def _artifact_path(sid: str, idx: int) -> str:
        res = results.get(sid)
        if res is None or res.status != "ok":
            raise PlaceholderError(f"no successful result for subtask {sid!r}")
        if idx >= len(res.artifacts):
            raise PlaceholderError(
                f"subtask {sid!r} has no artifact #{idx}"
            )
        return res.artifacts[idx]

    out = value.replace("{workspace}", str(workspace))
    out = _RESULT_RE.sub(lambda m: _result_text(m.group(1)), out)
    out = _ARTIFACT_RE.sub(
        lambda m: _artifact_path(m.group(1), int(m.group(2) or 0)), out
    )
    return out


class Orchestrator:
    def __init__(
        self,
        registry: Registry,
        planner,
        workspace_root: str | Path,
        budget_tokens: int = 4096,
        k: int = selection.DEFAULT_K,
        max_concurrent_invocations: int = 4,
        parallel_subtasks: bool = False,
        max_retries: int = planner_mod.MAX_RETRIES,
    ):
        self.registry = registry
        self.planner = planner
        self.workspace_root = Path(workspace_root)
        self.workspace_root.mkdir(parents=True, exist_ok=True)
        self.budget_tokens = budget_tokens
        self.k = k
        self.max_concurrent = max_concurrent_invocations
        self.parallel_subtasks = parallel_subtasks
        self.max_retries = max_retries
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    # -- sessions ---------------------------------------------------------

    def create_session(self, session_id: str | None = None) -> Session:
        sid = session_id or uuid.uuid4().hex[:12]
        with self._lock:
            if sid in self._sessions:
                raise OrchestratorError(f"session {sid!r} already exists")
            workspace = self.workspace_root / sid
            workspace.mkdir(parents=True, exist_ok=True)
            session = Session(sid, workspace)
            self._sessions[sid] = session
            return session

    def get_session(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)

    # -- the turn ---------------------------------------------------------

    def handle_turn(
        self, session: Session, input: str, on_event=None
    ) -> tuple[str, list[TraceEvent]]:
        if not input or not input.strip():
            raise OrchestratorError("input must be nonempty")
        if not session.turn_lock.acquire(blocking=False):
            raise TurnInFlight(session.session_id)
        try:
            return self._run_turn(session, input, on_event)
        finally:
            session.turn_lock.release()

    def _run_turn(self, session, input, on_event):
        trace: list[TraceEvent] = []
        session.live_events = trace
        emit_lock = threading.Lock()

        def emit(step: int, summary: str) -> None:
            event = TraceEvent(
                step=step, stage=STAGE_FOR_STEP[step],
                summary=summary, at=time.monotonic(),
            )
            with emit_lock:
                trace.append(event)
                if on_event is not None:
                    try:
                        on_event(event)
                    except Exception:
                        pass  # a broken observer must not abort the turn

        emit(1, f"received user input ({len(input)} chars)")

        try:
            sel = selection.match_tools(input, self.registry, self.k)
        except selection.EmptyRegistry:
            sel = selection.SelectionResult(query=input, candidates=(), k_requested=self.k)
        context = selection.build_context(input, sel, self.registry, self.budget_tokens)
        emit(2, f"forwarded to planner with context of {len(context.sections)}"
                f" tool section(s), ~{context.token_estimate} tokens")

        plan = self.planner.plan_task(input, context, session.history())
        problems = validate_plan(plan)
        if problems:
            raise planner_mod.UnparseablePlan("; ".join(problems))
        emit(3, f"plan {plan.plan_id!r} with {len(plan.subtasks)} subtask(s)")

        executor = ToolExecutor(
            self.registry, session.workspace, max_concurrent=self.max_concurrent
        )
        results: dict[str, ToolResult] = {}
        calls: list[tuple[ToolCall, ToolResult]] = []
        state_lock = threading.Lock()

        def run_subtask(sub: Subtask, buffer: list | None = None) -> None:
            """Execute one subtask; events go through `out` so parallel
            runs can buffer and flush atomically."""
            out = (lambda s, m: buffer.append((s, m))) if buffer is not None else emit
            attempts = 0
            while True:
                out(4, f"forwarded subtask {sub.id} to the tool server")
                out(5, f"translated subtask {sub.id} into a tool command")
                try:
                    detail = selection.query_parameters(self.registry, sub.tool_hint)
                except selection.UnknownTool:
                    with state_lock:
                        results[sub.id] = ToolResult(
                            call_id=f"{plan.plan_id}.{sub.id}",
                            status="error",
                            stderr_excerpt=f"unknown tool {sub.tool_hint!r}",
                        )
                        advance_status(sub, "failed")
                    return
                sub_sel = selection.match_tools(
                    f"{sub.description} {sub.tool_hint}", self.registry, self.k
                )
                out(6, f"enumerated {len(self.registry)} tools, matched"
                       f" {len(sub_sel.candidates)}, queried {sub.tool_hint}")
                sub_ctx = selection.build_context(
                    sub.description, sub_sel, self.registry, self.budget_tokens
                )
                out(7, f"returned instructions and {len(detail.examples)}"
                       f" example(s) for {sub.tool_hint}")

                raw_args = self.planner.arguments_for(plan, sub)
                try:
                    with state_lock:
                        arguments = resolve_placeholders(
                            raw_args, session.workspace, results
                        )
                except PlaceholderError as exc:
                    result = ToolResult(
                        call_id=f"{plan.plan_id}.{sub.id}.{attempts}",
                        status="error",
                        stderr_excerpt=str(exc),
                    )
                else:
                    call = ToolCall(
                        call_id=f"{plan.plan_id}.{sub.id}.{attempts}",
                        tool=sub.tool_hint,
                        arguments=arguments,
                    )
                    out(8, f"structured tool request for {sub.tool_hint}"
                           f" (call {call.call_id})")
                    out(9, f"server accepted call {call.call_id}")
                    out(10, f"invoking {sub.tool_hint} in its isolated environment")
                    try:
                        result = executor.execute(call)
                    except UnknownTool:
                        result = ToolResult(
                            call_id=call.call_id, status="error",
                            stderr_excerpt=f"unknown tool {sub.tool_hint!r}",
                        )
                    out(11, f"{sub.tool_hint} returned {result.status}"
                            f" in {result.duration_ms} ms")
                    with state_lock:
                        calls.append((call, result))

                revision = planner_mod.evaluate_and_revise(
                    self.planner, plan, sub.id, result, attempts,
                    max_retries=self.max_retries,
                )
                if revision.action == "continue":
                    with state_lock:
                        results[sub.id] = result
                        advance_status(sub, "done")
                    return
                if revision.action == "retry_subtask":
                    attempts += 1
                    continue
                with state_lock:
                    results[sub.id] = result
                    advance_status(sub, "failed")
                    if revision.action == "replan" and revision.replacement:
                        suffix = revision.replacement.subtasks
                        existing = {s.id for s in plan.subtasks}
                        if all(s.id not in existing for s in suffix):
                            plan.subtasks.extend(suffix)
                return

        def deps_blocked(sub: Subtask) -> bool:
            return any(
                (plan.get(d) is None) or plan.get(d).status in ("failed", "skipped")
                for d in sub.depends_on
            )

        def deps_finished(sub: Subtask) -> bool:
            return all(
                plan.get(d) is not None and plan.get(d).status in
                ("done", "failed", "skipped")
                for d in sub.depends_on
            )

        if not self.parallel_subtasks:
            idx = 0
            while idx < len(plan.subtasks):
                sub = plan.subtasks[idx]
                idx += 1
                if sub.status != "pending":
                    continue
                if deps_blocked(sub):
                    advance_status(sub, "skipped")
                    continue
                advance_status(sub, "running")
                if sub.tool_hint is None:
                    results[sub.id] = ToolResult(
                        call_id=f"{plan.plan_id}.{sub.id}.direct",
                        status="ok",
                        payload={"note": "answered directly, no tool required"},
                    )
                    advance_status(sub, "done")
                    continue
                run_subtask(sub)
        else:
            pool = ThreadPoolExecutor(max_workers=self.max_concurrent)
            try:
                pending_futures = {}
                while True:
                    progressed = False
                    for sub in list(plan.subtasks):
                        if sub.status != "pending" or sub.id in pending_futures:
                            continue
                        if deps_blocked(sub):
                            advance_status(sub, "skipped")
                            progressed = True
                        elif deps_finished(sub):
                            advance_status(sub, "running")
                            if sub.tool_hint is None:
                                results[sub.id] = ToolResult(
                                    call_id=f"{plan.plan_id}.{sub.id}.direct",
                                    status="ok",
                                    payload={"note": "answered directly, no tool required"},
                                )
                                advance_status(sub, "done")
                                progressed = True
                                continue

                            def job(s=sub):
                                buffer: list = []
                                try:
                                    run_subtask(s, buffer)
                                finally:
                                    for step, summary in buffer:
                                        emit(step, summary)

                            pending_futures[sub.id] = pool.submit(job)
                            progressed = True
                    done_ids = [
                        sid for sid, fut in pending_futures.items() if fut.done()
                    ]
                    for sid in done_ids:
                        pending_futures.pop(sid).result()
                        progressed = True
                    if not any(s.status == "pending" for s in plan.subtasks) and not pending_futures:
                        break
                    if not progressed:
                        time.sleep(0.01)
            finally:
                pool.shutdown(wait=True)

        emit(12, "sent formatted tool results to the planner")
        outcome = [(sub, results.get(sub.id)) for sub in plan.subtasks]
        try:
            response = self.planner.synthesize_response(input, outcome)
        except planner_mod.PlannerError as exc:
            raise ExecutionAborted(
                f"response synthesis failed: {exc}", trace
            ) from exc
        emit(13, "delivered final response to the user")

        session.turns.append(
            Turn(user_text=input, response_text=response, plan=plan,
                 calls=calls, trace=trace)
        )
        return response, trace
