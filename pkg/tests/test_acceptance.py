"""Acceptance suite: one test per release criterion, at its stated tolerance.

Run `pytest tests/test_acceptance.py -v` for one pass/fail line per
criterion; each test also prints a PASS line with its measured numbers
(visible with -s or in failure output).
"""

import math
import random
import time

import pytest

from audiofab import fixtures, wire
from audiofab.audiotools import AudioBuffer, apply_gain, detect_voice_activity, mix, parse_wav, write_wav
from audiofab.executor import ToolCall, ToolExecutor
from audiofab.orchestrator import Orchestrator, validate_trace
from audiofab.planner import ScriptedPlanner
from audiofab.selection import build_context, enumerate_instructions, estimate_tokens, match_tools, render_section_text

from oracle_bm25 import oracle_rank
from test_wire import invalid_frame, random_valid_message

SCENARIOS = [
    (fixtures.MUSIC_QUERY,
     ["music_style_description", "music_separation", "text2music"]),
    (fixtures.SPEECH_QUERY,
     ["speech_emotion_recognition", "asr", "text_edit", "text2speech"]),
    (fixtures.MULTIMODAL_QUERY,
     ["speech2talking_head", "audio2video"]),
]


def _report(name: str, detail: str = "") -> None:
    print(f"PASS: {name}" + (f" ({detail})" if detail else ""))


def _orchestrator(tmp_path, tag="a") -> Orchestrator:
    reg = fixtures.fixture_registry(extras=True, specials=True)
    return Orchestrator(
        reg, ScriptedPlanner(fixtures.scenario_rules()), tmp_path / f"ws_{tag}"
    )


def test_criterion_wire_round_trip():
    start = time.monotonic()
    rng = random.Random(0xA0D10)
    for _ in range(10_000):
        msg = random_valid_message(rng)
        assert wire.decode_frame(wire.encode_frame(msg)) == msg
    for _ in range(1_000):
        frame = invalid_frame(rng)
        try:
            wire.decode_frame(frame)
        except wire.WireError:
            pass
        else:
            pytest.fail(f"garbage frame decoded cleanly: {frame[:80]!r}")
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"wire criterion took {elapsed:.2f}s (limit 10s)"
    _report("wire round-trip", f"10k round-trips + 1k rejects in {elapsed:.2f}s")


def test_criterion_registry_fixture(tmp_path):
    from audiofab.registry import load_registry
    count = fixtures.write_registry(tmp_path / "registry")
    reg = load_registry(tmp_path / "registry")
    assert count == 36
    assert len(reg) == 36
    listing = enumerate_instructions(reg)
    full = sum(
        estimate_tokens(render_section_text(m, len(m.examples))) for m in reg
    )
    assert listing.token_estimate < full
    _report("registry fixture",
            f"36 tools, listing {listing.token_estimate} < full {full} tokens")


def test_criterion_selection_oracle_equivalence(registry36):
    start = time.monotonic()
    hits = 0
    for m in registry36:
        query = m.examples[0].query
        ours = match_tools(query, registry36, 5)
        ref = oracle_rank(query, registry36, 5)
        assert [n for n, _ in ours.candidates] == [n for n, _ in ref], query
        if ours.candidates and ours.candidates[0][0] == m.name:
            hits += 1
    assert hits >= 33, f"top-1 self-retrieval only {hits}/36"
    vocab = sorted({
        term for m in registry36
        for term in (m.name.split("_") + m.instruction.lower().split())
    })
    rng = random.Random(1234)
    for _ in range(100):
        query = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 6)))
        ours = match_tools(query, registry36, 5)
        ref = oracle_rank(query, registry36, 5)
        assert [n for n, _ in ours.candidates] == [n for n, _ in ref], query
    elapsed = time.monotonic() - start
    assert elapsed < 5.0, f"selection criterion took {elapsed:.2f}s (limit 5s)"
    _report("selection oracle equivalence",
            f"136 queries agree, self-retrieval {hits}/36, {elapsed:.2f}s")


def test_criterion_context_budget(registry36):
    budgets = (300, 1024, 4096)
    checked = 0
    for m in registry36:
        query = m.examples[0].query
        sel = match_tools(query, registry36, 5)
        if not sel.candidates:
            continue
        counts = []
        for budget in budgets:
            doc = build_context(query, sel, registry36, budget)
            assert doc.token_estimate <= doc.budget, (query, budget)
            assert doc.sections[0].name == sel.candidates[0][0], (query, budget)
            counts.append(len(doc.sections))
        assert counts == sorted(counts), (query, counts)
        checked += 1
    assert checked == 36
    _report("context budget", f"36 queries x {budgets}: bound, top-1, monotone")


def test_criterion_scenario_replay(tmp_path):
    orch = _orchestrator(tmp_path)
    timings = []
    for query, expected_tools in SCENARIOS:
        session = orch.create_session()
        start = time.monotonic()
        _response, trace = orch.handle_turn(session, query)
        elapsed = time.monotonic() - start
        timings.append(elapsed)
        called = [c.tool for c, _ in session.turns[0].calls]
        assert called == expected_tools, (query, called)
        assert all(r.status == "ok" for _, r in session.turns[0].calls)
        assert validate_trace(trace) == [], query
        assert elapsed < 5.0, f"scenario took {elapsed:.2f}s (limit 5s)"
    _report("scenario replay",
            "3 scenarios, " + ", ".join(f"{t:.2f}s" for t in timings))


def test_criterion_isolation(tmp_path):
    ws = tmp_path / "ws"
    ws.mkdir()
    reg = fixtures.fixture_registry(specials=True)
    executor = ToolExecutor(reg, ws)

    res_a = executor.execute(ToolCall("a", "conflict_a", {}))
    res_b = executor.execute(ToolCall("b", "conflict_b", {}))
    assert res_a.status == "ok" and res_a.payload == {"LIBVER": "1"}
    assert res_b.status == "ok" and res_b.payload == {"LIBVER": "2"}

    res_env = executor.execute(ToolCall("c", "echo_env", {}))
    assert res_env.status == "ok"
    assert set(res_env.payload) == {"PATH", "AUDIOFAB_WORKDIR"}

    start = time.monotonic()
    res_sleep = executor.execute(ToolCall("d", "sleep_forever", {}))
    sleep_elapsed = time.monotonic() - start
    assert res_sleep.status == "timeout"
    assert sleep_elapsed <= 3.0

    res_crash = executor.execute(ToolCall("e", "crash_midway", {}))
    assert res_crash.status == "error"
    res_after = executor.execute(ToolCall("f", "echo_env", {}))
    assert res_after.status == "ok"
    _report("isolation",
            f"conflicts ok, env exact, timeout {sleep_elapsed:.2f}s, crash contained")


def test_criterion_dsp_numerics():
    rng = random.Random(5150)
    for _ in range(100):
        n = rng.randint(0, 400)
        samples = [rng.uniform(-1, 1) for _ in range(n)]
        buf = AudioBuffer(sample_rate_hz=16000, samples=[samples])
        back = parse_wav(write_wav(buf, "pcm16"))
        for before, after in zip(samples, back.samples[0]):
            assert abs(before - after) <= 1 / 32768

    buf = AudioBuffer(
        sample_rate_hz=16000,
        samples=[[math.sin(i / 50) * 0.8 for i in range(800)]],
    )
    assert apply_gain(buf, 0.0).samples == buf.samples

    doubled = apply_gain(AudioBuffer(16000, [[0.25, -0.125]]), 6.0206)
    assert abs(doubled.samples[0][0] - 0.5) <= 1e-6
    assert abs(doubled.samples[0][1] + 0.25) <= 1e-6

    a = AudioBuffer(16000, [[rng.uniform(-1, 1) for _ in range(256)]])
    b = AudioBuffer(16000, [[rng.uniform(-1, 1) for _ in range(300)]])
    assert mix(a, b).samples == mix(b, a).samples

    rate = 16000
    signal = (
        [0.0] * rate
        + [0.5 * math.sin(2 * math.pi * 440 * i / rate) for i in range(rate)]
        + [0.0] * rate
    )
    segments = detect_voice_activity(AudioBuffer(rate, [signal]))
    assert len(segments) == 1
    assert abs(segments[0].start_s - 1.0) <= 0.010 + 1e-9
    assert abs(segments[0].end_s - 2.0) <= 0.010 + 1e-9
    _report("dsp numerics",
            f"pcm16 bound, gain, mix, vad [{segments[0].start_s:.3f},"
            f" {segments[0].end_s:.3f}]")


def test_criterion_replay_determinism(tmp_path):
    for query, expected_tools in SCENARIOS:
        runs = []
        for tag in ("x", "y"):
            orch = _orchestrator(tmp_path / tag, tag)
            session = orch.create_session("fixed")
            response, _ = orch.handle_turn(session, query)
            calls = [(c.tool, c.call_id) for c, _ in session.turns[0].calls]
            normalized = response.replace(str(session.workspace), "<WS>")
            runs.append((calls, normalized))
        assert runs[0] == runs[1], query
        assert [t for t, _ in runs[0][0]] == expected_tools
    _report("replay determinism", "3 scenarios identical across fresh sessions")
