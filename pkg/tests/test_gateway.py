import json
import re
import subprocess
import sys
import threading
import time
import urllib.error
import urllib.request
from pathlib import Path

import pytest

from audiofab import fixtures
from audiofab.gateway import ApiServer, ConfigInvalid, load_config


def write_config(tmp_path, registry_kwargs=None, **overrides) -> Path:
    registry_dir = tmp_path / "registry"
    fixtures.write_registry(registry_dir, **(registry_kwargs or {}))
    rules_path = tmp_path / "rules.json"
    fixtures.write_rules(rules_path)
    cfg = {
        "registry_dir": "registry",
        "planner": {"backend": "scripted", "rules_file": "rules.json"},
        "workspace_root": "workspaces",
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


# --- load_config ---------------------------------------------------------------

def test_minimal_config_fills_defaults(tmp_path):
    path = write_config(tmp_path)
    cfg = load_config(path)
    assert cfg.budget_tokens == 4096
    assert cfg.k == 5
    assert cfg.max_concurrent_invocations == 4
    assert cfg.registry_dir == str(tmp_path / "registry")
    assert cfg.planner.rules_file == str(tmp_path / "rules.json")


def test_llm_backend_requires_url(tmp_path, monkeypatch):
    monkeypatch.delenv("AUDIOFAB_LLM_URL", raising=False)
    path = write_config(tmp_path, planner={"backend": "llm"})
    with pytest.raises(ConfigInvalid) as exc:
        load_config(path)
    assert any("llm_url" in p for p in exc.value.problems)


def test_env_var_overrides_llm_url(tmp_path, monkeypatch):
    monkeypatch.setenv("AUDIOFAB_LLM_URL", "http://llm.example/v1")
    monkeypatch.setenv("AUDIOFAB_LLM_KEY", "sk-test")
    path = write_config(tmp_path, planner={"backend": "llm"})
    cfg = load_config(path)
    assert cfg.planner.llm_url == "http://llm.example/v1"
    assert cfg.planner.api_key == "sk-test"


def test_budget_below_floor_is_invalid(tmp_path):
    path = write_config(tmp_path, budget_tokens=100)
    with pytest.raises(ConfigInvalid) as exc:
        load_config(path)
    assert any("budget_tokens" in p for p in exc.value.problems)


def test_scripted_requires_rules_file(tmp_path):
    path = write_config(tmp_path, planner={"backend": "scripted"})
    with pytest.raises(ConfigInvalid):
        load_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "nope.json")


# --- CLI -------------------------------------------------------------------------

def run_cli(args, tmp_path, stdin=""):
    return subprocess.run(
        [sys.executable, "-m", "audiofab.cli"] + args,
        input=stdin, capture_output=True, text=True, cwd=tmp_path, timeout=60,
    )


def test_cli_tools_list_prints_36_lines(tmp_path):
    path = write_config(tmp_path)
    proc = run_cli(["tools", "list", "--config", str(path)], tmp_path)
    assert proc.returncode == 0
    lines = [l for l in proc.stdout.splitlines() if l.strip()]
    assert len(lines) == 36
    assert all(re.match(r"^[a-z][a-z0-9_]*: ", l) for l in lines)


def test_cli_tools_match(tmp_path):
    path = write_config(tmp_path)
    proc = run_cli(
        ["tools", "match", "separate vocals from accompaniment", "-k", "3",
         "--config", str(path)],
        tmp_path,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0].strip().startswith("1. music_separation")


def test_cli_validate_good_manifest(tmp_path):
    from audiofab.registry import manifest_to_obj
    manifest_path = tmp_path / "m.json"
    manifest_path.write_text(json.dumps(
        manifest_to_obj(fixtures.fixture_manifests()[0])
    ))
    proc = run_cli(["validate", str(manifest_path)], tmp_path)
    assert proc.returncode == 0
    assert ": ok" in proc.stdout


def test_cli_validate_bad_manifest(tmp_path):
    manifest_path = tmp_path / "bad.json"
    obj = {"name": "Bad Name", "instruction": "x", "description": "",
           "modality": "video", "category": "editing",
           "parameters": [], "examples": [], "env": {"command": ""}}
    manifest_path.write_text(json.dumps(obj))
    proc = run_cli(["validate", str(manifest_path)], tmp_path)
    assert proc.returncode == 1
    assert "modality" in proc.stdout


def test_cli_missing_config_exits_2(tmp_path):
    proc = run_cli(["tools", "list", "--config", "missing.json"], tmp_path)
    assert proc.returncode == 2


def test_repl_tools_and_quit(tmp_path):
    path = write_config(tmp_path)
    proc = run_cli(["chat", "--config", str(path)], tmp_path,
                   stdin=":tools\n:quit\n")
    assert proc.returncode == 0
    tool_lines = [
        l for l in proc.stdout.splitlines() if re.match(r"^[a-z][a-z0-9_]*: ", l)
    ]
    assert len(tool_lines) == 36


def test_repl_runs_scenario_and_trace(tmp_path):
    path = write_config(tmp_path, registry_kwargs={"extras": True})
    stdin = fixtures.MUSIC_QUERY + "\n:trace\n:quit\n"
    proc = run_cli(["chat", "--config", str(path)], tmp_path, stdin=stdin)
    assert proc.returncode == 0
    assert "text2music.wav" in proc.stdout
    assert "step 13" in proc.stdout


def test_repl_bad_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"registry_dir": "registry",
                               "planner": {"backend": "scripted"}}))
    proc = run_cli(["chat", "--config", str(bad)], tmp_path)
    assert proc.returncode == 2


# --- HTTP service -----------------------------------------------------------------

@pytest.fixture()
def api(tmp_path):
    config_path = write_config(tmp_path, registry_kwargs={"extras": True}, port=0)
    cfg = load_config(config_path)
    server = ApiServer(cfg)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base
    server.shutdown()
    server.server_close()


def http(method, url, body=None, timeout=30):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(url, data=data, method=method)
    if data:
        req.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read().decode() or "{}")


def test_tools_endpoint_lists_all(api):
    status, body = http("GET", f"{api}/v1/tools")
    assert status == 200
    assert len(body["entries"]) == 37  # 36 + text_edit demo extra
    assert body["token_estimate"] > 0


def test_tools_detail_endpoint(api):
    status, body = http("GET", f"{api}/v1/tools/text2speech")
    assert status == 200
    assert body["modality"] == "speech"
    assert [p["name"] for p in body["parameters"]] == ["text", "voice"]
    status, _ = http("GET", f"{api}/v1/tools/unknown_tool")
    assert status == 404


def test_message_turn_and_trace(api):
    _, session = http("POST", f"{api}/v1/sessions")
    sid = session["session_id"]
    status, body = http(
        "POST", f"{api}/v1/sessions/{sid}/messages",
        {"text": fixtures.MUSIC_QUERY},
    )
    assert status == 200
    assert body["turn_id"] == 0
    assert [c["tool"] for c in body["calls"]] == [
        "music_style_description", "music_separation", "text2music",
    ]
    assert body["trace_ok"] is True
    status, trace = http("GET", f"{api}/v1/sessions/{sid}/trace?turn=0")
    assert status == 200
    steps = [e["step"] for e in trace]
    assert steps[0] == 1 and steps[-1] == 13


def test_unknown_session_404(api):
    status, _ = http("GET", f"{api}/v1/sessions/nope/trace")
    assert status == 404
    status, _ = http("POST", f"{api}/v1/sessions/nope/messages", {"text": "hi"})
    assert status == 404


def test_malformed_body_400(api):
    _, session = http("POST", f"{api}/v1/sessions")
    sid = session["session_id"]
    status, _ = http("POST", f"{api}/v1/sessions/{sid}/messages", {"nope": 1})
    assert status == 400


def test_concurrent_turns_one_409(api):
    _, session = http("POST", f"{api}/v1/sessions")
    sid = session["session_id"]
    statuses = []

    def send():
        status, _ = http(
            "POST", f"{api}/v1/sessions/{sid}/messages",
            {"text": fixtures.MUSIC_QUERY},
        )
        statuses.append(status)

    threads = [threading.Thread(target=send) for _ in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(statuses) == [200, 409]


def test_artifact_route_serves_files_and_blocks_escape(api, tmp_path):
    _, session = http("POST", f"{api}/v1/sessions")
    sid = session["session_id"]
    _, body = http(
        "POST", f"{api}/v1/sessions/{sid}/messages", {"text": fixtures.MUSIC_QUERY}
    )
    artifact_urls = [u for c in body["calls"] for u in c["artifacts"]]
    assert artifact_urls
    with urllib.request.urlopen(f"{api}{artifact_urls[0]}", timeout=10) as resp:
        assert resp.status == 200
        assert len(resp.read()) > 0
    req = urllib.request.Request(
        f"{api}/v1/sessions/{sid}/artifacts/../../../etc/hostname"
    )
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            fetched = resp.status, resp.read()
    except urllib.error.HTTPError as exc:
        fetched = exc.code, b""
    assert fetched[0] == 404


def test_sse_stream_delivers_trace_events(api):
    _, session = http("POST", f"{api}/v1/sessions")
    sid = session["session_id"]
    events = []
    ready = threading.Event()

    def listen():
        req = urllib.request.Request(f"{api}/v1/sessions/{sid}/events")
        with urllib.request.urlopen(req, timeout=30) as resp:
            ready.set()
            current_event = None
            while True:
                line = resp.readline()
                if not line:
                    break
                line = line.decode().strip()
                if line.startswith("event:"):
                    current_event = line.split(":", 1)[1].strip()
                elif line.startswith("data:"):
                    payload = json.loads(line.split(":", 1)[1])
                    events.append((current_event, payload))
                    if current_event == "done":
                        break

    listener = threading.Thread(target=listen, daemon=True)
    listener.start()
    assert ready.wait(timeout=10)
    time.sleep(0.2)
    http("POST", f"{api}/v1/sessions/{sid}/messages", {"text": fixtures.MUSIC_QUERY})
    listener.join(timeout=30)
    assert not listener.is_alive()
    names = [name for name, _ in events]
    assert names[-1] == "done"
    trace_steps = [p["step"] for name, p in events if name == "trace"]
    assert 1 in trace_steps and 13 in trace_steps
    stages = {p["stage"] for name, p in events if name == "trace"}
    assert stages == {
        "task_planning", "tool_selection", "tool_invocation", "response_generation",
    }


def test_repl_and_http_agree_on_call_sequence(api, tmp_path):
    config_path = write_config(
        tmp_path / "repl", registry_kwargs={"extras": True}
    )
    proc = run_cli(
        ["chat", "--config", str(config_path)],
        tmp_path / "repl", stdin=fixtures.MUSIC_QUERY + "\n:quit\n",
    )
    assert proc.returncode == 0
    _, session = http("POST", f"{api}/v1/sessions")
    sid = session["session_id"]
    _, body = http(
        "POST", f"{api}/v1/sessions/{sid}/messages", {"text": fixtures.MUSIC_QUERY}
    )
    http_tools = [c["tool"] for c in body["calls"]]
    for tool in http_tools:
        assert f"[{tool}]" in proc.stdout
    assert http_tools == ["music_style_description", "music_separation", "text2music"]
