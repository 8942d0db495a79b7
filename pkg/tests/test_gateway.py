from __future__ import annotations

import json
from pathlib import Path

import httpx
import pytest
from hypothesis import given, strategies as st

from sotakit.gateway import (RUN_SCHEMA, ArtifactIntegrityError, BackendError,
                             BackendUnavailable, BatchResult, EchoBackend,
                             FixtureReplayBackend, GenerationRequest,
                             GenerationResult, HttpBackend, config_hash,
                             generate_batch, is_run_artifact, load_run,
                             record_run)


class SelectiveBackend:
    """Fails requests whose id is listed; answers the rest verbatim."""

    backend_id = "selective"

    def __init__(self, bad_ids: set[str], transient: bool = False) -> None:
        self.bad_ids = bad_ids
        self.transient = transient

    def generate(self, requests):
        for r in requests:
            if r.request_id in self.bad_ids:
                raise BackendError(f"down for {r.request_id}",
                                   transient=self.transient)
        return [r.input_text for r in requests]


class FlakyBackend:
    """Fails the first fail_times calls, then succeeds."""

    backend_id = "flaky"

    def __init__(self, fail_times: int, transient: bool = True) -> None:
        self.fail_times = fail_times
        self.transient = transient
        self.calls = 0

    def generate(self, requests):
        self.calls += 1
        if self.calls <= self.fail_times:
            raise BackendError("synthetic failure", transient=self.transient)
        return [r.input_text for r in requests]


def req(request_id: str, text: str = "hello") -> GenerationRequest:
    return GenerationRequest(request_id=request_id, input_text=text)


def test_request_validation():
    with pytest.raises(ValueError):
        GenerationRequest(request_id="", input_text="x")
    with pytest.raises(ValueError):
        GenerationRequest(request_id="r", input_text="x", max_new_tokens=0)
    with pytest.raises(ValueError):
        GenerationRequest(request_id="r", input_text="x", temperature=-0.1)


def test_latency_excluded_from_equality():
    a = GenerationResult("r1", "out", "echo", latency=0.2)
    b = GenerationResult("r1", "out", "echo", latency=99.0)
    assert a == b


def test_echo_backend():
    backend = EchoBackend()
    outputs = backend.generate([req("a", "one"), req("b", "two")])
    assert outputs == ["one", "two"]


def test_replay_backend_maps_by_id():
    backend = FixtureReplayBackend({"a": "alpha", "b": "beta"})
    assert backend.generate([req("b"), req("a")]) == ["beta", "alpha"]


def test_replay_backend_missing_id_is_permanent():
    backend = FixtureReplayBackend({"a": "alpha"})
    with pytest.raises(BackendError) as exc:
        backend.generate([req("zzz")])
    assert exc.value.transient is False


def test_replay_backend_from_file(tmp_path: Path):
    path = tmp_path / "recorded.jsonl"
    path.write_text('{"request_id": "a", "output": "alpha"}\n'
                    "\n"
                    '{"request_id": "b", "output": "beta"}\n',
                    encoding="utf-8")
    backend = FixtureReplayBackend.from_file(path)
    assert backend.generate([req("a"), req("b")]) == ["alpha", "beta"]


def test_generate_batch_sorts_by_request_id():
    batch = generate_batch(EchoBackend(), [req("c"), req("a"), req("b")])
    assert [r.request_id for r in batch.results] == ["a", "b", "c"]
    assert batch.failures == []


def test_generate_batch_rejects_duplicate_ids():
    with pytest.raises(ValueError, match="duplicate"):
        generate_batch(EchoBackend(), [req("a"), req("a")])


def test_generate_batch_rejects_bad_arguments():
    with pytest.raises(ValueError):
        generate_batch(EchoBackend(), [req("a")], parallelism=0)
    with pytest.raises(ValueError):
        generate_batch(EchoBackend(), [req("a")], on_error="explode")


def test_generate_batch_parallel_matches_serial():
    requests = [req(f"r{i:02d}", f"text {i}") for i in range(8)]
    serial = generate_batch(EchoBackend(), requests, parallelism=1)
    parallel = generate_batch(EchoBackend(), requests, parallelism=4)
    assert serial.results == parallel.results


def test_transient_failure_is_retried():
    backend = FlakyBackend(fail_times=2)
    batch = generate_batch(backend, [req("a")], backoff_base=0.0)
    assert [r.output_text for r in batch.results] == ["hello"]
    assert batch.retries == {"a": 2}
    assert backend.calls == 3


def test_transient_failure_exhausts_retry_limit():
    backend = FlakyBackend(fail_times=99)
    batch = generate_batch(backend, [req("a")], retry_limit=2,
                           backoff_base=0.0, on_error="collect")
    assert batch.results == []
    assert [f.request_id for f in batch.failures] == ["a"]
    assert backend.calls == 3


def test_permanent_failure_is_not_retried():
    backend = FlakyBackend(fail_times=99, transient=False)
    batch = generate_batch(backend, [req("a")], backoff_base=0.0,
                           on_error="collect")
    assert backend.calls == 1
    assert batch.retries == {}
    assert "synthetic failure" in batch.failures[0].reason


def test_on_error_raise_carries_partial_results():
    backend = SelectiveBackend(bad_ids={"b"})
    requests = [req("a"), req("b"), req("c")]
    with pytest.raises(BackendUnavailable) as exc:
        generate_batch(backend, requests, backoff_base=0.0)
    assert [f.request_id for f in exc.value.failures] == ["b"]
    assert [r.request_id for r in exc.value.partial.results] == ["a", "c"]


def test_on_error_collect_keeps_going():
    backend = SelectiveBackend(bad_ids={"a", "c"})
    batch = generate_batch(backend, [req("a"), req("b"), req("c")],
                           backoff_base=0.0, on_error="collect")
    assert [r.request_id for r in batch.results] == ["b"]
    assert [f.request_id for f in batch.failures] == ["a", "c"]


def test_config_hash_is_sha256_hex():
    digest = config_hash({"backend": "echo", "seed": 13})
    assert len(digest) == 64
    assert all(c in "0123456789abcdef" for c in digest)


@given(st.dictionaries(st.text(min_size=1, max_size=8),
                       st.integers() | st.text(max_size=8), max_size=6))
def test_config_hash_ignores_key_order(config: dict):
    reordered = dict(reversed(list(config.items())))
    assert config_hash(config) == config_hash(reordered)


def test_record_and_load_round_trip(tmp_path: Path):
    batch = generate_batch(EchoBackend(), [req("b", "beta"), req("a", "alpha")])
    config = {"backend": "echo", "temperature": 0.0}
    meta = {"a": {"paper_id": "p1", "template_id": "S1"},
            "b": {"paper_id": "p1", "template_id": "D3"}}
    path = tmp_path / "run.jsonl"
    record_run(batch, path, config, meta=meta)

    artifact = load_run(path)
    assert artifact.config == config
    assert [l["request_id"] for l in artifact.outputs] == ["a", "b"]
    assert artifact.outputs[0]["paper_id"] == "p1"
    assert artifact.outputs[0]["template_id"] == "S1"
    assert artifact.outputs[0]["output"] == "alpha"
    assert artifact.errors == []


def test_record_run_includes_failures(tmp_path: Path):
    backend = SelectiveBackend(bad_ids={"bad"})
    batch = generate_batch(backend, [req("ok"), req("bad")],
                           backoff_base=0.0, on_error="collect")
    path = tmp_path / "run.jsonl"
    record_run(batch, path, {"backend": "selective"})
    artifact = load_run(path)
    assert [l["request_id"] for l in artifact.outputs] == ["ok"]
    assert [l["request_id"] for l in artifact.errors] == ["bad"]
    assert "down for bad" in artifact.errors[0]["error"]


def test_latency_never_serialized(tmp_path: Path):
    slow = BatchResult(
        results=[GenerationResult("a", "out", "echo", latency=3.7)],
        failures=[], retries={})
    fast = BatchResult(
        results=[GenerationResult("a", "out", "echo", latency=0.001)],
        failures=[], retries={})
    record_run(slow, tmp_path / "slow.jsonl", {"backend": "echo"})
    record_run(fast, tmp_path / "fast.jsonl", {"backend": "echo"})
    slow_bytes = (tmp_path / "slow.jsonl").read_bytes()
    assert slow_bytes == (tmp_path / "fast.jsonl").read_bytes()
    assert b"latency" not in slow_bytes


def test_load_run_detects_config_tampering(tmp_path: Path):
    batch = generate_batch(EchoBackend(), [req("a")])
    path = tmp_path / "run.jsonl"
    record_run(batch, path, {"backend": "echo", "seed": 13})
    lines = path.read_text(encoding="utf-8").splitlines()
    lines[0] = lines[0].replace('"seed": 13', '"seed": 14')
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(ArtifactIntegrityError, match="hash mismatch"):
        load_run(path)


def test_load_run_rejects_wrong_schema(tmp_path: Path):
    path = tmp_path / "run.jsonl"
    path.write_text('{"schema": "other/9", "config": {}, "config_hash": ""}\n',
                    encoding="utf-8")
    with pytest.raises(ArtifactIntegrityError, match="schema"):
        load_run(path)


def test_load_run_rejects_empty_file(tmp_path: Path):
    path = tmp_path / "run.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(ArtifactIntegrityError, match="empty"):
        load_run(path)


def test_is_run_artifact_sniff(tmp_path: Path):
    run_path = tmp_path / "run.jsonl"
    record_run(generate_batch(EchoBackend(), [req("a")]), run_path,
               {"backend": "echo"})
    other_path = tmp_path / "instances.jsonl"
    other_path.write_text('{"paper_id": "p1", "input": "x"}\n',
                          encoding="utf-8")
    assert is_run_artifact(run_path) is True
    assert is_run_artifact(other_path) is False
    assert is_run_artifact(tmp_path / "missing.jsonl") is False


def http_backend(handler) -> HttpBackend:
    transport = httpx.MockTransport(handler)
    return HttpBackend(base_url="http://backend.test",
                       client=httpx.Client(transport=transport))


def test_http_backend_wire_contract():
    seen: dict = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["url"] = str(request.url)
        seen["body"] = json.loads(request.content)
        seen["auth"] = request.headers.get("authorization")
        return httpx.Response(200, json={"outputs": ["one", "two"]})

    backend = http_backend(handler)
    requests = [
        GenerationRequest("a", "first input", max_new_tokens=128,
                          temperature=0.0),
        GenerationRequest("b", "second input", max_new_tokens=128,
                          temperature=0.0),
    ]
    assert backend.generate(requests) == ["one", "two"]
    assert seen["url"] == "http://backend.test/generate"
    assert seen["body"] == {"inputs": ["first input", "second input"],
                            "max_new_tokens": 128, "temperature": 0.0}
    assert seen["auth"] is None


def test_http_backend_sends_bearer_token():
    seen: dict = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["auth"] = request.headers.get("authorization")
        return httpx.Response(200, json={"outputs": ["x"]})

    transport = httpx.MockTransport(handler)
    backend = HttpBackend(base_url="http://backend.test", token="s3cret",
                          client=httpx.Client(transport=transport))
    backend.generate([req("a")])
    assert seen["auth"] == "Bearer s3cret"


def test_http_backend_empty_batch_skips_network():
    def handler(request: httpx.Request) -> httpx.Response:
        raise AssertionError("should not be called")

    assert http_backend(handler).generate([]) == []


@pytest.mark.parametrize("status, transient", [(500, True), (503, True),
                                               (400, False), (404, False)])
def test_http_backend_status_classification(status: int, transient: bool):
    backend = http_backend(lambda request: httpx.Response(status, text="nope"))
    with pytest.raises(BackendError) as exc:
        backend.generate([req("a")])
    assert exc.value.transient is transient


def test_http_backend_transport_error_is_transient():
    def handler(request: httpx.Request) -> httpx.Response:
        raise httpx.ConnectError("connection refused")

    with pytest.raises(BackendError) as exc:
        http_backend(handler).generate([req("a")])
    assert exc.value.transient is True


def test_http_backend_rejects_malformed_response():
    backend = http_backend(
        lambda request: httpx.Response(200, json={"wrong": "shape"}))
    with pytest.raises(BackendError) as exc:
        backend.generate([req("a")])
    assert exc.value.transient is False


def test_http_backend_rejects_output_count_mismatch():
    backend = http_backend(
        lambda request: httpx.Response(200, json={"outputs": ["only one"]}))
    with pytest.raises(BackendError):
        backend.generate([req("a"), req("b")])


def test_http_backend_reads_url_from_env(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setenv("SOTA_BACKEND_URL", "http://from-env.test/")
    backend = HttpBackend()
    assert backend.base_url == "http://from-env.test"
    assert backend.backend_id == "http:http://from-env.test"


def test_http_backend_requires_some_url(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv("SOTA_BACKEND_URL", raising=False)
    with pytest.raises(ValueError):
        HttpBackend()
