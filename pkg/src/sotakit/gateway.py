"""Drive a text-generation backend and persist run artifacts.

Backends implement generate(requests) -> outputs.  The HTTP backend speaks
the wire contract POST <base>/generate with {"inputs": [...],
"max_new_tokens": N, "temperature": T} returning {"outputs": [...]};
the echo and fixture-replay backends exist for tests and dry runs.

Run artifacts are JSONL: a header line with the run config and its sha256,
then one line per request ordered by request_id.  Latency is measured and
logged but never written, so identical runs produce identical files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import httpx

logger = logging.getLogger(__name__)

BACKEND_URL_ENV = "SOTA_BACKEND_URL"
BACKEND_TOKEN_ENV = "SOTA_BACKEND_TOKEN"

RUN_SCHEMA = "sota-run/1"


class BackendError(Exception):
    def __init__(self, message: str, transient: bool = False) -> None:
        super().__init__(message)
        self.transient = transient


class BackendUnavailable(Exception):
    """Raised when on_error="raise" and some requests never succeeded."""

    def __init__(self, failures: list[RequestFailure],
                 partial: BatchResult) -> None:
        ids = [f.request_id for f in failures]
        super().__init__(f"{len(ids)} requests failed: {ids[:5]}")
        self.failures = failures
        self.partial = partial


class ArtifactIntegrityError(Exception):
    pass


@dataclass(frozen=True)
class GenerationRequest:
    request_id: str
    input_text: str
    max_new_tokens: int = 256
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.request_id:
            raise ValueError("request_id must be non-empty")
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1, "
                             f"got {self.max_new_tokens}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, "
                             f"got {self.temperature}")


@dataclass(frozen=True)
class GenerationResult:
    request_id: str
    output_text: str
    backend_id: str
    latency: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class RequestFailure:
    request_id: str
    reason: str


@dataclass
class BatchResult:
    results: list[GenerationResult]
    failures: list[RequestFailure]
    retries: dict[str, int]


class Backend(Protocol):
    backend_id: str

    def generate(self, requests: Sequence[GenerationRequest]) -> list[str]:
        ...


class EchoBackend:
    """Returns each input verbatim; useful for plumbing tests."""

    backend_id = "echo"

    def generate(self, requests: Sequence[GenerationRequest]) -> list[str]:
        return [r.input_text for r in requests]


class FixtureReplayBackend:
    """Replays recorded outputs keyed by request_id."""

    def __init__(self, outputs: dict[str, str],
                 backend_id: str = "fixture-replay") -> None:
        self.outputs = outputs
        self.backend_id = backend_id

    @classmethod
    def from_file(cls, path: str | Path) -> FixtureReplayBackend:
        """Load a JSONL file of {"request_id": ..., "output": ...} lines."""
        outputs: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                outputs[record["request_id"]] = record["output"]
        return cls(outputs)

    def generate(self, requests: Sequence[GenerationRequest]) -> list[str]:
        out = []
        for r in requests:
            if r.request_id not in self.outputs:
                raise BackendError(
                    f"no recorded output for {r.request_id!r}", transient=False)
            out.append(self.outputs[r.request_id])
        return out


class HttpBackend:
    """POSTs the wire contract to <base_url>/generate."""

    def __init__(self, base_url: str | None = None, token: str | None = None,
                 timeout: float = 60.0,
                 client: httpx.Client | None = None) -> None:
        base_url = base_url or os.environ.get(BACKEND_URL_ENV)
        if not base_url:
            raise ValueError(
                f"no backend url given and {BACKEND_URL_ENV} is unset")
        self.base_url = base_url.rstrip("/")
        self.token = token or os.environ.get(BACKEND_TOKEN_ENV)
        self.backend_id = f"http:{self.base_url}"
        self._client = client or httpx.Client(timeout=timeout)

    def generate(self, requests: Sequence[GenerationRequest]) -> list[str]:
        if not requests:
            return []
        payload = {
            "inputs": [r.input_text for r in requests],
            "max_new_tokens": requests[0].max_new_tokens,
            "temperature": requests[0].temperature,
        }
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            response = self._client.post(f"{self.base_url}/generate",
                                         json=payload, headers=headers)
        except httpx.HTTPError as exc:
            raise BackendError(f"transport error: {exc}", transient=True)
        if response.status_code >= 500:
            raise BackendError(f"server error {response.status_code}",
                               transient=True)
        if response.status_code != 200:
            raise BackendError(f"rejected with {response.status_code}: "
                               f"{response.text[:200]}", transient=False)
        try:
            outputs = response.json()["outputs"]
        except (KeyError, ValueError):
            raise BackendError("response is not {'outputs': [...]}",
                               transient=False)
        if not isinstance(outputs, list) or len(outputs) != len(requests):
            raise BackendError(
                f"expected {len(requests)} outputs, got "
                f"{len(outputs) if isinstance(outputs, list) else type(outputs)}",
                transient=False)
        return [str(o) for o in outputs]


def generate_batch(
    backend: Backend,
    requests: Sequence[GenerationRequest],
    parallelism: int = 1,
    retry_limit: int = 3,
    backoff_base: float = 0.5,
    on_error: str = "raise",
) -> BatchResult:
    """Dispatch requests (one per backend call) with retries for transient
    failures.  Results and failures come back sorted by request_id.

    on_error="raise" raises BackendUnavailable (carrying partial results)
    if any request ultimately failed; "collect" returns them as failures.
    """
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism}")
    if on_error not in ("raise", "collect"):
        raise ValueError(f"on_error must be 'raise' or 'collect', "
                         f"got {on_error!r}")
    ids = [r.request_id for r in requests]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"duplicate request ids: {dupes[:5]}")

    retries: dict[str, int] = {}

    def run_one(request: GenerationRequest):
        attempts = 0
        start = time.monotonic()
        while True:
            try:
                output = backend.generate([request])[0]
                return GenerationResult(
                    request_id=request.request_id,
                    output_text=output,
                    backend_id=backend.backend_id,
                    latency=time.monotonic() - start,
                )
            except BackendError as exc:
                if not exc.transient or attempts >= retry_limit:
                    return RequestFailure(request.request_id, str(exc))
                time.sleep(backoff_base * (2 ** attempts))
                attempts += 1
                retries[request.request_id] = attempts
                logger.info("retry %d for %s: %s",
                            attempts, request.request_id, exc)

    if parallelism == 1:
        outcomes = [run_one(r) for r in requests]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(run_one, requests))

    results = sorted((o for o in outcomes if isinstance(o, GenerationResult)),
                     key=lambda r: r.request_id)
    failures = sorted((o for o in outcomes if isinstance(o, RequestFailure)),
                      key=lambda f: f.request_id)
    batch = BatchResult(results=results, failures=failures, retries=retries)
    if failures and on_error == "raise":
        raise BackendUnavailable(failures, partial=batch)
    return batch


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"),
                           ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def record_run(
    batch: BatchResult,
    path: str | Path,
    config: dict,
    meta: dict[str, dict] | None = None,
) -> None:
    """Write the run artifact: header line, then one line per request.

    meta maps request_id to extra JSON fields (paper_id, template_id, ...)
    merged into that request's line.
    """
    meta = meta or {}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        header = {"schema": RUN_SCHEMA, "config": config,
                  "config_hash": config_hash(config)}
        fh.write(json.dumps(header, sort_keys=True, ensure_ascii=False) + "\n")
        for result in batch.results:
            line = dict(meta.get(result.request_id, {}))
            line.update(request_id=result.request_id,
                        output=result.output_text,
                        backend_id=result.backend_id)
            fh.write(json.dumps(line, sort_keys=True, ensure_ascii=False) + "\n")
        for failure in batch.failures:
            line = dict(meta.get(failure.request_id, {}))
            line.update(request_id=failure.request_id, error=failure.reason)
            fh.write(json.dumps(line, sort_keys=True, ensure_ascii=False) + "\n")


@dataclass
class RunArtifact:
    config: dict
    lines: list[dict]

    @property
    def outputs(self) -> list[dict]:
        return [l for l in self.lines if "output" in l]

    @property
    def errors(self) -> list[dict]:
        return [l for l in self.lines if "error" in l]


def load_run(path: str | Path) -> RunArtifact:
    """Read an artifact back, verifying the header hash."""
    with open(path, encoding="utf-8") as fh:
        raw = [line for line in fh if line.strip()]
    if not raw:
        raise ArtifactIntegrityError(f"{path}: empty artifact")
    header = json.loads(raw[0])
    if header.get("schema") != RUN_SCHEMA:
        raise ArtifactIntegrityError(
            f"{path}: unexpected schema {header.get('schema')!r}")
    config = header.get("config")
    if not isinstance(config, dict):
        raise ArtifactIntegrityError(f"{path}: header has no config object")
    if config_hash(config) != header.get("config_hash"):
        raise ArtifactIntegrityError(f"{path}: config hash mismatch")
    return RunArtifact(config=config, lines=[json.loads(l) for l in raw[1:]])


def is_run_artifact(path: str | Path) -> bool:
    """Cheap sniff: does the first line look like a run header?"""
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
        return json.loads(first).get("schema") == RUN_SCHEMA
    except (OSError, ValueError, AttributeError):
        return False
