"""Generation providers and the cached batch runner.

Two providers speak one interface: an HTTP chat-completions client with
retry/backoff, and a network-free replay provider for deterministic
runs. The batch runner issues one request per (record, grade), persists
completions incrementally to an append-only JSONL cache keyed by a hash
of prompt + model + sampling parameters, and on rerun re-issues only
cache misses.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Protocol, Sequence

import httpx

from .dataset import PROMPT_FRAME, InstructionRecord, render_instruction
from .textstat import DEFAULT_CONFIG, ReadabilityReport, TokenizerConfig, readability_report

BACKOFF_BASE_SECONDS = 1.0
BACKOFF_CAP_SECONDS = 30.0

# fixed timestamp for replay runs so reruns are byte-identical
REPLAY_TIMESTAMP = "1970-01-01T00:00:00+00:00"


class ProviderError(RuntimeError):
    """Provider failed after exhausting retries."""


class AuthError(ProviderError):
    """Provider rejected credentials; never retried."""


@dataclass
class ProviderConfig:
    provider: str = "http"
    base_url: str = ""
    model_name: str = ""
    api_key_env: str = "READCTRL_API_KEY"
    temperature: float = 1.0
    top_p: float = 1.0
    frequency_penalty: float = 0.0
    presence_penalty: float = 0.0
    max_retries: int = 3
    concurrency: int = 4
    replay: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")
        if not 0.0 <= self.top_p <= 1.0:
            raise ValueError("top_p must be in [0, 1]")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")

    @classmethod
    def from_file(cls, path: str | Path) -> "ProviderConfig":
        with Path(path).open(encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def sampling_params(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "frequency_penalty": self.frequency_penalty,
            "presence_penalty": self.presence_penalty,
        }


@dataclass(frozen=True)
class CompletionResult:
    text: str
    attempts: int


class Provider(Protocol):
    name: str

    def complete(self, prompt: str) -> CompletionResult: ...


class HttpProvider:
    """Chat-completions client with exponential backoff and jitter.

    Transport errors, 429, and 5xx are retried up to ``max_retries``
    total attempts; 401/403 raise immediately.
    """

    def __init__(
        self,
        config: ProviderConfig,
        client: httpx.Client | None = None,
        sleeper: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.config = config
        self.name = config.model_name or "http"
        self._client = client or httpx.Client(timeout=60.0)
        self._sleep = sleeper
        self._rng = rng or random.Random()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, prompt: str) -> CompletionResult:
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            **self.config.sampling_params(),
        }
        last_error: Exception | None = None
        for attempt in range(1, self.config.max_retries + 1):
            try:
                resp = self._client.post(self.config.base_url, json=body, headers=self._headers())
                if resp.status_code in (401, 403):
                    raise AuthError(f"provider returned {resp.status_code}")
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise httpx.HTTPStatusError(
                        f"retryable status {resp.status_code}", request=resp.request, response=resp
                    )
                resp.raise_for_status()
                text = resp.json()["choices"][0]["message"]["content"]
                if not text:
                    raise ProviderError("provider returned empty completion")
                return CompletionResult(text=text, attempts=attempt)
            except AuthError:
                raise
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
                if attempt < self.config.max_retries:
                    self._sleep(self._backoff(attempt))
        raise ProviderError(
            f"gave up after {self.config.max_retries} attempts: {last_error}"
        ) from last_error

    def _backoff(self, attempt: int) -> float:
        base = min(BACKOFF_CAP_SECONDS, BACKOFF_BASE_SECONDS * (2 ** (attempt - 1)))
        return base * (1.0 + 0.1 * self._rng.random())


class ReplayProvider:
    """Deterministic provider for tests and offline pipelines.

    Modes: ``identity`` echoes the prompt's input section, ``constant``
    returns a fixed text, ``map`` looks the full prompt up in a JSON
    object (with optional ``default``).
    """

    def __init__(self, config: ProviderConfig):
        replay = config.replay or {}
        self.mode = replay.get("mode", "identity")
        self.name = f"replay:{self.mode}"
        self._config = replay
        self._prompts: dict[str, str] = {}
        if self.mode == "map":
            if "path" in replay:
                with Path(replay["path"]).open(encoding="utf-8") as fh:
                    self._prompts = json.load(fh)
            else:
                self._prompts = dict(replay.get("prompts", {}))
        elif self.mode == "constant":
            if not replay.get("text"):
                raise ValueError("constant replay mode needs a 'text' value")
        elif self.mode != "identity":
            raise ValueError(f"unknown replay mode: {self.mode!r}")

    def complete(self, prompt: str) -> CompletionResult:
        if self.mode == "constant":
            return CompletionResult(text=self._config["text"], attempts=1)
        if self.mode == "map":
            if prompt in self._prompts:
                return CompletionResult(text=self._prompts[prompt], attempts=1)
            if "default" in self._config:
                return CompletionResult(text=self._config["default"], attempts=1)
            raise ProviderError("prompt not present in replay map")
        return CompletionResult(text=extract_input_section(prompt), attempts=1)


def extract_input_section(prompt: str) -> str:
    """Pull the text between the input and response headers of the frame.

    Uses the last frame in the prompt, so prepended few-shot exemplar
    blocks (which may contain example frames) are skipped.
    """
    start = prompt.rfind("### Input:\n")
    end = prompt.rfind("\n### Response:")
    if start == -1 or end == -1 or end <= start:
        return prompt
    return prompt[start + len("### Input:\n") : end]


def make_provider(config: ProviderConfig, client: httpx.Client | None = None) -> Provider:
    if config.provider == "replay":
        return ReplayProvider(config)
    if config.provider == "http":
        return HttpProvider(config, client=client)
    raise ValueError(f"unknown provider kind: {config.provider!r}")


# --- generation records --------------------------------------------------------


@dataclass(frozen=True)
class GenerationRecord:
    record_id: str
    requested_grade: int
    prompt: str
    output: str
    achieved: ReadabilityReport
    provider: str
    attempt_count: int
    timestamp: str

    def to_json_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "requested_grade": self.requested_grade,
            "prompt": self.prompt,
            "output": self.output,
            "achieved": {
                "fkgl": self.achieved.fkgl,
                "gfi": self.achieved.gfi,
                "ari": self.achieved.ari,
                "cli": self.achieved.cli_index,
                "rgl": self.achieved.rgl,
            },
            "provider": self.provider,
            "attempt_count": self.attempt_count,
            "timestamp": self.timestamp,
        }


def write_generations(records: Sequence[GenerationRecord], path: str | Path) -> int:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict(), ensure_ascii=False) + "\n")
    return len(records)


def load_generations(path: str | Path) -> list[GenerationRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            a = obj["achieved"]
            records.append(
                GenerationRecord(
                    record_id=obj["record_id"],
                    requested_grade=obj["requested_grade"],
                    prompt=obj["prompt"],
                    output=obj["output"],
                    achieved=ReadabilityReport(
                        fkgl=a["fkgl"], gfi=a["gfi"], ari=a["ari"],
                        cli_index=a["cli"], rgl=a["rgl"],
                    ),
                    provider=obj["provider"],
                    attempt_count=obj["attempt_count"],
                    timestamp=obj["timestamp"],
                )
            )
    return records


# --- batch runner ----------------------------------------------------------------


@dataclass
class BatchResult:
    records: list[GenerationRecord]
    failures: list[dict]


def request_key(prompt: str, config: ProviderConfig) -> str:
    payload = json.dumps(
        {"prompt": prompt, "model": config.model_name, **config.sampling_params()},
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def build_prompt(
    record: InstructionRecord, grade: int, template: str = "grade_level", exemplars: str = ""
) -> str:
    frame = PROMPT_FRAME.format(
        instruction=render_instruction(grade, template), input=record.input
    )
    if exemplars:
        return exemplars.rstrip("\n") + "\n\n" + frame
    return frame


class _Cache:
    """Append-only JSONL cache; the last entry for a key wins."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    self.entries[entry["key"]] = entry
        self._fh = self.path.open("a", encoding="utf-8")

    def get(self, key: str) -> dict | None:
        return self.entries.get(key)

    def put(self, entry: dict) -> None:
        with self._lock:
            self._fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
            self._fh.flush()
            self.entries[entry["key"]] = entry

    def close(self) -> None:
        self._fh.close()


def run_batch(
    records: Sequence[InstructionRecord],
    grades: Sequence[int],
    config: ProviderConfig,
    cache_path: str | Path,
    template: str = "grade_level",
    tokenizer_config: TokenizerConfig = DEFAULT_CONFIG,
    exemplars: str = "",
    provider: Provider | None = None,
    clock: Callable[[], str] | None = None,
) -> BatchResult:
    """Issue one generation per (record, grade) with caching and resume.

    Completed requests are appended to the cache as they finish, so an
    aborted run resumes where it stopped. Results are re-sorted by
    (record_id, grade); failures are listed per pair without aborting
    the rest of the batch.
    """
    if any(g < 1 or g > 12 for g in grades):
        raise ValueError("grades must lie in 1..12")
    prov = provider if provider is not None else make_provider(config)
    if clock is None:
        if isinstance(prov, ReplayProvider):
            clock = lambda: REPLAY_TIMESTAMP  # noqa: E731
        else:
            clock = lambda: datetime.now(timezone.utc).isoformat()  # noqa: E731

    cache = _Cache(cache_path)
    jobs = []
    for rec in records:
        for grade in grades:
            prompt = build_prompt(rec, grade, template, exemplars)
            jobs.append((rec, grade, prompt, request_key(prompt, config)))

    # one provider call per distinct key, even when records share prompts
    pending: dict[str, tuple] = {}
    for job in jobs:
        if cache.get(job[3]) is None and job[3] not in pending:
            pending[job[3]] = job

    failures: list[dict] = []
    failure_lock = threading.Lock()
    failed_keys: dict[str, str] = {}

    def work(job) -> None:
        rec, grade, prompt, key = job
        try:
            result = prov.complete(prompt)
        except Exception as exc:  # noqa: BLE001 - recorded, batch continues
            with failure_lock:
                failed_keys[key] = f"{type(exc).__name__}: {exc}"
            return
        cache.put(
            {
                "key": key,
                "record_id": rec.id,
                "requested_grade": grade,
                "prompt": prompt,
                "output": result.text,
                "provider": prov.name,
                "attempt_count": result.attempts,
                "timestamp": clock(),
            }
        )

    try:
        if config.concurrency == 1:
            for job in pending.values():
                work(job)
        else:
            with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
                list(pool.map(work, pending.values()))
    finally:
        cache.close()

    for rec, grade, _prompt, key in jobs:
        if key in failed_keys:
            failures.append({"record_id": rec.id, "grade": grade, "error": failed_keys[key]})

    out: list[GenerationRecord] = []
    for rec, grade, prompt, key in jobs:
        entry = cache.get(key)
        if entry is None:
            continue
        # identity comes from the job: identical prompts legally share one
        # cache entry across records
        out.append(
            GenerationRecord(
                record_id=rec.id,
                requested_grade=grade,
                prompt=prompt,
                output=entry["output"],
                achieved=readability_report(entry["output"], tokenizer_config),
                provider=entry["provider"],
                attempt_count=entry["attempt_count"],
                timestamp=entry["timestamp"],
            )
        )
    out.sort(key=lambda r: (r.record_id, r.requested_grade))
    failures.sort(key=lambda f: (f["record_id"], f["grade"]))
    return BatchResult(records=out, failures=failures)
