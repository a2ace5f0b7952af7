"""Annotation service: blinded pairwise preference collection and
control-strategy annotation over HTTP.

State is an append-only JSONL event log replayed at startup; an
acknowledged submission has already been flushed to disk. Outputs are
blinded into left/right slots with a deterministic per-(seed, task)
assignment, so restarts preserve what every annotator saw. Client-facing
payloads never name a system.
"""

from __future__ import annotations

import hashlib
import json
import os
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal

from fastapi import Depends, FastAPI, Header, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import judge
from .textstat import DEFAULT_CONFIG, analyze, ari, coleman_liau, fkgl, gunning_fog

ANNOTATION_GRADES = (2, 5, 8, 11)

# per-grade control-strategy taxonomy; selections must come from here
STRATEGY_TAXONOMY: dict[int, tuple[str, ...]] = {
    2: (
        "Employ short, straightforward sentence structures",
        "Focus only on essential details, omitting unnecessary complexity",
        "Use very simple vocabulary and avoid complex words",
        "Break down information into clear sequential steps",
    ),
    5: (
        "Introduce some more varied and content-specific vocabulary",
        "Use longer sentences with conjunctions to combine ideas",
        "Provide additional context and relevant details",
        "Explain concepts more directly instead of narratives",
    ),
    8: (
        "Use complex sentence structures like passive voice",
        "Employ richer descriptive language and vivid details",
        "Incorporate academic and technical terminology",
        "Establish clear logical connections between ideas",
    ),
    11: (
        "Construct elaborate compound-complex sentences",
        "Use sophisticated vocabulary from all domains",
        "Write with consistent formality and academic tone",
        "Employ advanced stylistic techniques like figurative language",
    ),
}


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    input: str
    system_a: dict[int, str]
    system_b: dict[int, str]
    mode: str = "preference"


def load_tasks(path: str | Path) -> list[TaskSpec]:
    """Read the task set; schema {task_id, input, system_a: {g2,g5,g8,g11},
    system_b: {...}, mode?}."""
    tasks = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            tasks.append(
                TaskSpec(
                    task_id=str(obj["task_id"]),
                    input=obj["input"],
                    system_a={g: obj["system_a"][f"g{g}"] for g in ANNOTATION_GRADES},
                    system_b={g: obj["system_b"][f"g{g}"] for g in ANNOTATION_GRADES},
                    mode=obj.get("mode", "preference"),
                )
            )
    return tasks


def load_annotators(path: str | Path) -> dict[str, str]:
    """Read annotator credentials: a JSON list of {id, token}."""
    with Path(path).open(encoding="utf-8") as fh:
        entries = json.load(fh)
    return {str(e["id"]): str(e["token"]) for e in entries}


def blinding_side(seed: int, task_id: str) -> str:
    """Deterministic left-slot assignment: 'a' or 'b' per (seed, task)."""
    digest = hashlib.sha256(f"{seed}:{task_id}".encode("utf-8")).digest()
    return "a" if digest[0] % 2 == 0 else "b"


class AnnotationStore:
    """Event-sourced state: tasks, blinding, and submissions."""

    def __init__(
        self,
        tasks: list[TaskSpec],
        annotators: dict[str, str],
        seed: int,
        log_path: str | Path,
    ):
        self.tasks = {t.task_id: t for t in tasks}
        self.task_order = [t.task_id for t in tasks]
        self.annotators = annotators
        self.seed = seed
        self.log_path = Path(log_path)
        self.blinding = {tid: blinding_side(seed, tid) for tid in self.tasks}
        self.preferences: dict[tuple[str, str], dict] = {}
        self.strategies: dict[tuple[str, str], dict] = {}
        self.sessions: dict[str, str] = {}
        self._write_lock = threading.Lock()
        self._replay()
        self._log_fh = self.log_path.open("a", encoding="utf-8")
        self._log_loaded_tasks()

    def _replay(self) -> None:
        self._seen_loaded: set[str] = set()
        if not self.log_path.exists():
            return
        with self.log_path.open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                event = json.loads(line)
                self._apply(event)

    def _apply(self, event: dict) -> None:
        kind = event["type"]
        if kind == "task_loaded":
            self._seen_loaded.add(event["task_id"])
        elif kind == "preference_submitted":
            key = (event["task_id"], event["annotator_id"])
            self.preferences[key] = event
        elif kind == "strategy_submitted":
            key = (event["task_id"], event["annotator_id"])
            self.strategies[key] = event

    def _log_loaded_tasks(self) -> None:
        for tid in self.task_order:
            if tid not in self._seen_loaded:
                self.append_event(
                    {"type": "task_loaded", "task_id": tid, "left_is": self.blinding[tid]}
                )

    def append_event(self, event: dict) -> None:
        # an event is acknowledged only after it reached the OS and disk
        with self._write_lock:
            self._log_fh.write(json.dumps(event, ensure_ascii=False) + "\n")
            self._log_fh.flush()
            os.fsync(self._log_fh.fileno())
            self._apply(event)

    def close(self) -> None:
        self._log_fh.close()

    # --- sessions ---

    def create_session(self, annotator_id: str, token: str) -> tuple[str, list[str]]:
        if self.annotators.get(annotator_id) != token:
            raise KeyError(annotator_id)
        session = secrets.token_hex(16)
        self.sessions[session] = annotator_id
        return session, self.queue_for(annotator_id)

    def annotator_for(self, session: str) -> str | None:
        return self.sessions.get(session)

    def queue_for(self, annotator_id: str) -> list[str]:
        done = set()
        for (tid, ann) in self.preferences:
            if ann == annotator_id and self.tasks.get(tid, None) and self.tasks[tid].mode == "preference":
                done.add(tid)
        for (tid, ann) in self.strategies:
            if ann == annotator_id and self.tasks.get(tid, None) and self.tasks[tid].mode == "strategy":
                done.add(tid)
        return [tid for tid in self.task_order if tid not in done]

    # --- blinded views ---

    def client_view(self, task_id: str) -> dict:
        task = self.tasks[task_id]
        # strategy annotation targets the system under analysis (system_a),
        # so those tasks skip the shuffle; preference tasks stay blinded
        left_is = "a" if task.mode == "strategy" else self.blinding[task_id]
        left, right = (
            (task.system_a, task.system_b) if left_is == "a" else (task.system_b, task.system_a)
        )
        return {
            "task_id": task.task_id,
            "input": task.input,
            "mode": task.mode,
            "outputs": {
                str(g): {"left": left[g], "right": right[g]} for g in ANNOTATION_GRADES
            },
            "strategies": (
                {str(g): list(STRATEGY_TAXONOMY[g]) for g in ANNOTATION_GRADES}
                if task.mode == "strategy"
                else None
            ),
        }

    # --- aggregation ---

    def unblind(self, task_id: str, choice: str) -> str:
        if choice == "tie":
            return judge.TIE
        left_is = self.blinding[task_id]
        if choice == "left":
            return judge.SYSTEM_A if left_is == "a" else judge.SYSTEM_B
        return judge.SYSTEM_B if left_is == "a" else judge.SYSTEM_A

    def preference_judgments(self) -> list[judge.Judgment]:
        judgments = []
        for (task_id, annotator_id), event in sorted(self.preferences.items()):
            for grade_str, entry in sorted(event["choices"].items(), key=lambda kv: int(kv[0])):
                judgments.append(
                    judge.Judgment(
                        item_id=task_id,
                        source=annotator_id,
                        grade=int(grade_str),
                        preference=self.unblind(task_id, entry["choice"]),
                    )
                )
        return judgments

    def strategy_proportions(self) -> dict[str, dict[str, float]]:
        by_grade: dict[int, list[list[str]]] = {g: [] for g in ANNOTATION_GRADES}
        for (_task_id, _ann), event in sorted(self.strategies.items()):
            for grade_str, selected in event["selections"].items():
                by_grade[int(grade_str)].append(selected)
        out: dict[str, dict[str, float]] = {}
        for grade in ANNOTATION_GRADES:
            submissions = by_grade[grade]
            if not submissions:
                continue
            out[str(grade)] = {
                strategy: sum(1 for sel in submissions if strategy in sel) / len(submissions)
                for strategy in STRATEGY_TAXONOMY[grade]
            }
        return out


# --- request/response models -------------------------------------------------------


class SessionRequest(BaseModel):
    annotator_id: str
    token: str


class SessionResponse(BaseModel):
    session: str
    queue: list[str]
    total: int


class GradeOutputs(BaseModel):
    left: str
    right: str


class TaskView(BaseModel):
    task_id: str
    input: str
    mode: str
    outputs: dict[str, GradeOutputs]
    strategies: dict[str, list[str]] | None = None


class PreferenceChoice(BaseModel):
    choice: Literal["left", "right", "tie"]
    reason: str = ""


class PreferenceRequest(BaseModel):
    task_id: str
    choices: dict[str, PreferenceChoice]


class StrategyRequest(BaseModel):
    task_id: str
    selections: dict[str, list[str]]


class Ack(BaseModel):
    status: str = "ok"
    task_id: str


class ScoreRequest(BaseModel):
    text: str
    gfi_variant: Literal["complex_word", "long_word"] = "complex_word"


class ScoreResponse(BaseModel):
    fkgl: float
    gfi: float
    ari: float
    cli: float
    rgl: float


class WinRateResponse(BaseModel):
    wins_a: int
    wins_b: int
    ties: int
    inconsistent: int
    n: int
    overall: dict[str, float] | None
    per_grade: dict[str, dict[str, float] | None]


# --- app factory ------------------------------------------------------------------


def create_app(
    tasks_path: str | Path,
    annotators_path: str | Path,
    seed: int,
    log_path: str | Path,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    store = AnnotationStore(
        tasks=load_tasks(tasks_path),
        annotators=load_annotators(annotators_path),
        seed=seed,
        log_path=log_path,
    )
    app = FastAPI(title="readctrl annotation service")
    app.state.store = store
    # the UI may be served from a separate static host; session auth is
    # header-based, so a permissive CORS policy leaks nothing extra
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def current_annotator(x_session: str = Header(default="")) -> str:
        annotator = store.annotator_for(x_session)
        if annotator is None:
            raise HTTPException(status_code=401, detail="invalid or expired session")
        return annotator

    @app.post("/session", response_model=SessionResponse)
    def create_session(req: SessionRequest) -> SessionResponse:
        try:
            session, queue = store.create_session(req.annotator_id, req.token)
        except KeyError:
            raise HTTPException(status_code=401, detail="unknown annotator or bad token")
        return SessionResponse(session=session, queue=queue, total=len(store.tasks))

    @app.get("/task/{task_id}", response_model=TaskView)
    def get_task(task_id: str, annotator: str = Depends(current_annotator)) -> TaskView:
        if task_id not in store.tasks:
            raise HTTPException(status_code=404, detail="no such task")
        return TaskView(**store.client_view(task_id))

    @app.post("/preference", response_model=Ack)
    def submit_preference(
        req: PreferenceRequest, annotator: str = Depends(current_annotator)
    ) -> Ack:
        if req.task_id not in store.tasks:
            raise HTTPException(status_code=404, detail="no such task")
        if store.tasks[req.task_id].mode != "preference":
            raise HTTPException(status_code=400, detail="not a preference task")
        missing = [
            str(g)
            for g in ANNOTATION_GRADES
            if str(g) not in req.choices or not req.choices[str(g)].reason.strip()
        ]
        if missing:
            raise HTTPException(
                status_code=400,
                detail=f"every grade needs a choice and a nonempty reason; missing: {missing}",
            )
        extra = [g for g in req.choices if g not in {str(x) for x in ANNOTATION_GRADES}]
        if extra:
            raise HTTPException(status_code=400, detail=f"unknown grades: {extra}")
        store.append_event(
            {
                "type": "preference_submitted",
                "task_id": req.task_id,
                "annotator_id": annotator,
                "choices": {
                    g: {"choice": c.choice, "reason": c.reason} for g, c in req.choices.items()
                },
                "submitted_at": datetime.now(timezone.utc).isoformat(),
            }
        )
        return Ack(task_id=req.task_id)

    @app.post("/strategy", response_model=Ack)
    def submit_strategies(
        req: StrategyRequest, annotator: str = Depends(current_annotator)
    ) -> Ack:
        if req.task_id not in store.tasks:
            raise HTTPException(status_code=404, detail="no such task")
        if store.tasks[req.task_id].mode != "strategy":
            raise HTTPException(status_code=400, detail="not a strategy task")
        for grade_str, selected in req.selections.items():
            if grade_str not in {str(g) for g in ANNOTATION_GRADES}:
                raise HTTPException(status_code=400, detail=f"unknown grade: {grade_str}")
            allowed = set(STRATEGY_TAXONOMY[int(grade_str)])
            unknown = [s for s in selected if s not in allowed]
            if unknown:
                raise HTTPException(
                    status_code=400,
                    detail=f"unknown strategies for grade {grade_str}: {unknown}",
                )
        store.append_event(
            {
                "type": "strategy_submitted",
                "task_id": req.task_id,
                "annotator_id": annotator,
                "selections": {g: list(sel) for g, sel in req.selections.items()},
                "submitted_at": datetime.now(timezone.utc).isoformat(),
            }
        )
        return Ack(task_id=req.task_id)

    @app.get("/report/preferences", response_model=WinRateResponse)
    def report_preferences() -> WinRateResponse:
        judgments = store.preference_judgments()
        if not judgments:
            raise HTTPException(status_code=400, detail="no preference submissions yet")
        report = judge.win_rate(judgments)
        return WinRateResponse(
            wins_a=report.wins_a,
            wins_b=report.wins_b,
            ties=report.ties,
            inconsistent=report.inconsistent,
            n=report.n,
            overall=report.overall,
            per_grade={str(g): r for g, r in report.per_grade.items()},
        )

    @app.get("/report/strategies")
    def report_strategies() -> dict[str, dict[str, float]]:
        proportions = store.strategy_proportions()
        if not proportions:
            raise HTTPException(status_code=400, detail="no strategy submissions yet")
        return proportions

    @app.post("/score", response_model=ScoreResponse)
    def score(req: ScoreRequest) -> ScoreResponse:
        try:
            stats = analyze(req.text, DEFAULT_CONFIG)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        f, g = fkgl(stats), gunning_fog(stats, req.gfi_variant)
        a, c = ari(stats), coleman_liau(stats)
        return ScoreResponse(fkgl=f, gfi=g, ari=a, cli=c, rgl=(f + g + a + c) / 4.0)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "tasks": len(store.tasks)}

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
