"""Annotation service tests: sessions, blinding, validation, durability,
and aggregation."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from readctrl import annoserve as srv


def write_fixtures(tmp_path, n_tasks=4, mode="preference"):
    tasks_path = tmp_path / "tasks.jsonl"
    with tasks_path.open("w", encoding="utf-8") as fh:
        for i in range(n_tasks):
            fh.write(
                json.dumps(
                    {
                        "task_id": f"t{i}",
                        "input": f"Input text number {i}.",
                        "system_a": {f"g{g}": f"alpha output {i} grade {g}" for g in (2, 5, 8, 11)},
                        "system_b": {f"g{g}": f"beta output {i} grade {g}" for g in (2, 5, 8, 11)},
                        "mode": mode,
                    }
                )
                + "\n"
            )
    annotators_path = tmp_path / "annotators.json"
    annotators_path.write_text(
        json.dumps([{"id": f"ann{i}", "token": f"tok{i}"} for i in range(5)]),
        encoding="utf-8",
    )
    return tasks_path, annotators_path


def make_client(tmp_path, seed=7, **kw):
    tasks_path, annotators_path = write_fixtures(tmp_path, **kw)
    app = srv.create_app(tasks_path, annotators_path, seed=seed, log_path=tmp_path / "events.jsonl")
    return TestClient(app), app


def open_session(client, annotator="ann0", token="tok0"):
    resp = client.post("/session", json={"annotator_id": annotator, "token": token})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    return {"X-Session": body["session"]}, body["queue"]


def full_choices(choice="left"):
    return {str(g): {"choice": choice, "reason": f"reason {g}"} for g in (2, 5, 8, 11)}


# --- sessions -------------------------------------------------------------------


def test_fresh_annotator_gets_full_queue(tmp_path):
    client, _ = make_client(tmp_path, n_tasks=4)
    _, queue = open_session(client)
    assert queue == ["t0", "t1", "t2", "t3"]


def test_queue_excludes_completed_tasks(tmp_path):
    client, _ = make_client(tmp_path, n_tasks=3)
    headers, _ = open_session(client)
    resp = client.post("/preference", json={"task_id": "t1", "choices": full_choices()}, headers=headers)
    assert resp.status_code == 200
    _, queue = open_session(client)
    assert queue == ["t0", "t2"]


def test_unknown_annotator_rejected(tmp_path):
    client, _ = make_client(tmp_path)
    resp = client.post("/session", json={"annotator_id": "nobody", "token": "x"})
    assert resp.status_code == 401
    resp = client.post("/session", json={"annotator_id": "ann0", "token": "wrong"})
    assert resp.status_code == 401


def test_endpoints_require_session(tmp_path):
    client, _ = make_client(tmp_path)
    assert client.get("/task/t0").status_code == 401
    assert client.post("/preference", json={"task_id": "t0", "choices": full_choices()}).status_code == 401


# --- blinding -------------------------------------------------------------------


def test_task_view_is_blinded(tmp_path):
    client, _ = make_client(tmp_path)
    headers, _ = open_session(client)
    resp = client.get("/task/t0", headers=headers)
    assert resp.status_code == 200
    text = resp.text.lower()
    assert "system_a" not in text
    assert "system_b" not in text
    body = resp.json()
    assert set(body["outputs"].keys()) == {"2", "5", "8", "11"}
    assert {"left", "right"} == set(body["outputs"]["2"].keys())


def test_blinding_is_stable_per_task(tmp_path):
    client, _ = make_client(tmp_path)
    headers, _ = open_session(client)
    first = client.get("/task/t0", headers=headers).json()
    second = client.get("/task/t0", headers=headers).json()
    assert first == second


def test_blinding_varies_across_tasks_and_seeds(tmp_path):
    # with enough tasks both left assignments occur
    sides = {srv.blinding_side(7, f"t{i}") for i in range(32)}
    assert sides == {"a", "b"}
    # and the assignment is a pure function of (seed, task)
    assert srv.blinding_side(7, "t0") == srv.blinding_side(7, "t0")


def test_unknown_task_404(tmp_path):
    client, _ = make_client(tmp_path)
    headers, _ = open_session(client)
    assert client.get("/task/zzz", headers=headers).status_code == 404


# --- preference submissions -------------------------------------------------------


def test_missing_reason_is_rejected(tmp_path):
    client, _ = make_client(tmp_path)
    headers, _ = open_session(client)
    choices = full_choices()
    choices["8"]["reason"] = "  "
    resp = client.post("/preference", json={"task_id": "t0", "choices": choices}, headers=headers)
    assert resp.status_code == 400
    assert "8" in resp.text


def test_missing_grade_is_rejected(tmp_path):
    client, _ = make_client(tmp_path)
    headers, _ = open_session(client)
    choices = full_choices()
    del choices["5"]
    resp = client.post("/preference", json={"task_id": "t0", "choices": choices}, headers=headers)
    assert resp.status_code == 400


def test_resubmission_replaces(tmp_path):
    client, app = make_client(tmp_path)
    headers, _ = open_session(client)
    client.post("/preference", json={"task_id": "t0", "choices": full_choices("left")}, headers=headers)
    client.post("/preference", json={"task_id": "t0", "choices": full_choices("right")}, headers=headers)
    store = app.state.store
    assert len(store.preferences) == 1
    assert store.preferences[("t0", "ann0")]["choices"]["2"]["choice"] == "right"


# --- strategy submissions ---------------------------------------------------------


def test_strategy_submission_valid(tmp_path):
    client, _ = make_client(tmp_path, mode="strategy")
    headers, _ = open_session(client)
    selections = {
        "2": list(srv.STRATEGY_TAXONOMY[2][:2]),
        "5": [],
        "8": [srv.STRATEGY_TAXONOMY[8][0]],
        "11": [],
    }
    resp = client.post("/strategy", json={"task_id": "t0", "selections": selections}, headers=headers)
    assert resp.status_code == 200


def test_preference_on_strategy_task_rejected(tmp_path):
    client, _ = make_client(tmp_path, mode="strategy")
    headers, _ = open_session(client)
    resp = client.post("/preference", json={"task_id": "t0", "choices": full_choices()}, headers=headers)
    assert resp.status_code == 400


def test_strategy_on_preference_task_rejected(tmp_path):
    client, _ = make_client(tmp_path, mode="preference")
    headers, _ = open_session(client)
    resp = client.post(
        "/strategy",
        json={"task_id": "t0", "selections": {"2": [], "5": [], "8": [], "11": []}},
        headers=headers,
    )
    assert resp.status_code == 400


def test_strategy_from_wrong_grade_rejected(tmp_path):
    client, _ = make_client(tmp_path, mode="strategy")
    headers, _ = open_session(client)
    selections = {"2": [srv.STRATEGY_TAXONOMY[11][0]]}
    resp = client.post("/strategy", json={"task_id": "t0", "selections": selections}, headers=headers)
    assert resp.status_code == 400


def test_strategy_view_shows_system_a_on_left(tmp_path):
    client, app = make_client(tmp_path, mode="strategy")
    headers, _ = open_session(client)
    body = client.get("/task/t0", headers=headers).json()
    task = app.state.store.tasks["t0"]
    assert body["outputs"]["2"]["left"] == task.system_a[2]
    assert body["strategies"]["5"] == list(srv.STRATEGY_TAXONOMY[5])


def test_strategy_empty_selection_accepted(tmp_path):
    client, _ = make_client(tmp_path, mode="strategy")
    headers, _ = open_session(client)
    resp = client.post(
        "/strategy",
        json={"task_id": "t0", "selections": {"2": [], "5": [], "8": [], "11": []}},
        headers=headers,
    )
    assert resp.status_code == 200


# --- aggregation -----------------------------------------------------------------


def test_aggregate_preferences_hand_count(tmp_path):
    client, app = make_client(tmp_path, n_tasks=1)
    store = app.state.store
    left_is = store.blinding["t0"]
    # 4 annotators: 3 choose left, 1 chooses tie, on every grade
    for i, choice in enumerate(["left", "left", "left", "tie"]):
        headers, _ = open_session(client, f"ann{i}", f"tok{i}")
        client.post("/preference", json={"task_id": "t0", "choices": full_choices(choice)}, headers=headers)
    report = client.get("/report/preferences").json()
    assert report["n"] == 16  # 4 annotators x 4 grades, counted individually
    expected_winner = "wins_a" if left_is == "a" else "wins_b"
    assert report[expected_winner] == 12
    assert report["ties"] == 4
    assert report["overall"]["system_a" if left_is == "a" else "system_b"] == 0.75


def test_aggregate_all_ties(tmp_path):
    client, _ = make_client(tmp_path, n_tasks=1)
    headers, _ = open_session(client)
    client.post("/preference", json={"task_id": "t0", "choices": full_choices("tie")}, headers=headers)
    report = client.get("/report/preferences").json()
    assert report["overall"]["tie"] == 1.0


def test_aggregate_single_submission_rates_are_zero_or_one(tmp_path):
    client, _ = make_client(tmp_path, n_tasks=1)
    headers, _ = open_session(client)
    client.post("/preference", json={"task_id": "t0", "choices": full_choices("left")}, headers=headers)
    report = client.get("/report/preferences").json()
    for value in report["overall"].values():
        assert value in (0.0, 1.0)


def test_aggregate_preferences_empty_is_error(tmp_path):
    client, _ = make_client(tmp_path)
    assert client.get("/report/preferences").status_code == 400


def test_aggregate_strategies_proportions(tmp_path):
    client, _ = make_client(tmp_path, n_tasks=4, mode="strategy")
    chosen = srv.STRATEGY_TAXONOMY[2][0]
    # the strategy is selected on 3 of 4 annotated tasks
    headers, _ = open_session(client)
    for i, selected in enumerate([[chosen], [chosen], [chosen], []]):
        client.post(
            "/strategy",
            json={"task_id": f"t{i}", "selections": {"2": selected, "5": [], "8": [], "11": []}},
            headers=headers,
        )
    report = client.get("/report/strategies").json()
    assert report["2"][chosen] == 0.75
    # never-selected strategies are present with 0.0
    assert report["2"][srv.STRATEGY_TAXONOMY[2][3]] == 0.0


def test_aggregate_strategies_table_shape(tmp_path):
    client, _ = make_client(tmp_path, n_tasks=8, mode="strategy")
    headers, _ = open_session(client)
    s = srv.STRATEGY_TAXONOMY[2]
    # descending-proportion fixture: strategy k selected on 8-2k tasks
    for i in range(8):
        selected = [s[k] for k in range(4) if i < 8 - 2 * k]
        client.post(
            "/strategy",
            json={"task_id": f"t{i}", "selections": {"2": selected, "5": [], "8": [], "11": []}},
            headers=headers,
        )
    report = client.get("/report/strategies").json()
    props = [report["2"][s[k]] for k in range(4)]
    assert props == [1.0, 0.75, 0.5, 0.25]


# --- durability ------------------------------------------------------------------


def test_restart_preserves_submissions_and_blinding(tmp_path):
    tasks_path, annotators_path = write_fixtures(tmp_path, n_tasks=3)
    log = tmp_path / "events.jsonl"
    app1 = srv.create_app(tasks_path, annotators_path, seed=11, log_path=log)
    client1 = TestClient(app1)
    headers, _ = open_session(client1)
    client1.post("/preference", json={"task_id": "t0", "choices": full_choices("left")}, headers=headers)
    view_before = client1.get("/task/t1", headers=headers).json()
    # no graceful shutdown: the app object is simply dropped

    app2 = srv.create_app(tasks_path, annotators_path, seed=11, log_path=log)
    client2 = TestClient(app2)
    store = app2.state.store
    assert ("t0", "ann0") in store.preferences
    headers2, queue = open_session(client2)
    assert "t0" not in queue
    view_after = client2.get("/task/t1", headers=headers2).json()
    assert view_after == view_before


def test_aggregation_equals_event_log_recount(tmp_path):
    client, app = make_client(tmp_path, n_tasks=2)
    for i, choice in enumerate(["left", "right", "tie"]):
        headers, _ = open_session(client, f"ann{i}", f"tok{i}")
        for t in ("t0", "t1"):
            client.post("/preference", json={"task_id": t, "choices": full_choices(choice)}, headers=headers)
    report = client.get("/report/preferences").json()

    # brute-force recount from the raw event log
    store = app.state.store
    events = [
        json.loads(line)
        for line in (store.log_path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    latest = {}
    for e in events:
        if e["type"] == "preference_submitted":
            latest[(e["task_id"], e["annotator_id"])] = e
    counts = {"system_a": 0, "system_b": 0, "tie": 0}
    for (task_id, _), e in latest.items():
        for g, entry in e["choices"].items():
            counts[store.unblind(task_id, entry["choice"])] += 1
    assert report["wins_a"] == counts["system_a"]
    assert report["wins_b"] == counts["system_b"]
    assert report["ties"] == counts["tie"]
    assert report["n"] == sum(counts.values())


# --- score endpoint ---------------------------------------------------------------


def test_ui_mount_serves_static_assets(tmp_path):
    tasks_path, annotators_path = write_fixtures(tmp_path)
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body>annotation ui</body></html>", encoding="utf-8")
    app = srv.create_app(
        tasks_path, annotators_path, seed=1, log_path=tmp_path / "e.jsonl", ui_dir=ui
    )
    client = TestClient(app)
    resp = client.get("/ui/")
    assert resp.status_code == 200
    assert "annotation ui" in resp.text


def test_score_endpoint(tmp_path):
    client, _ = make_client(tmp_path)
    resp = client.post("/score", json={"text": "Cats sleep. Dogs run."})
    assert resp.status_code == 200
    body = resp.json()
    assert body["rgl"] == pytest.approx((body["fkgl"] + body["gfi"] + body["ari"] + body["cli"]) / 4)


def test_score_endpoint_rejects_empty(tmp_path):
    client, _ = make_client(tmp_path)
    assert client.post("/score", json={"text": "1234"}).status_code == 400
