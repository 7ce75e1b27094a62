import json

import pytest
from fastapi.testclient import TestClient

from ragmark.datastore import BenchmarkRecord, grade_to_dict, load_grades
from ragmark.grader import GradeScore
from ragmark.pipeline import GeneratedAnswer
from ragmark.service import create_app, store_for_run

GRADERS = ("alice", "bob")


def _records(n=4):
    return [
        BenchmarkRecord(
            question_id=f"q{i:03d}",
            subject_area="Fraud",
            question=f"Question {i}?",
            label=f"Label {i}.",
        )
        for i in range(1, n + 1)
    ]


def _answers(records):
    return [
        GeneratedAnswer(
            question_id=r.question_id,
            answer_text=f"Answer for {r.question_id}",
            retrieved=((0, 0.5),),
            generator_model="gpt-4",
            created_at="2026-01-01T00:00:00+00:00",
        )
        for r in records
    ]


@pytest.fixture
def run_dir(tmp_path):
    return tmp_path


@pytest.fixture
def client(run_dir):
    records = _records()
    store = store_for_run(records, _answers(records), GRADERS, run_dir)
    return TestClient(create_app(store, static_dir=run_dir / "no-static"))


def submit(client, grader, qid, score, reason="looks fine"):
    return client.post(
        "/api/grades",
        json={
            "grader_id": grader,
            "question_id": qid,
            "score": score,
            "reason": reason,
        },
    )


def test_fresh_grader_sees_first_item(client):
    resp = client.get("/api/next", params={"grader": "alice"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["question_id"] == "q001"
    assert set(body) == {
        "question_id", "subject_area", "question", "label", "answer", "rubric",
    }
    assert body["label"] == "Label 1."
    assert body["rubric"].startswith("1: The response is not aligned")


def test_unknown_grader_403(client):
    resp = client.get("/api/next", params={"grader": "mallory"})
    assert resp.status_code == 403
    assert resp.json() == {
        "code": "unknown_grader",
        "message": "grader 'mallory' is not registered",
    }


def test_submit_advances_cursor(client):
    assert submit(client, "alice", "q001", 4).status_code == 201
    assert client.get("/api/next", params={"grader": "alice"}).json()["question_id"] == "q002"


def test_two_graders_have_independent_cursors(client):
    # Scripted two-client interleaving oracle.
    expected_alice = ["q001", "q002", "q003", "q004"]
    expected_bob = ["q001", "q002", "q003", "q004"]
    seen_alice, seen_bob = [], []
    for step in range(4):
        a = client.get("/api/next", params={"grader": "alice"}).json()
        seen_alice.append(a["question_id"])
        submit(client, "alice", a["question_id"], 4)
        b = client.get("/api/next", params={"grader": "bob"}).json()
        seen_bob.append(b["question_id"])
        submit(client, "bob", b["question_id"], 2)
    assert seen_alice == expected_alice
    assert seen_bob == expected_bob


def test_all_items_graded_gives_no_content(client):
    for i in range(1, 5):
        submit(client, "alice", f"q{i:03d}", 3)
    assert client.get("/api/next", params={"grader": "alice"}).status_code == 204


def test_out_of_range_score_422(client):
    assert submit(client, "alice", "q001", 6).status_code == 422
    assert submit(client, "alice", "q001", 0).status_code == 422
    assert submit(client, "alice", "q001", "4").status_code == 422
    assert submit(client, "alice", "q001", 3.5).status_code == 422
    body = submit(client, "alice", "q001", 6).json()
    assert body["code"] == "invalid_score"


def test_duplicate_submission_409(client):
    assert submit(client, "alice", "q001", 4).status_code == 201
    resp = submit(client, "alice", "q001", 5)
    assert resp.status_code == 409
    assert resp.json()["code"] == "duplicate_grade"


def test_unknown_question_404(client):
    assert submit(client, "alice", "q999", 4).status_code == 404


def test_submission_persists_with_grader_id(client, run_dir):
    submit(client, "alice", "q001", 5, reason="complete and correct")
    grades = load_grades(run_dir / "grades.jsonl")
    assert len(grades) == 1
    grade = grades[0]
    assert isinstance(grade, GradeScore)
    assert grade.grader_id == "alice"
    assert grade.score == 5
    assert grade.reason == "complete and correct"


def test_human_grade_schema_identical_to_llm_grade(client, run_dir):
    submit(client, "alice", "q001", 4)
    human_line = json.loads((run_dir / "grades.jsonl").read_text().strip())
    llm_line = grade_to_dict(
        GradeScore(
            question_id="q001",
            grader_id="gpt-4",
            score=4,
            reason="r",
            raw_response="Score: [[4]], Reason: [[r]]",
        )
    )
    assert set(human_line) == set(llm_line)


def test_progress_counts(client):
    fresh = client.get("/api/progress").json()
    assert fresh["total"] == 4
    assert {g["grader_id"]: g["graded"] for g in fresh["graders"]} == {
        "alice": 0,
        "bob": 0,
    }
    submit(client, "alice", "q001", 4)
    submit(client, "alice", "q002", 2)
    after = client.get("/api/progress").json()
    counts = {g["grader_id"]: g["graded"] for g in after["graders"]}
    assert counts == {"alice": 2, "bob": 0}
    assert all(g["total"] == 4 for g in after["graders"])


def test_restart_resumes_without_double_serving(run_dir):
    records = _records()
    store = store_for_run(records, _answers(records), GRADERS, run_dir)
    client = TestClient(create_app(store, static_dir=run_dir / "none"))
    submit(client, "alice", "q001", 4)
    submit(client, "alice", "q002", 3)

    # Simulate a restart: rebuild state from the grades file alone.
    store2 = store_for_run(records, _answers(records), GRADERS, run_dir)
    client2 = TestClient(create_app(store2, static_dir=run_dir / "none"))
    assert client2.get("/api/next", params={"grader": "alice"}).json()["question_id"] == "q003"
    assert submit(client2, "alice", "q001", 5).status_code == 409
    progress = client2.get("/api/progress").json()
    assert {g["grader_id"]: g["graded"] for g in progress["graders"]}["alice"] == 2


def test_llm_grades_in_file_do_not_affect_human_cursor(run_dir):
    records = _records()
    grades_path = run_dir / "grades.jsonl"
    llm = GradeScore(
        question_id="q001", grader_id="gpt-4", score=4, raw_response="Score: [[4]]"
    )
    grades_path.write_text(json.dumps(grade_to_dict(llm)) + "\n")
    store = store_for_run(records, _answers(records), GRADERS, run_dir)
    client = TestClient(create_app(store, static_dir=run_dir / "none"))
    # Humans still start from q001; progress counts only registered graders.
    assert client.get("/api/next", params={"grader": "alice"}).json()["question_id"] == "q001"
    counts = {g["grader_id"]: g["graded"] for g in client.get("/api/progress").json()["graders"]}
    assert counts == {"alice": 0, "bob": 0}


def test_item_without_answer_is_not_served(run_dir):
    records = _records(3)
    answers = _answers(records)[:2]  # q003 unanswered
    store = store_for_run(records, answers, GRADERS, run_dir)
    client = TestClient(create_app(store, static_dir=run_dir / "none"))
    submit(client, "alice", "q001", 4)
    submit(client, "alice", "q002", 4)
    assert client.get("/api/next", params={"grader": "alice"}).status_code == 204
    assert client.get("/api/progress").json()["total"] == 2
