import time

import pytest
from fastapi.testclient import TestClient

from conftest import make_graph
from textmentor import auth as auth_tokens
from textmentor.config import ServiceConfig
from textmentor.feedback import FeedbackMode
from textmentor.pipeline import Assignment
from textmentor.service import ServiceRuntime, create_app

ESSAY = (
    "Learning needs feedback to improve. Writing about learning helps students. "
    "Feedback guides writing and learning goals. Clear goals focus learning work."
)

REFERENCE = make_graph(
    ["learn", "feedback", "write", "goal", "student"],
    [
        ("feedback", "learn", 2),
        ("learn", "write", 1),
        ("goal", "learn", 1),
        ("learn", "student", 1),
    ],
)


def build_runtime(tmp_path, queue_depth=8, start=True):
    issuer = auth_tokens.generate_issuer_key()
    public_pem = tmp_path / "issuer_public.pem"
    public_pem.write_bytes(auth_tokens.issuer_public_pem(issuer))
    config = ServiceConfig(
        data_dir=tmp_path / "data",
        transport="inprocess",
        issuer_public_key_file=public_pem,
        queue_depth=queue_depth,
        pipeline_workers=1,
        route_retries=2,
        route_backoff_seconds=0.001,
        default_assignment_id="a1",
    )
    runtime = ServiceRuntime(config)
    runtime.assignments.save(
        Assignment(
            assignment_id="a1",
            title="Essay on learning",
            prompt_text="Write a short essay about learning and feedback.",
            reference_graph=REFERENCE,
            mode=FeedbackMode.COMPARISON,
            template_id="comparison",
            language="en",
            min_words=5,
        )
    )
    if start:
        runtime.start()
    return runtime, issuer


@pytest.fixture
def api(tmp_path):
    runtime, issuer = build_runtime(tmp_path)
    client = TestClient(create_app(runtime))
    token = auth_tokens.mint_token("student-a", issuer, ttl_seconds=600)
    yield client, token, issuer, runtime
    runtime.stop()


def auth_header(token):
    return {"Authorization": f"Bearer {token}"}


def open_session(client, token):
    response = client.post("/sessions", json={}, headers=auth_header(token))
    assert response.status_code == 200
    return response.json()


def wait_for_state(client, token, session_id, state, timeout=8.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        payload = client.get(f"/sessions/{session_id}", headers=auth_header(token)).json()
        if payload["state"] == state:
            return payload
        time.sleep(0.05)
    raise AssertionError(f"session never reached {state}: {payload}")


def drive_to_feedback(client, token, essay=ESSAY):
    session = open_session(client, token)
    session_id = session["session_id"]
    client.post(
        f"/sessions/{session_id}/messages", json={"text": "hi"}, headers=auth_header(token)
    )
    client.post(
        f"/sessions/{session_id}/messages", json={"text": "start"}, headers=auth_header(token)
    )
    upload = client.post(
        f"/sessions/{session_id}/upload",
        files={"file": ("essay.txt", essay.encode("utf-8"), "text/plain")},
        headers=auth_header(token),
    )
    assert upload.status_code == 200, upload.text
    payload = wait_for_state(client, token, session_id, "FeedbackDelivered")
    link = next(e for e in reversed(payload["history"]) if e["kind"] == "feedback-link")
    return session_id, link["document_id"]


class TestHappyPath:
    def test_full_conversation(self, api):
        client, token, _, _ = api
        session = open_session(client, token)
        assert session["state"] == "Greeting"
        assert session["replies"][0]["text"]

        session_id = session["session_id"]
        offered = client.post(
            f"/sessions/{session_id}/messages",
            json={"text": "hello"},
            headers=auth_header(token),
        ).json()
        assert offered["state"] == "TaskOffered"
        assert "essay" in offered["replies"][0]["text"]

        ready = client.post(
            f"/sessions/{session_id}/messages",
            json={"text": "start"},
            headers=auth_header(token),
        ).json()
        assert ready["state"] == "AwaitingSubmission"

        upload = client.post(
            f"/sessions/{session_id}/upload",
            files={"file": ("essay.txt", ESSAY.encode("utf-8"), "text/plain")},
            headers=auth_header(token),
        ).json()
        assert upload["state"] == "Processing"

        payload = wait_for_state(client, token, session_id, "FeedbackDelivered")
        link = next(e for e in reversed(payload["history"]) if e["kind"] == "feedback-link")
        document = client.get(f"/documents/{link['document_id']}", headers=auth_header(token))
        assert document.status_code == 200
        assert document.headers["content-type"].startswith("text/html")
        assert "<svg" in document.text

    def test_short_upload_fails_back_to_awaiting(self, api):
        client, token, _, runtime = api
        runtime.assignments.save(
            Assignment(
                assignment_id="strict",
                title="strict",
                prompt_text="p",
                reference_graph=REFERENCE,
                mode=FeedbackMode.COMPARISON,
                template_id="comparison",
                language="en",
                min_words=300,
            )
        )
        created = client.post(
            "/sessions", json={"assignment_id": "strict"}, headers=auth_header(token)
        ).json()
        session_id = created["session_id"]
        client.post(
            f"/sessions/{session_id}/messages", json={"text": "x"}, headers=auth_header(token)
        )
        client.post(
            f"/sessions/{session_id}/messages", json={"text": "start"}, headers=auth_header(token)
        )
        client.post(
            f"/sessions/{session_id}/upload",
            files={"file": ("tiny.txt", b"ten words are not enough", "text/plain")},
            headers=auth_header(token),
        )
        payload = wait_for_state(client, token, session_id, "AwaitingSubmission")
        failure = next(
            e for e in reversed(payload["history"]) if "too short" in e.get("content", "")
        )
        assert "300" in failure["content"]

    def test_revision_resubmission(self, api):
        client, token, _, _ = api
        session_id, first_doc = drive_to_feedback(client, token)
        second = client.post(
            f"/sessions/{session_id}/upload",
            files={"file": ("v2.txt", (ESSAY + " Revised thoughts.").encode(), "text/plain")},
            headers=auth_header(token),
        ).json()
        assert second["state"] == "Processing"
        payload = wait_for_state(client, token, session_id, "FeedbackDelivered")
        links = [e["document_id"] for e in payload["history"] if e["kind"] == "feedback-link"]
        assert len(links) == 2

    def test_done_closes_session(self, api):
        client, token, _, _ = api
        session_id, _ = drive_to_feedback(client, token)
        closed = client.post(
            f"/sessions/{session_id}/messages", json={"text": "done"}, headers=auth_header(token)
        ).json()
        assert closed["state"] == "Closed"
        after = client.post(
            f"/sessions/{session_id}/messages", json={"text": "more"}, headers=auth_header(token)
        )
        assert after.status_code == 409
        assert after.json()["code"] == "session_closed"


class TestValidation:
    def test_health_is_public(self, api):
        client, _, _, _ = api
        assert client.get("/health").json() == {"status": "ok"}

    def test_assignments_listing(self, api):
        client, token, _, _ = api
        listed = client.get("/assignments", headers=auth_header(token)).json()
        assert listed[0]["assignment_id"] == "a1"
        assert listed[0]["mode"] == "comparison"

    def test_unknown_session_404(self, api):
        client, token, _, _ = api
        response = client.get("/sessions/feedbeef", headers=auth_header(token))
        assert response.status_code == 404
        assert response.json()["code"] == "unknown_session"

    def test_unknown_document_404(self, api):
        client, token, _, _ = api
        response = client.get("/documents/feedbeef", headers=auth_header(token))
        assert response.status_code == 404

    def test_unknown_assignment_404(self, api):
        client, token, _, _ = api
        response = client.post(
            "/sessions", json={"assignment_id": "ghost"}, headers=auth_header(token)
        )
        assert response.status_code == 404

    def test_invalid_message_body_422(self, api):
        client, token, _, _ = api
        session = open_session(client, token)
        response = client.post(
            f"/sessions/{session['session_id']}/messages",
            json={"wrong": 1},
            headers=auth_header(token),
        )
        assert response.status_code == 422
        assert response.json()["code"] == "invalid_body"

    def test_non_multipart_upload_422(self, api):
        client, token, _, _ = api
        session = open_session(client, token)
        response = client.post(
            f"/sessions/{session['session_id']}/upload",
            json={"not": "a file"},
            headers=auth_header(token),
        )
        assert response.status_code == 422

    def test_binary_media_type_rejected(self, api):
        client, token, _, _ = api
        session = open_session(client, token)
        response = client.post(
            f"/sessions/{session['session_id']}/upload",
            files={"file": ("x.png", b"\x89PNG", "image/png")},
            headers=auth_header(token),
        )
        assert response.status_code == 422
        assert response.json()["code"] == "unsupported_media_type"

    def test_oversize_upload_rejected(self, tmp_path):
        runtime, issuer = build_runtime(tmp_path, start=False)
        runtime.config.max_upload_bytes = 100
        client = TestClient(create_app(runtime))
        token = auth_tokens.mint_token("s", issuer, ttl_seconds=600)
        session = open_session(client, token)
        response = client.post(
            f"/sessions/{session['session_id']}/upload",
            files={"file": ("big.txt", b"x" * 5000, "text/plain")},
            headers=auth_header(token),
        )
        assert response.status_code == 422
        assert response.json()["code"] == "upload_too_large"


class TestAuthorization:
    def test_missing_token(self, api):
        client, _, _, _ = api
        assert client.get("/assignments").status_code == 401
        assert client.post("/sessions", json={}).status_code == 401

    def test_expired_token(self, api):
        client, _, issuer, _ = api
        expired = auth_tokens.mint_token(
            "student-a", issuer, ttl_seconds=10, now=int(time.time()) - 100
        )
        response = client.get("/assignments", headers=auth_header(expired))
        assert response.status_code == 401
        assert response.json()["code"] == "token_expired"

    def test_wrong_key_token(self, api):
        client, _, _, _ = api
        stranger = auth_tokens.generate_issuer_key()
        forged = auth_tokens.mint_token("student-a", stranger, ttl_seconds=600)
        response = client.get("/assignments", headers=auth_header(forged))
        assert response.status_code == 401
        assert response.json()["code"] == "token_invalid"

    def test_foreign_session_403(self, api):
        client, token, issuer, _ = api
        other = auth_tokens.mint_token("student-b", issuer, ttl_seconds=600)
        session = open_session(client, token)
        session_id = session["session_id"]
        for method, url, kwargs in [
            ("get", f"/sessions/{session_id}", {}),
            ("post", f"/sessions/{session_id}/messages", {"json": {"text": "hi"}}),
            (
                "post",
                f"/sessions/{session_id}/upload",
                {"files": {"file": ("a.txt", b"words", "text/plain")}},
            ),
            ("delete", f"/sessions/{session_id}", {}),
        ]:
            response = getattr(client, method)(url, headers=auth_header(other), **kwargs)
            assert response.status_code == 403, (method, url)
            assert response.json()["code"] == "foreign_session"

    def test_foreign_document_403(self, api):
        client, token, issuer, _ = api
        _, document_id = drive_to_feedback(client, token)
        other = auth_tokens.mint_token("student-b", issuer, ttl_seconds=600)
        response = client.get(f"/documents/{document_id}", headers=auth_header(other))
        assert response.status_code == 403


class TestBackpressure:
    def test_busy_reply_when_queue_full(self, tmp_path):
        runtime, issuer = build_runtime(tmp_path, queue_depth=1, start=False)
        runtime.executor.queue.put_nowait("occupied")
        client = TestClient(create_app(runtime))
        token = auth_tokens.mint_token("s", issuer, ttl_seconds=600)
        session = open_session(client, token)
        session_id = session["session_id"]
        client.post(
            f"/sessions/{session_id}/messages", json={"text": "x"}, headers=auth_header(token)
        )
        client.post(
            f"/sessions/{session_id}/messages", json={"text": "start"}, headers=auth_header(token)
        )
        response = client.post(
            f"/sessions/{session_id}/upload",
            files={"file": ("a.txt", ESSAY.encode(), "text/plain")},
            headers=auth_header(token),
        ).json()
        assert response.get("busy") is True
        assert response["state"] == "AwaitingSubmission"  # unchanged, upload not dropped silently


class TestSessionLifecycle:
    def test_delete_session_removes_documents(self, api):
        client, token, _, runtime = api
        session_id, document_id = drive_to_feedback(client, token)
        deleted = client.delete(f"/sessions/{session_id}", headers=auth_header(token)).json()
        assert deleted["deleted"] is True
        assert deleted["documents_removed"] == 1
        assert client.get(
            f"/documents/{document_id}", headers=auth_header(token)
        ).status_code == 404
        assert client.get(
            f"/sessions/{session_id}", headers=auth_header(token)
        ).status_code == 404

    def test_history_survives_restart(self, tmp_path):
        runtime, issuer = build_runtime(tmp_path)
        client = TestClient(create_app(runtime))
        token = auth_tokens.mint_token("s", issuer, ttl_seconds=600)
        session = open_session(client, token)
        session_id = session["session_id"]
        client.post(
            f"/sessions/{session_id}/messages", json={"text": "hi"}, headers=auth_header(token)
        )
        before = client.get(f"/sessions/{session_id}", headers=auth_header(token)).json()
        runtime.stop()

        reborn = ServiceRuntime(runtime.config)
        client2 = TestClient(create_app(reborn))
        after = client2.get(f"/sessions/{session_id}", headers=auth_header(token)).json()
        assert after["state"] == before["state"] == "TaskOffered"
        assert after["history"] == before["history"]
