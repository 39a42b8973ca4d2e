"""Operator scaffolding: create a runnable service directory and the
scripted end-to-end demo session.

The demo exercises the full path a student submission takes: session
creation, task offer, upload over HTTP, cleaning and graph build on
the chat node, the encrypted relay hop, comparison and template fill
on the analysis node, and the downloadable feedback document.
"""

import json
import re
import threading
import time
from pathlib import Path

import httpx
import uvicorn

from . import auth as auth_tokens
from . import resources
from .builder import graph_from_raw_text
from .config import load_config, write_config
from .feedback import FeedbackMode
from .pipeline import Assignment
from .service import ServiceRuntime, create_app
from .textprep import RawSubmissionText

SAMPLE_ASSIGNMENT_ID = "reading-essay-1"


def scaffold(target_dir, language: str = "en", transport: str = "tcp") -> Path:
    """Create keys, config, and a sample assignment under target_dir."""
    target = Path(target_dir)
    target.mkdir(parents=True, exist_ok=True)
    issuer_key = auth_tokens.generate_issuer_key()
    (target / "issuer_private.pem").write_bytes(auth_tokens.issuer_key_pem(issuer_key))
    (target / "issuer_public.pem").write_bytes(auth_tokens.issuer_public_pem(issuer_key))
    (target / "issuer_private.pem").chmod(0o600)
    write_config(
        target / "config.json",
        {
            "data_dir": "data",
            "host": "127.0.0.1",
            "port": 8600,
            "relay": {"host": "127.0.0.1", "port": 0},
            "bot_listener": {"port": 0},
            "analysis_listener": {"port": 0},
            "issuer_public_key_file": "issuer_public.pem",
            "issuer_private_key_file": "issuer_private.pem",
            "queue_depth": 16,
            "pipeline_workers": 2,
            "max_upload_bytes": 1_048_576,
            "default_assignment_id": SAMPLE_ASSIGNMENT_ID,
            "transport": transport,
        },
    )
    config = load_config(target / "config.json")
    seed_sample_assignment(config.data_dir, language=language)
    return target / "config.json"


def seed_sample_assignment(data_dir, language: str = "en") -> Assignment:
    """Build the reference graph from the bundled reading and store it."""
    from .pipeline import AssignmentStore

    reference_text = resources.sample_text("reference_learning.en")
    raw = RawSubmissionText(
        content=reference_text,
        declared_language=language,
        source_id="sample:reference_learning.en",
    )
    reference_graph = graph_from_raw_text(raw, min_words=300)
    assignment = Assignment(
        assignment_id=SAMPLE_ASSIGNMENT_ID,
        title="Learning from texts in self-study",
        prompt_text=(
            "Read the chapter 'Learning from texts in self-study'. Then write a short "
            "essay (at least 300 words) about what the chapter says on self-regulated "
            "learning, feedback, and why writing helps you learn from a text."
        ),
        reference_graph=reference_graph,
        mode=FeedbackMode.COMPARISON,
        template_id="comparison",
        language=language,
        min_words=300,
    )
    AssignmentStore(Path(data_dir) / "assignments").save(assignment)
    return assignment


class _UvicornThread:
    """uvicorn on an ephemeral port, started in a daemon thread."""

    def __init__(self, app, host: str = "127.0.0.1", port: int = 0):
        self.server = uvicorn.Server(
            uvicorn.Config(app, host=host, port=port, log_level="warning")
        )
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def start(self, timeout: float = 10.0):
        self.thread.start()
        deadline = time.monotonic() + timeout
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("HTTP server failed to start")
            time.sleep(0.02)
        sock = self.server.servers[0].sockets[0]
        return sock.getsockname()[:2]

    def stop(self):
        self.server.should_exit = True
        self.thread.join(timeout=10)


def run_demo(workdir, echo=print) -> Path:
    """Scripted walk through the full feedback path; returns the HTML path.

    Raises on any deviation from the expected flow, so callers can map
    success to exit code 0.
    """
    workdir = Path(workdir)
    config_path = scaffold(workdir, transport="tcp")
    config = load_config(config_path)
    runtime = ServiceRuntime(config)
    runtime.start()
    runtime.recover()
    server = _UvicornThread(create_app(runtime))
    try:
        host, port = server.start()
        base = f"http://{host}:{port}"
        issuer_key = auth_tokens.load_issuer_key(
            Path(config.issuer_private_key_file).read_bytes()
        )
        token = auth_tokens.mint_token("demo-student", issuer_key, ttl_seconds=3600)
        headers = {"Authorization": f"Bearer {token}"}
        essay = resources.sample_text("student_essay.en")

        with httpx.Client(base_url=base, headers=headers, timeout=10.0) as client:
            health = client.get("/health")
            health.raise_for_status()
            echo(f"service is up at {base}")

            created = client.post("/sessions", json={})
            created.raise_for_status()
            session_id = created.json()["session_id"]
            echo(f"session {session_id[:12]}... opened")
            echo(f"bot: {created.json()['replies'][0]['text']}")

            offered = client.post(f"/sessions/{session_id}/messages", json={"text": "hello"})
            offered.raise_for_status()
            echo(f"bot: {offered.json()['replies'][0]['text'][:80]}...")

            ready = client.post(f"/sessions/{session_id}/messages", json={"text": "start"})
            ready.raise_for_status()
            echo(f"bot: {ready.json()['replies'][0]['text']}")

            uploaded = client.post(
                f"/sessions/{session_id}/upload",
                files={"file": ("essay.txt", essay.encode("utf-8"), "text/plain")},
            )
            uploaded.raise_for_status()
            echo(f"bot: {uploaded.json()['replies'][0]['text']}")

            document_id = _poll_for_document(client, session_id, timeout=8.0)
            echo("feedback is ready")

            document = client.get(f"/documents/{document_id}")
            document.raise_for_status()
            html = document.text

        _verify_demo_document(html)
        out_path = workdir / "feedback.html"
        out_path.write_text(html, encoding="utf-8")
        echo(f"feedback document written to {out_path}")
        return out_path
    finally:
        server.stop()
        runtime.stop()


def _poll_for_document(client, session_id: str, timeout: float) -> str:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        state = client.get(f"/sessions/{session_id}")
        state.raise_for_status()
        payload = state.json()
        if payload["state"] == "FeedbackDelivered":
            for entry in reversed(payload["history"]):
                if entry.get("kind") == "feedback-link" and entry.get("document_id"):
                    return entry["document_id"]
            raise RuntimeError("feedback delivered but no document link in history")
        if payload["state"] not in ("Processing", "FeedbackDelivered"):
            raise RuntimeError(f"unexpected session state {payload['state']}")
        time.sleep(0.1)
    raise RuntimeError("timed out waiting for feedback")


def parse_document_measures(html: str) -> dict:
    """measure name -> float value as rendered in a feedback document."""
    return {
        name: float(value)
        for name, value in re.findall(
            r'data-measure="([a-z_]+)">(\d+\.\d+)</span>', html
        )
    }


def parse_document_list(html: str, list_name: str) -> list:
    match = re.search(r'data-list="%s">([^<]*)</span>' % re.escape(list_name), html)
    if match is None:
        return []
    text = match.group(1).strip()
    return [part.strip() for part in text.split(",") if part.strip()]


def _verify_demo_document(html: str):
    """The demo's self-check: six in-range measures, shared concepts, a graph."""
    measures = parse_document_measures(html)
    if len(measures) != 6:
        raise RuntimeError(f"expected 6 measure values in the document, found {len(measures)}")
    for name, value in measures.items():
        if not 0.0 <= value <= 1.0:
            raise RuntimeError(f"measure {name} value {value} out of range")
    if "<svg" not in html:
        raise RuntimeError("document contains no embedded graph drawing")
    if not parse_document_list(html, "shared_concepts"):
        raise RuntimeError("document lists no shared concepts")
