"""Submission processing across the relay.

The chat side cleans the text and builds the student graph, then seals
a feedback job to the analysis node and routes it through the relay.
The analysis node compares the graphs, fills the assignment's
template, exports the document, and seals the result back. Every
stage transition is journaled (fsynced) before the next stage starts,
so a process killed between stages can resume or cleanly fail the
submission on restart. Duplicated envelopes (at-least-once delivery)
are absorbed by job-id and terminal-status checks on both sides.
"""

import base64
import json
import queue
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

from . import resources
from .builder import (
    DEFAULT_MAX_CONCEPTS,
    DEFAULT_MAX_EDGES,
    graph_from_clean_text,
)
from .compare import ComparisonReport, compare
from .dialog import PipelineDone, PipelineFailed
from .errors import GraphFormatError, TextMentorError, Unreachable
from .feedback import FeedbackMode, FeedbackTemplate, export_document, fill_template
from .graphs import ConceptGraph
from .relay import Envelope, Node, Registry, Router, open_envelope
from .textprep import CleanText, Language, RawSubmissionText, clean_text

JOB_KIND = "feedback_job"
RESULT_KIND = "feedback_result"


class SubmissionStatus(str, Enum):
    RECEIVED = "Received"
    CLEANED = "Cleaned"
    GRAPH_BUILT = "GraphBuilt"
    COMPARED = "Compared"
    FEEDBACK_READY = "FeedbackReady"
    FAILED = "Failed"


STATUS_ORDER = (
    SubmissionStatus.RECEIVED,
    SubmissionStatus.CLEANED,
    SubmissionStatus.GRAPH_BUILT,
    SubmissionStatus.COMPARED,
    SubmissionStatus.FEEDBACK_READY,
)

TERMINAL_STATUSES = {SubmissionStatus.FEEDBACK_READY, SubmissionStatus.FAILED}


@dataclass
class Assignment:
    assignment_id: str
    title: str
    prompt_text: str
    reference_graph: ConceptGraph
    mode: FeedbackMode
    template_id: str
    language: str = "en"
    min_words: int = 300
    max_concepts: int = DEFAULT_MAX_CONCEPTS
    max_edges: int = DEFAULT_MAX_EDGES

    def __post_init__(self):
        if not self.reference_graph.vertices:
            raise ValueError("assignment reference graph must be non-empty")
        resources.template_body(self.template_id, self.language)  # raises if missing

    def to_dict(self) -> dict:
        return {
            "assignment_id": self.assignment_id,
            "title": self.title,
            "prompt_text": self.prompt_text,
            "reference_graph": self.reference_graph.to_dict(),
            "mode": FeedbackMode(self.mode).value,
            "template_id": self.template_id,
            "language": self.language,
            "min_words": self.min_words,
            "max_concepts": self.max_concepts,
            "max_edges": self.max_edges,
        }

    @classmethod
    def from_dict(cls, data: dict):
        return cls(
            assignment_id=data["assignment_id"],
            title=data["title"],
            prompt_text=data["prompt_text"],
            reference_graph=ConceptGraph.from_dict(data["reference_graph"]),
            mode=FeedbackMode(data["mode"]),
            template_id=data["template_id"],
            language=data.get("language", "en"),
            min_words=int(data.get("min_words", 300)),
            max_concepts=int(data.get("max_concepts", DEFAULT_MAX_CONCEPTS)),
            max_edges=int(data.get("max_edges", DEFAULT_MAX_EDGES)),
        )


class AssignmentStore:
    """Directory of assignment JSON files."""

    def __init__(self, root):
        from pathlib import Path

        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def save(self, assignment: Assignment):
        path = self.root / f"{assignment.assignment_id}.json"
        path.write_text(
            json.dumps(assignment.to_dict(), sort_keys=True, ensure_ascii=False, indent=2)
            + "\n",
            encoding="utf-8",
        )

    def get(self, assignment_id: str) -> Assignment:
        path = self.root / f"{assignment_id}.json"
        if not path.exists():
            raise KeyError(assignment_id)
        return Assignment.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def list(self) -> list:
        return sorted(
            (Assignment.from_dict(json.loads(p.read_text(encoding="utf-8")))
             for p in self.root.glob("*.json")),
            key=lambda a: a.assignment_id,
        )


# --------------------------------------------------------------------------
# Analysis side: compare + render, stateless per job
# --------------------------------------------------------------------------


def handle_feedback_job(job: dict) -> dict:
    """Compute the comparison and the exported document for one job."""
    job_id = job.get("job_id", "")
    try:
        if job.get("kind") != JOB_KIND:
            raise GraphFormatError(f"unexpected job kind {job.get('kind')!r}")
        student = ConceptGraph.from_dict(job["student_graph"])
        reference = ConceptGraph.from_dict(job["reference_graph"])
        mode = FeedbackMode(job["mode"])
        template = FeedbackTemplate.load(job["template_id"], job["language"])
        report = compare(student, reference)
        document = fill_template(
            template, report, mode, student_graph=student, reference_graph=reference
        )
        html = export_document(document)
        return {
            "kind": RESULT_KIND,
            "job_id": job_id,
            "ok": True,
            "report": report.to_dict(),
            "document_id": document.document_id,
            "document_html": base64.b64encode(html).decode("ascii"),
        }
    except (TextMentorError, KeyError, ValueError) as exc:
        code = getattr(exc, "code", "bad_job")
        return {
            "kind": RESULT_KIND,
            "job_id": job_id,
            "ok": False,
            "error_code": code,
            "error_message": str(exc),
        }


class AnalysisWorker:
    """Relay-facing loop for the compare-and-render node."""

    def __init__(self, node: Node, registry: Registry, router: Router, inbox):
        self.node = node
        self.registry = registry
        self.router = router
        self.inbox = inbox
        self._seen_envelopes = set()
        self._result_cache = {}
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="analysis-worker", daemon=True)

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        self._thread.join(timeout=5)

    def _run(self):
        while not self._stop.is_set():
            try:
                envelope = self.inbox.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                self.process(envelope)
            except TextMentorError:
                continue  # undecryptable or unroutable envelope: drop

    def process(self, envelope: Envelope):
        if envelope.envelope_id in self._seen_envelopes:
            return
        self._seen_envelopes.add(envelope.envelope_id)
        payload = open_envelope(self.node, envelope, self.registry)
        job = json.loads(payload.decode("utf-8"))
        job_id = job.get("job_id", "")
        result = self._result_cache.get(job_id)
        if result is None:
            result = handle_feedback_job(job)
            if job_id:
                self._result_cache[job_id] = result
        reply = self.node.seal(
            self.registry.get(envelope.sender), json.dumps(result).encode("utf-8")
        )
        self.router.route(reply)


# --------------------------------------------------------------------------
# Chat side: staged submission pipeline
# --------------------------------------------------------------------------


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class SubmissionState:
    """Folded view of a submission journal."""

    submission_id: str
    session_id: str = ""
    assignment_id: str = ""
    subject: str = ""
    status: SubmissionStatus = SubmissionStatus.RECEIVED
    raw_blob: str = ""
    clean_blob: str = ""
    word_count: int = 0
    graph_blob: str = ""
    report_blob: str = ""
    document_id: str = ""
    document_blob: str = ""
    reason: str = ""
    reason_code: str = ""


class FeedbackPipeline:
    """Runs submissions through clean -> graph -> relay -> document."""

    def __init__(
        self,
        node: Node,
        registry: Registry,
        router: Router,
        blobs,
        submission_journals,
        assignments: AssignmentStore,
        document_store,
        analysis_node_id: str = "analysis",
        notify=None,
    ):
        self.node = node
        self.registry = registry
        self.router = router
        self.blobs = blobs
        self.journals = submission_journals
        self.assignments = assignments
        self.documents = document_store
        self.analysis_node_id = analysis_node_id
        self.notify = notify or (lambda session_id, event, submission_id="": None)
        self.stage_hook = None  # called as stage_hook(submission_id, status)
        self._locks = {}
        self._locks_guard = threading.Lock()

    def _lock(self, submission_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(submission_id, threading.Lock())

    # --- journal helpers ---------------------------------------------------

    def _append(self, state: SubmissionState, status: SubmissionStatus, **detail):
        record = {"event": "status", "status": status.value, "at": _now(), **detail}
        self.journals.append(state.submission_id, record)
        state.status = status
        for key, value in detail.items():
            if hasattr(state, key):
                setattr(state, key, value)
        if self.stage_hook is not None:
            self.stage_hook(state.submission_id, status)

    def load(self, submission_id: str) -> SubmissionState:
        records = self.journals.read(submission_id)
        if not records:
            raise KeyError(submission_id)
        state = SubmissionState(submission_id=submission_id)
        for record in records:
            if record.get("event") == "created":
                state.session_id = record["session_id"]
                state.assignment_id = record["assignment_id"]
                state.subject = record["subject"]
                state.raw_blob = record["raw_blob"]
            elif record.get("event") == "status":
                state.status = SubmissionStatus(record["status"])
                for key in (
                    "clean_blob", "word_count", "graph_blob", "report_blob",
                    "document_id", "document_blob", "reason", "reason_code",
                ):
                    if key in record:
                        setattr(state, key, record[key])
        return state

    def pending(self) -> list:
        """Submission ids whose journals are not in a terminal status."""
        out = []
        for name in self.journals.names():
            try:
                state = self.load(name)
            except (KeyError, ValueError):
                continue
            if state.status not in TERMINAL_STATUSES:
                out.append(name)
        return out

    # --- intake -------------------------------------------------------------

    def create_submission(
        self, session_id: str, assignment_id: str, subject: str, raw_bytes: bytes
    ) -> str:
        """Journal a new submission with its raw text encrypted at rest."""
        submission_id = uuid.uuid4().hex
        sealed = self.node.seal(self.node.identity, raw_bytes)
        raw_blob = self.blobs.put(sealed.to_wire())
        self.journals.append(
            submission_id,
            {
                "event": "created",
                "submission_id": submission_id,
                "session_id": session_id,
                "assignment_id": assignment_id,
                "subject": subject,
                "received_at": _now(),
                "raw_blob": raw_blob,
            },
        )
        self.journals.append(
            submission_id,
            {"event": "status", "status": SubmissionStatus.RECEIVED.value, "at": _now()},
        )
        if self.stage_hook is not None:
            self.stage_hook(submission_id, SubmissionStatus.RECEIVED)
        return submission_id

    def _read_sealed_blob(self, digest: str) -> bytes:
        envelope = Envelope.from_wire(self.blobs.get(digest))
        return self.node.open(envelope, self.node.identity)

    # --- stages --------------------------------------------------------------

    def advance(self, submission_id: str):
        """Run all stages that can run now; stops after sending the job."""
        with self._lock(submission_id):
            state = self.load(submission_id)
            assignment = self.assignments.get(state.assignment_id)
            try:
                while state.status not in TERMINAL_STATUSES:
                    if state.status is SubmissionStatus.RECEIVED:
                        self._stage_clean(state, assignment)
                    elif state.status is SubmissionStatus.CLEANED:
                        self._stage_build(state, assignment)
                    elif state.status is SubmissionStatus.GRAPH_BUILT:
                        self._stage_send(state, assignment)
                        return  # reply arrives asynchronously
                    elif state.status is SubmissionStatus.COMPARED:
                        self._stage_finalize(state)
                    else:
                        return
            except TextMentorError as exc:
                self._fail(state, exc)

    def _stage_clean(self, state: SubmissionState, assignment: Assignment):
        raw_bytes = self._read_sealed_blob(state.raw_blob)
        raw = RawSubmissionText.from_bytes(
            raw_bytes, assignment.language, source_id=state.submission_id
        )
        clean = clean_text(raw, min_words=assignment.min_words)
        sealed = self.node.seal(self.node.identity, clean.text.encode("utf-8"))
        clean_blob = self.blobs.put(sealed.to_wire())
        self._append(
            state,
            SubmissionStatus.CLEANED,
            clean_blob=clean_blob,
            word_count=clean.word_count,
        )

    def _stage_build(self, state: SubmissionState, assignment: Assignment):
        text = self._read_sealed_blob(state.clean_blob).decode("utf-8")
        clean = CleanText(
            text=text,
            language=Language(assignment.language),
            word_count=len(text.split()),
        )
        graph = graph_from_clean_text(
            clean,
            source_id=state.submission_id,
            max_concepts=assignment.max_concepts,
            max_edges=assignment.max_edges,
        )
        graph_blob = self.blobs.put(graph.to_canonical_json().encode("utf-8"))
        self._append(state, SubmissionStatus.GRAPH_BUILT, graph_blob=graph_blob)

    def _stage_send(self, state: SubmissionState, assignment: Assignment):
        graph = ConceptGraph.from_json(self.blobs.get(state.graph_blob).decode("utf-8"))
        job = {
            "kind": JOB_KIND,
            "job_id": state.submission_id,
            "student_graph": graph.to_dict(),
            "reference_graph": assignment.reference_graph.to_dict(),
            "mode": FeedbackMode(assignment.mode).value,
            "template_id": assignment.template_id,
            "language": assignment.language,
        }
        envelope = self.node.seal(
            self.registry.get(self.analysis_node_id),
            json.dumps(job).encode("utf-8"),
        )
        try:
            self.router.route(envelope)
        except Unreachable:
            raise Unreachable("feedback service unavailable") from None

    def handle_result(self, result: dict):
        """Process a feedback_result payload from the analysis node."""
        submission_id = result.get("job_id", "")
        try:
            state = self.load(submission_id)
        except KeyError:
            return  # unknown or foreign job id
        with self._lock(submission_id):
            state = self.load(submission_id)
            if state.status in TERMINAL_STATUSES or state.status is SubmissionStatus.COMPARED:
                return  # duplicate delivery
            if not result.get("ok"):
                self._fail_message(
                    state,
                    result.get("error_code", "analysis_failed"),
                    result.get("error_message", "analysis failed"),
                )
                return
            try:
                report = ComparisonReport.from_dict(result["report"])
                html = base64.b64decode(result["document_html"])
                document_id = result["document_id"]
            except (KeyError, ValueError, GraphFormatError) as exc:
                self._fail_message(state, "bad_result", f"malformed analysis result: {exc}")
                return
            report_blob = self.blobs.put(report.to_canonical_json().encode("utf-8"))
            document_blob = self.blobs.put(html)
            self.documents.put(
                document_id,
                {
                    "document_id": document_id,
                    "blob": document_blob,
                    "session_id": state.session_id,
                    "submission_id": state.submission_id,
                    "subject": state.subject,
                    "created_at": _now(),
                },
            )
            self._append(
                state,
                SubmissionStatus.COMPARED,
                report_blob=report_blob,
                document_id=document_id,
                document_blob=document_blob,
            )
            self._stage_finalize(state)

    def _stage_finalize(self, state: SubmissionState):
        if not self.documents.exists(state.document_id):
            # crash happened after Compared was journaled but before the
            # document index write became visible; re-create it
            self.documents.put(
                state.document_id,
                {
                    "document_id": state.document_id,
                    "blob": state.document_blob,
                    "session_id": state.session_id,
                    "submission_id": state.submission_id,
                    "subject": state.subject,
                    "created_at": _now(),
                },
            )
        self._append(state, SubmissionStatus.FEEDBACK_READY, document_id=state.document_id)
        self.notify(
            state.session_id,
            PipelineDone(document_id=state.document_id),
            state.submission_id,
        )

    def _fail(self, state: SubmissionState, exc: TextMentorError):
        self._fail_message(state, exc.code, exc.message)

    def _fail_message(self, state: SubmissionState, code: str, message: str):
        if state.status in TERMINAL_STATUSES:
            return
        self._append(state, SubmissionStatus.FAILED, reason=message, reason_code=code)
        self.notify(state.session_id, PipelineFailed(reason=message), state.submission_id)


class DocumentStore:
    """Document index files next to the blob store."""

    def __init__(self, root):
        from pathlib import Path

        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, document_id: str):
        if not document_id.isalnum():
            raise KeyError(document_id)
        return self.root / f"{document_id}.json"

    def put(self, document_id: str, record: dict):
        self._path(document_id).write_text(
            json.dumps(record, sort_keys=True) + "\n", encoding="utf-8"
        )

    def get(self, document_id: str) -> dict:
        path = self._path(document_id)
        if not path.exists():
            raise KeyError(document_id)
        return json.loads(path.read_text(encoding="utf-8"))

    def exists(self, document_id: str) -> bool:
        try:
            return self._path(document_id).exists()
        except KeyError:
            return False

    def delete(self, document_id: str):
        path = self._path(document_id)
        if path.exists():
            path.unlink()

    def for_session(self, session_id: str) -> list:
        out = []
        for path in self.root.glob("*.json"):
            record = json.loads(path.read_text(encoding="utf-8"))
            if record.get("session_id") == session_id:
                out.append(record)
        return out


class ReplyConsumer:
    """Drains the chat node's inbox and feeds results to the pipeline."""

    def __init__(self, node: Node, registry: Registry, pipeline: FeedbackPipeline, inbox):
        self.node = node
        self.registry = registry
        self.pipeline = pipeline
        self.inbox = inbox
        self._seen = set()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="reply-consumer", daemon=True)

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        self._thread.join(timeout=5)

    def _run(self):
        while not self._stop.is_set():
            try:
                envelope = self.inbox.get(timeout=0.1)
            except queue.Empty:
                continue
            if envelope.envelope_id in self._seen:
                continue
            self._seen.add(envelope.envelope_id)
            try:
                payload = open_envelope(self.node, envelope, self.registry)
                result = json.loads(payload.decode("utf-8"))
                if result.get("kind") == RESULT_KIND:
                    self.pipeline.handle_result(result)
            except (TextMentorError, ValueError):
                continue


class PipelineExecutor:
    """Bounded work queue with a fixed worker pool."""

    def __init__(self, pipeline: FeedbackPipeline, depth: int = 16, workers: int = 2):
        self.pipeline = pipeline
        self.queue = queue.Queue(maxsize=depth)
        self._stop = threading.Event()
        self._threads = [
            threading.Thread(target=self._run, name=f"pipeline-worker-{i}", daemon=True)
            for i in range(workers)
        ]

    def start(self):
        for thread in self._threads:
            thread.start()
        return self

    def stop(self):
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout=5)

    def submit(self, submission_id: str) -> bool:
        """False when the queue is full (caller answers with a busy reply)."""
        try:
            self.queue.put_nowait(submission_id)
            return True
        except queue.Full:
            return False

    def _run(self):
        while not self._stop.is_set():
            try:
                submission_id = self.queue.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                self.pipeline.advance(submission_id)
            except Exception:  # unexpected bug: fail the submission, keep the worker
                try:
                    state = self.pipeline.load(submission_id)
                    self.pipeline._fail_message(
                        state, "internal_error", "internal processing error"
                    )
                except Exception:
                    pass
