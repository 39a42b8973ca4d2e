"""The conversational mentoring service.

ServiceRuntime wires the two relay nodes (chat and analysis), the
staged submission pipeline, session persistence, and the work queue;
create_app builds the HTTP API on top. Event handling is serialized
per session (re-entrant lock), so pipeline notifications and user
requests never interleave on one session.
"""

import email
import json
import queue
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from . import auth as auth_tokens
from . import resources
from .config import ServiceConfig
from .dialog import (
    DialogSession,
    DialogState,
    UserMessage,
    UserUpload,
    greeting_reply,
    handle_event,
    HistoryEntry,
    record_system_reply,
)
from .errors import SessionClosed, TokenExpired, TokenInvalid
from .pipeline import (
    AnalysisWorker,
    AssignmentStore,
    DocumentStore,
    FeedbackPipeline,
    PipelineExecutor,
    ReplyConsumer,
)
from .relay import InProcessTransport, Node, Registry, Router
from .storage import BlobStore, JournalStore
from .transport import NodeListener, RelayServer, TcpTransport

BOT_NODE_ID = "bot"
ANALYSIS_NODE_ID = "analysis"

ALLOWED_UPLOAD_TYPES = ("text/plain", "text/markdown", "application/octet-stream")


class SessionManager:
    """Journal-backed dialog sessions with per-session re-entrant locks."""

    def __init__(self, journals: JournalStore):
        self.journals = journals
        self._cache = {}
        self._locks = {}
        self._guard = threading.Lock()

    def lock(self, session_id: str) -> threading.RLock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.RLock())

    def create(self, subject: str, assignment_id: str, language: str) -> DialogSession:
        session = DialogSession(
            session_id=uuid.uuid4().hex,
            student_id=subject,
            assignment_id=assignment_id,
            language=language,
        )
        self.journals.append(
            session.session_id,
            {
                "event": "created",
                "session_id": session.session_id,
                "student_id": subject,
                "assignment_id": assignment_id,
                "language": language,
            },
        )
        with self._guard:
            self._cache[session.session_id] = session
        return session

    def get(self, session_id: str) -> DialogSession:
        with self._guard:
            if session_id in self._cache:
                return self._cache[session_id]
        session = self._load(session_id)
        with self._guard:
            return self._cache.setdefault(session_id, session)

    def _load(self, session_id: str) -> DialogSession:
        records = self.journals.read(session_id)
        if not records:
            raise KeyError(session_id)
        session = None
        for record in records:
            if record.get("event") == "created":
                session = DialogSession(
                    session_id=record["session_id"],
                    student_id=record["student_id"],
                    assignment_id=record["assignment_id"],
                    language=record.get("language", "en"),
                )
            elif record.get("event") == "entry" and session is not None:
                session.history.append(HistoryEntry.from_dict(record["entry"]))
                session.state = DialogState(record["state"])
                session.current_submission_id = record.get("submission", "")
        if session is None:
            raise KeyError(session_id)
        return session

    def persist_from(self, session: DialogSession, start_index: int):
        for entry in session.history[start_index:]:
            self.journals.append(
                session.session_id,
                {
                    "event": "entry",
                    "entry": entry.to_dict(),
                    "state": session.state.value,
                    "submission": session.current_submission_id,
                },
            )

    def delete(self, session_id: str):
        with self._guard:
            self._cache.pop(session_id, None)
        self.journals.delete(session_id)


class ServiceRuntime:
    """Everything behind the HTTP API; start() brings up the relay hop."""

    def __init__(self, config: ServiceConfig, capture_relay: bool = False):
        self.config = config
        data = Path(config.data_dir)
        data.mkdir(parents=True, exist_ok=True)
        (data / "keys").mkdir(exist_ok=True)

        self.bot_node = self._load_or_create_node(data / "keys" / "bot.json", BOT_NODE_ID)
        self.analysis_node = self._load_or_create_node(
            data / "keys" / "analysis.json", ANALYSIS_NODE_ID
        )
        self.registry = Registry()
        self.registry.register(self.bot_node.identity)
        self.registry.register(self.analysis_node.identity)
        self.registry.save(data / "registry.txt")

        self.blobs = BlobStore(data / "blobs")
        self.session_journals = JournalStore(data / "sessions")
        self.submission_journals = JournalStore(data / "submissions")
        self.assignments = AssignmentStore(data / "assignments")
        self.documents = DocumentStore(data / "documents")
        self.sessions = SessionManager(self.session_journals)

        self.bot_inbox = queue.Queue()
        self.analysis_inbox = queue.Queue()
        self._relay_server = None
        self._listeners = []
        if config.transport == "tcp":
            bot_listener = NodeListener(
                self.bot_inbox, config.relay_host, config.bot_listener_port
            )
            analysis_listener = NodeListener(
                self.analysis_inbox, config.relay_host, config.analysis_listener_port
            )
            self._listeners = [bot_listener, analysis_listener]
            self._relay_server = RelayServer(
                config.relay_host, config.relay_port, capture=capture_relay
            )
            self._relay_server.add_route(BOT_NODE_ID, bot_listener.address)
            self._relay_server.add_route(ANALYSIS_NODE_ID, analysis_listener.address)
            transport = TcpTransport(self._relay_server.address)
        else:
            transport = InProcessTransport(capture=capture_relay)
            transport.attach(BOT_NODE_ID, self.bot_inbox)
            transport.attach(ANALYSIS_NODE_ID, self.analysis_inbox)
        self.transport = transport
        self.router = Router(
            self.registry,
            transport,
            retries=config.route_retries,
            backoff=config.route_backoff_seconds,
        )

        self.pipeline = FeedbackPipeline(
            node=self.bot_node,
            registry=self.registry,
            router=self.router,
            blobs=self.blobs,
            submission_journals=self.submission_journals,
            assignments=self.assignments,
            document_store=self.documents,
            analysis_node_id=ANALYSIS_NODE_ID,
            notify=self.dispatch_session_event,
        )
        self.executor = PipelineExecutor(
            self.pipeline, depth=config.queue_depth, workers=config.pipeline_workers
        )
        self.analysis_worker = AnalysisWorker(
            self.analysis_node, self.registry, self.router, self.analysis_inbox
        )
        self.reply_consumer = ReplyConsumer(
            self.bot_node, self.registry, self.pipeline, self.bot_inbox
        )

        self.issuer_public_key = auth_tokens.load_issuer_public_key(
            Path(config.issuer_public_key_file).read_bytes()
        )
        self._started = False

    @staticmethod
    def _load_or_create_node(path: Path, node_id: str) -> Node:
        if path.exists():
            return Node.from_private_material(json.loads(path.read_text(encoding="utf-8")))
        node = Node(node_id)
        path.write_text(json.dumps(node.private_material(), indent=2) + "\n", encoding="utf-8")
        path.chmod(0o600)
        return node

    # --- lifecycle -----------------------------------------------------------

    def start(self):
        if self._started:
            return self
        for listener in self._listeners:
            listener.start()
        if self._relay_server is not None:
            self._relay_server.start()
        self.analysis_worker.start()
        self.reply_consumer.start()
        self.executor.start()
        self._started = True
        return self

    def stop(self):
        if not self._started:
            return
        self.executor.stop()
        self.reply_consumer.stop()
        self.analysis_worker.stop()
        if self._relay_server is not None:
            self._relay_server.close()
        for listener in self._listeners:
            listener.close()
        self._started = False

    def recover(self):
        """Re-enqueue submissions whose journals are not terminal."""
        pending = self.pipeline.pending()
        for submission_id in pending:
            self.executor.submit(submission_id)
        return pending

    # --- session event plumbing ------------------------------------------------

    def dispatch_session_event(self, session_id: str, event, submission_id: str = ""):
        try:
            with self.sessions.lock(session_id):
                session = self.sessions.get(session_id)
                if submission_id and session.current_submission_id != submission_id:
                    return  # stale event from a superseded submission
                assignment = self.assignments.get(session.assignment_id)
                before = len(session.history)
                handle_event(
                    session,
                    event,
                    prompt_text=assignment.prompt_text,
                    min_words=assignment.min_words,
                )
                self.sessions.persist_from(session, before)
        except (KeyError, SessionClosed):
            pass  # session deleted or closed; nothing to deliver to

    def default_assignment_id(self) -> str:
        if self.config.default_assignment_id:
            return self.config.default_assignment_id
        listed = self.assignments.list()
        return listed[0].assignment_id if listed else ""


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class CreateSessionBody(BaseModel):
    assignment_id: str | None = None


class MessageBody(BaseModel):
    text: str


def _reply_dict(entry: HistoryEntry) -> dict:
    return entry.to_dict()


def parse_multipart(content_type: str, body: bytes):
    """First file part of a multipart/form-data body via the email parser."""
    header = f"Content-Type: {content_type}\r\nMIME-Version: 1.0\r\n\r\n".encode("ascii")
    message = email.message_from_bytes(header + body)
    if not message.is_multipart():
        raise ValueError("body is not multipart/form-data")
    for part in message.get_payload():
        filename = part.get_filename()
        name = part.get_param("name", header="content-disposition")
        if filename or name == "file":
            data = part.get_payload(decode=True)
            if data is None:
                data = part.get_payload().encode("utf-8")
            return filename or "upload.txt", part.get_content_type(), data
    raise ValueError("multipart body contains no file part")


def create_app(runtime: ServiceRuntime) -> FastAPI:
    app = FastAPI(title="textmentor bot service", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"code": "invalid_body", "message": str(exc.errors()[:1])},
        )

    def authenticate(authorization) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise ApiError(401, "missing_token", "a bearer token is required")
        token = authorization[len("Bearer "):]
        try:
            access = auth_tokens.verify_token(token, runtime.issuer_public_key)
        except TokenExpired as exc:
            raise ApiError(401, exc.code, exc.message) from None
        except TokenInvalid as exc:
            raise ApiError(401, exc.code, exc.message) from None
        return access.subject

    def owned_session(session_id: str, subject: str) -> DialogSession:
        try:
            session = runtime.sessions.get(session_id)
        except KeyError:
            raise ApiError(404, "unknown_session", f"no session {session_id}") from None
        if session.student_id != subject:
            raise ApiError(403, "foreign_session", "session belongs to another student")
        return session

    def session_payload(session: DialogSession, replies=None) -> dict:
        payload = {
            "session_id": session.session_id,
            "state": session.state.value,
            "assignment_id": session.assignment_id,
            "history": [_reply_dict(e) for e in session.history],
        }
        if session.current_submission_id:
            try:
                sub = runtime.pipeline.load(session.current_submission_id)
                payload["submission"] = {
                    "submission_id": sub.submission_id,
                    "status": sub.status.value,
                }
            except KeyError:
                pass
        if replies is not None:
            payload["replies"] = [r.__dict__ if hasattr(r, "__dict__") else r for r in replies]
        return payload

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/assignments")
    def list_assignments(authorization: str = Header(default=None)):
        authenticate(authorization)
        return [
            {
                "assignment_id": a.assignment_id,
                "title": a.title,
                "language": a.language,
                "mode": a.mode.value,
                "min_words": a.min_words,
            }
            for a in runtime.assignments.list()
        ]

    @app.post("/sessions")
    def create_session(
        body: CreateSessionBody = None, authorization: str = Header(default=None)
    ):
        subject = authenticate(authorization)
        assignment_id = (body.assignment_id if body else None) or runtime.default_assignment_id()
        try:
            assignment = runtime.assignments.get(assignment_id)
        except KeyError:
            raise ApiError(404, "unknown_assignment", f"no assignment {assignment_id!r}") from None
        session = runtime.sessions.create(subject, assignment.assignment_id, assignment.language)
        with runtime.sessions.lock(session.session_id):
            reply = greeting_reply(session)
            runtime.sessions.persist_from(session, 0)
        payload = session_payload(session)
        payload["replies"] = [reply.__dict__]
        return payload

    @app.post("/sessions/{session_id}/messages")
    def post_message(
        session_id: str, body: MessageBody, authorization: str = Header(default=None)
    ):
        subject = authenticate(authorization)
        session = owned_session(session_id, subject)
        with runtime.sessions.lock(session_id):
            assignment = runtime.assignments.get(session.assignment_id)
            before = len(session.history)
            try:
                replies = handle_event(
                    session,
                    UserMessage(text=body.text),
                    prompt_text=assignment.prompt_text,
                    min_words=assignment.min_words,
                )
            except SessionClosed as exc:
                raise ApiError(409, exc.code, exc.message) from None
            runtime.sessions.persist_from(session, before)
        return {
            "state": session.state.value,
            "replies": [r.__dict__ for r in replies],
        }

    @app.post("/sessions/{session_id}/upload")
    async def upload(session_id: str, request: Request,
                     authorization: str = Header(default=None)):
        subject = authenticate(authorization)
        session = owned_session(session_id, subject)
        content_type = request.headers.get("content-type", "")
        if "multipart/form-data" not in content_type:
            raise ApiError(422, "invalid_body", "expected a multipart/form-data upload")
        body = await request.body()
        if len(body) > runtime.config.max_upload_bytes + 4096:
            raise ApiError(422, "upload_too_large", "uploaded file exceeds the size limit")
        try:
            filename, media_type, data = parse_multipart(content_type, body)
        except ValueError as exc:
            raise ApiError(422, "invalid_body", str(exc)) from None
        if media_type not in ALLOWED_UPLOAD_TYPES and not media_type.startswith("text/"):
            raise ApiError(
                422, "unsupported_media_type", f"uploads must be text, not {media_type}"
            )
        if len(data) > runtime.config.max_upload_bytes:
            raise ApiError(422, "upload_too_large", "uploaded file exceeds the size limit")

        with runtime.sessions.lock(session_id):
            assignment = runtime.assignments.get(session.assignment_id)
            accepts = session.state in (
                DialogState.AWAITING_SUBMISSION,
                DialogState.FEEDBACK_DELIVERED,
            )
            before = len(session.history)
            if accepts and runtime.executor.queue.full():
                messages = resources.dialog_messages(session.language)
                record_system_reply(session, messages["busy"])
                runtime.sessions.persist_from(session, before)
                entry = session.history[-1]
                return {
                    "state": session.state.value,
                    "replies": [
                        {"text": entry.content, "kind": "text", "document_id": ""}
                    ],
                    "busy": True,
                }
            submission_id = ""
            if accepts:
                submission_id = runtime.pipeline.create_submission(
                    session_id, session.assignment_id, subject, data
                )
                session.current_submission_id = submission_id
            try:
                replies = handle_event(
                    session,
                    UserUpload(data=b"", name=filename),
                    prompt_text=assignment.prompt_text,
                    min_words=assignment.min_words,
                )
            except SessionClosed as exc:
                raise ApiError(409, exc.code, exc.message) from None
            runtime.sessions.persist_from(session, before)
            if accepts and not runtime.executor.submit(submission_id):
                # lost the race for the last queue slot: fail through the table
                state = runtime.pipeline.load(submission_id)
                runtime.pipeline._fail_message(
                    state, "busy", "the service is busy, please try again"
                )
        return {
            "state": session.state.value,
            "replies": [r.__dict__ for r in replies],
            "submission_id": submission_id,
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str, authorization: str = Header(default=None)):
        subject = authenticate(authorization)
        session = owned_session(session_id, subject)
        with runtime.sessions.lock(session_id):
            return session_payload(session)

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str, authorization: str = Header(default=None)):
        subject = authenticate(authorization)
        session = owned_session(session_id, subject)
        with runtime.sessions.lock(session_id):
            removed_documents = 0
            for record in runtime.documents.for_session(session_id):
                runtime.blobs.delete(record.get("blob", ""))
                runtime.documents.delete(record["document_id"])
                removed_documents += 1
            for name in runtime.pipeline.journals.names():
                try:
                    state = runtime.pipeline.load(name)
                except (KeyError, ValueError):
                    continue
                if state.session_id == session_id:
                    for digest in (state.raw_blob, state.clean_blob):
                        if digest:
                            runtime.blobs.delete(digest)
            runtime.sessions.delete(session_id)
        return {"deleted": True, "documents_removed": removed_documents}

    @app.get("/documents/{document_id}")
    def get_document(document_id: str, authorization: str = Header(default=None)):
        subject = authenticate(authorization)
        try:
            record = runtime.documents.get(document_id)
        except KeyError:
            raise ApiError(404, "unknown_document", f"no document {document_id}") from None
        if record.get("subject") != subject:
            raise ApiError(403, "foreign_document", "document belongs to another student")
        blob = runtime.blobs.get(record["blob"])
        return Response(content=blob, media_type="text/html; charset=utf-8")

    return app
