"""Per-student conversation state machine.

Six states, a fixed transition table, and deterministic keyword
matching (exact match against a per-language list after lowercasing).
Anything not in the table leaves the state unchanged and produces the
state's help reply. All replies come from the language's message
catalog; the machine itself contains no wording.
"""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from . import resources
from .errors import SessionClosed


class DialogState(str, Enum):
    GREETING = "Greeting"
    TASK_OFFERED = "TaskOffered"
    AWAITING_SUBMISSION = "AwaitingSubmission"
    PROCESSING = "Processing"
    FEEDBACK_DELIVERED = "FeedbackDelivered"
    CLOSED = "Closed"


@dataclass(frozen=True)
class UserMessage:
    text: str


@dataclass(frozen=True)
class UserUpload:
    data: bytes
    name: str


@dataclass(frozen=True)
class PipelineDone:
    document_id: str


@dataclass(frozen=True)
class PipelineFailed:
    reason: str


@dataclass(frozen=True)
class BotReply:
    text: str
    kind: str = "text"  # "text" or "feedback-link"
    document_id: str = ""


@dataclass(frozen=True)
class HistoryEntry:
    speaker: str  # "student", "bot", "system"
    kind: str  # "text", "upload", "feedback-link", "event"
    content: str
    at: str
    document_id: str = ""

    def to_dict(self) -> dict:
        data = {
            "speaker": self.speaker,
            "kind": self.kind,
            "content": self.content,
            "at": self.at,
        }
        if self.document_id:
            data["document_id"] = self.document_id
        return data

    @classmethod
    def from_dict(cls, data: dict):
        return cls(
            speaker=data["speaker"],
            kind=data["kind"],
            content=data["content"],
            at=data["at"],
            document_id=data.get("document_id", ""),
        )


@dataclass
class DialogSession:
    session_id: str
    student_id: str
    assignment_id: str = ""
    state: DialogState = DialogState.GREETING
    history: list = field(default_factory=list)
    language: str = "en"
    current_submission_id: str = ""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _record(session: DialogSession, speaker, kind, content, document_id=""):
    entry = HistoryEntry(
        speaker=speaker, kind=kind, content=content, at=_now(), document_id=document_id
    )
    session.history.append(entry)
    return entry


def _matches(text: str, keywords) -> bool:
    return text.strip().lower() in {k.lower() for k in keywords}


def handle_event(session: DialogSession, event, prompt_text: str = "",
                 min_words: int = 300, messages: dict = None):
    """Apply one event; returns the replies and mutates the session.

    The caller provides the assignment's prompt/min_words and may
    inject a message catalog (defaults to the session language's
    bundled one). Raises SessionClosed for any event after Closed.
    """
    if session.state is DialogState.CLOSED:
        raise SessionClosed(f"session {session.session_id} is closed")
    messages = messages or resources.dialog_messages(session.language)

    if isinstance(event, UserMessage):
        _record(session, "student", "text", event.text)
    elif isinstance(event, UserUpload):
        _record(session, "student", "upload", event.name)
    elif isinstance(event, PipelineDone):
        _record(session, "system", "event", "pipeline done", document_id=event.document_id)
    elif isinstance(event, PipelineFailed):
        _record(session, "system", "event", f"pipeline failed: {event.reason}")
    else:
        raise TypeError(f"unknown event type {type(event).__name__}")

    state = session.state
    replies = None

    if state is DialogState.GREETING and isinstance(event, UserMessage):
        session.state = DialogState.TASK_OFFERED
        replies = [BotReply(messages["task_offer"].format(prompt=prompt_text))]
    elif state is DialogState.TASK_OFFERED and isinstance(event, UserMessage):
        if _matches(event.text, messages["affirmative"]):
            session.state = DialogState.AWAITING_SUBMISSION
            replies = [BotReply(messages["upload_instructions"].format(min_words=min_words))]
    elif state is DialogState.AWAITING_SUBMISSION and isinstance(event, UserUpload):
        session.state = DialogState.PROCESSING
        replies = [BotReply(messages["upload_ack"])]
    elif state is DialogState.PROCESSING and isinstance(event, PipelineDone):
        session.state = DialogState.FEEDBACK_DELIVERED
        replies = [
            BotReply(
                messages["feedback_ready"],
                kind="feedback-link",
                document_id=event.document_id,
            )
        ]
    elif state is DialogState.PROCESSING and isinstance(event, PipelineFailed):
        session.state = DialogState.AWAITING_SUBMISSION
        replies = [BotReply(messages["pipeline_failed"].format(reason=event.reason))]
    elif state is DialogState.FEEDBACK_DELIVERED and isinstance(event, UserUpload):
        session.state = DialogState.PROCESSING
        replies = [BotReply(messages["upload_ack"])]
    elif state is DialogState.FEEDBACK_DELIVERED and isinstance(event, UserMessage):
        if _matches(event.text, messages["done"]):
            session.state = DialogState.CLOSED
            replies = [BotReply(messages["closed"])]

    if replies is None:
        replies = [BotReply(messages["help"][state.value])]

    for reply in replies:
        _record(session, "bot", reply.kind, reply.text, document_id=reply.document_id)
    return replies


def greeting_reply(session: DialogSession, messages: dict = None):
    """The opening bot message recorded when a session is created."""
    messages = messages or resources.dialog_messages(session.language)
    reply = BotReply(messages["greeting"])
    _record(session, "bot", reply.kind, reply.text)
    return reply


def record_system_reply(session: DialogSession, text: str):
    """A bot reply outside the transition table (e.g. backpressure)."""
    reply = BotReply(text)
    _record(session, "bot", reply.kind, reply.text)
    return reply
