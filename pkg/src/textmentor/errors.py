"""Exception types shared across the package.

Every error carries a stable machine ``code`` (used in API bodies and
pipeline failure records) next to the human-readable message.
"""


class TextMentorError(Exception):
    """Base class; ``code`` is a stable machine-readable identifier."""

    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


# --- text pipeline ---------------------------------------------------------

class TooShort(TextMentorError):
    code = "too_short"


class InvalidEncoding(TextMentorError):
    code = "invalid_encoding"


class UnsupportedLanguage(TextMentorError):
    code = "unsupported_language"


# --- graph construction ----------------------------------------------------

class EmptyInput(TextMentorError):
    code = "empty_input"


class EmptyConcepts(TextMentorError):
    code = "empty_concepts"


class GraphFormatError(TextMentorError):
    code = "graph_format"


# --- feedback rendering ----------------------------------------------------

class UnresolvedPlaceholder(TextMentorError):
    code = "unresolved_placeholder"


class ModeMismatch(TextMentorError):
    code = "mode_mismatch"


class UnknownTemplate(TextMentorError):
    code = "unknown_template"


# --- relay -----------------------------------------------------------------

class DuplicateNodeId(TextMentorError):
    code = "duplicate_node_id"


class UnknownRecipient(TextMentorError):
    code = "unknown_recipient"


class NotRecipient(TextMentorError):
    code = "not_recipient"


class SignatureInvalid(TextMentorError):
    code = "signature_invalid"


class DecryptionFailure(TextMentorError):
    code = "decryption_failure"


class Unreachable(TextMentorError):
    code = "unreachable"


# --- service ---------------------------------------------------------------

class SessionClosed(TextMentorError):
    code = "session_closed"


class TokenInvalid(TextMentorError):
    code = "token_invalid"


class TokenExpired(TextMentorError):
    code = "token_expired"


class ConfigError(TextMentorError):
    code = "config_error"


class QueueBusy(TextMentorError):
    code = "busy"
