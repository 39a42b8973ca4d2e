"""textmentor: concept-graph feedback on writing tasks.

The package builds concept graphs from prose, compares a student's
graph with a reference graph, renders templated feedback documents,
and delivers them through a chat service over an encrypted relay hop.
"""

from .builder import (
    AssociationMatrix,
    build_association_matrix,
    build_graph,
    graph_from_raw_text,
    select_concepts,
)
from .compare import ComparisonReport, compare
from .errors import TextMentorError
from .feedback import (
    FeedbackDocument,
    FeedbackMode,
    FeedbackTemplate,
    export_document,
    fill_template,
)
from .graphs import ConceptGraph, graph_fingerprint
from .textprep import (
    CleanText,
    Language,
    RawSubmissionText,
    TokenizedSentence,
    clean_text,
    segment_sentences,
    tokenize_normalize,
)

__version__ = "0.1.0"

__all__ = [
    "AssociationMatrix",
    "CleanText",
    "ComparisonReport",
    "ConceptGraph",
    "FeedbackDocument",
    "FeedbackMode",
    "FeedbackTemplate",
    "Language",
    "RawSubmissionText",
    "TextMentorError",
    "TokenizedSentence",
    "build_association_matrix",
    "build_graph",
    "clean_text",
    "compare",
    "export_document",
    "fill_template",
    "graph_fingerprint",
    "graph_from_raw_text",
    "segment_sentences",
    "select_concepts",
    "tokenize_normalize",
    "__version__",
]
