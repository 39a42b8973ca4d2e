"""Feedback document assembly.

A template body is plain text with blank-line paragraphs and a fixed
placeholder vocabulary: {{shared_concepts}}, {{only_student}},
{{only_reference}}, {{measure:NAME}}, {{linkage:CONCEPT}},
{{graph:student}}, {{graph:reference}}. Filling substitutes report
values (lists joined with ", ", measures to two decimals), renders the
graphs per feedback mode, and yields a self-contained HTML document
with the graph drawings attached in DOT and SVG form.

Mode gating: a placeholder naming content of a graph the mode excludes
raises ModeMismatch, so a student-graph document can never leak
reference-only concepts (and vice versa).
"""

import hashlib
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from html import escape

from . import resources
from .compare import ComparisonReport
from .errors import ModeMismatch, UnresolvedPlaceholder
from .graphs import ConceptGraph
from .render import render_graph_dot, render_graph_svg
from .textprep import Language, as_language


class FeedbackMode(str, Enum):
    STUDENT_GRAPH = "student_graph"
    REFERENCE_GRAPH = "reference_graph"
    COMPARISON = "comparison"


@dataclass(frozen=True)
class FeedbackTemplate:
    template_id: str
    language: Language
    body: str

    @classmethod
    def load(cls, template_id: str, language):
        language = as_language(language)
        return cls(
            template_id=template_id,
            language=language,
            body=resources.template_body(template_id, language),
        )


@dataclass(frozen=True)
class Attachment:
    name: str
    media_type: str
    data: bytes


@dataclass
class FeedbackDocument:
    document_id: str
    mode: FeedbackMode
    rendered_body: str
    attachments: list = field(default_factory=list)
    created_at: str = ""
    report_ref: tuple = ("", "")
    language: str = "en"


_PLACEHOLDER_RE = re.compile(r"\{\{([a-z_]+)(?::([^{}]+))?\}\}")

_GRAPH_ROLES = {"student", "reference"}

# placeholders that reveal content of a graph the mode excludes
_FORBIDDEN = {
    FeedbackMode.STUDENT_GRAPH: {("graph", "reference"), ("only_reference", None)},
    FeedbackMode.REFERENCE_GRAPH: {
        ("graph", "student"),
        ("only_student", None),
        ("linkage", "*"),
    },
    FeedbackMode.COMPARISON: set(),
}

_CAPTIONS = {
    "en": {"student": "The concept map of your text", "reference": "The concept map of the reading"},
    "de": {"student": "Die Begriffslandkarte deines Texts", "reference": "Die Begriffslandkarte des Lesetexts"},
}

_GRAPH_LINK_TEXT = {
    "en": {"student": "map of your text (figure below)", "reference": "map of the reading (figure below)"},
    "de": {"student": "Landkarte deines Texts (Abbildung unten)", "reference": "Landkarte des Lesetexts (Abbildung unten)"},
}


def _check_mode(mode: FeedbackMode, name: str, arg):
    forbidden = _FORBIDDEN[mode]
    if (name, None) in forbidden:
        raise ModeMismatch(f"placeholder {{{{{name}}}}} is not available in mode {mode.value}")
    if name == "graph" and ("graph", arg) in forbidden:
        raise ModeMismatch(f"graph '{arg}' is not available in mode {mode.value}")
    if name == "linkage" and ("linkage", "*") in forbidden:
        raise ModeMismatch(f"linkage statements are not available in mode {mode.value}")


def _resolve(name: str, arg, report: ComparisonReport, mode: FeedbackMode, language: str):
    """Resolved placeholder text (HTML-escaped) or a graph link."""
    _check_mode(mode, name, arg)
    if name in ("shared_concepts", "only_student", "only_reference") and arg is None:
        return '<span class="concepts" data-list="%s">%s</span>' % (
            name,
            escape(", ".join(getattr(report, name))),
        )
    if name == "measure" and arg:
        if arg not in report.measures:
            raise UnresolvedPlaceholder(f"unknown measure {{{{measure:{arg}}}}}")
        return '<span class="measure" data-measure="%s">%s</span>' % (
            escape(arg),
            escape("%.2f" % report.measures[arg]),
        )
    if name == "linkage" and arg:
        for entry in report.linkage_statements:
            if entry["concept"] == arg:
                return '<span class="linkage" data-concept="%s">%s</span>' % (
                    escape(arg),
                    escape(", ".join(entry["neighbors_in_student"])),
                )
        raise UnresolvedPlaceholder(f"no linkage statement for {{{{linkage:{arg}}}}}")
    if name == "graph" and arg in _GRAPH_ROLES:
        text = _GRAPH_LINK_TEXT.get(language, _GRAPH_LINK_TEXT["en"])[arg]
        return '<a class="graph-link" href="#graph-%s">%s</a>' % (arg, escape(text))
    raise UnresolvedPlaceholder(f"unknown placeholder {{{{{name}{':' + arg if arg else ''}}}}}")


def _render_paragraph(paragraph: str, report, mode, language) -> str:
    out = []
    pos = 0
    for match in _PLACEHOLDER_RE.finditer(paragraph):
        out.append(escape(paragraph[pos : match.start()]))
        out.append(_resolve(match.group(1), match.group(2), report, mode, language))
        pos = match.end()
    out.append(escape(paragraph[pos:]))
    return "".join(out).replace("\n", "<br/>")


def fill_template(
    template: FeedbackTemplate,
    report: ComparisonReport,
    mode: FeedbackMode,
    student_graph: ConceptGraph = None,
    reference_graph: ConceptGraph = None,
) -> FeedbackDocument:
    """Substitute every placeholder and attach the mode's graph drawings."""
    mode = FeedbackMode(mode)
    body = template.body
    stray = _PLACEHOLDER_RE.sub("", body)
    marker = stray.find("{{")
    if marker == -1:
        marker = stray.find("}}")
    if marker != -1:
        snippet = stray[marker : marker + 30].splitlines()[0]
        raise UnresolvedPlaceholder(f"malformed placeholder near {snippet!r}")

    language = as_language(template.language).value
    paragraphs = [p.strip() for p in re.split(r"\n\s*\n", body) if p.strip()]
    rendered = []
    for i, paragraph in enumerate(paragraphs):
        content = _render_paragraph(paragraph, report, mode, language)
        tag = "h1" if i == 0 else "p"
        rendered.append("<%s>%s</%s>" % (tag, content, tag))

    attachments = []
    roles = {
        FeedbackMode.STUDENT_GRAPH: ("student",),
        FeedbackMode.REFERENCE_GRAPH: ("reference",),
        FeedbackMode.COMPARISON: ("student", "reference"),
    }[mode]
    graphs = {"student": student_graph, "reference": reference_graph}
    for role in roles:
        graph = graphs[role]
        if graph is None:
            raise ValueError(f"mode {mode.value} requires the {role} graph")
        attachments.append(
            Attachment(f"{role}-graph.svg", "image/svg+xml", render_graph_svg(graph).encode("utf-8"))
        )
        attachments.append(
            Attachment(f"{role}-graph.dot", "text/vnd.graphviz", render_graph_dot(graph).encode("utf-8"))
        )

    rendered_body = "\n".join(rendered)
    if "{{" in rendered_body:
        raise UnresolvedPlaceholder("unresolved placeholder left in rendered body")

    document_id = hashlib.sha256(
        "|".join(
            [
                mode.value,
                template.template_id,
                language,
                report.student_fingerprint,
                report.reference_fingerprint,
                hashlib.sha256(rendered_body.encode("utf-8")).hexdigest(),
            ]
        ).encode("utf-8")
    ).hexdigest()[:32]

    return FeedbackDocument(
        document_id=document_id,
        mode=mode,
        rendered_body=rendered_body,
        attachments=attachments,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        report_ref=(report.student_fingerprint, report.reference_fingerprint),
        language=language,
    )


_DOCUMENT_STYLE = """
body { font-family: Georgia, 'Times New Roman', serif; margin: 2rem auto;
       max-width: 46rem; color: #1c2b3a; line-height: 1.5; }
h1 { font-size: 1.4rem; border-bottom: 2px solid #3b5577; padding-bottom: .4rem; }
figure { margin: 1.5rem 0; text-align: center; }
figcaption { font-style: italic; margin-top: .5rem; }
pre { background: #f4f6f9; padding: .8rem; overflow-x: auto; font-size: .85rem; }
a.graph-link { color: #3b5577; }
""".strip()


def export_document(document: FeedbackDocument) -> bytes:
    """Self-contained XHTML file with embedded SVG drawings and DOT sources."""
    captions = _CAPTIONS.get(document.language, _CAPTIONS["en"])
    sections = [document.rendered_body]
    for attachment in document.attachments:
        if attachment.media_type != "image/svg+xml":
            continue
        role = attachment.name.split("-", 1)[0]
        sections.append(
            '<figure id="graph-%s">%s<figcaption>%s</figcaption></figure>'
            % (role, attachment.data.decode("utf-8"), escape(captions.get(role, role)))
        )
    for attachment in document.attachments:
        if attachment.media_type != "text/vnd.graphviz":
            continue
        sections.append(
            '<details><summary>%s</summary><pre>%s</pre></details>'
            % (escape(attachment.name), escape(attachment.data.decode("utf-8")))
        )
    meta = (
        '{"document_id": "%s", "mode": "%s", "student_fingerprint": "%s", '
        '"reference_fingerprint": "%s"}'
        % (document.document_id, document.mode.value, *document.report_ref)
    )
    html = (
        "<!DOCTYPE html>\n"
        '<html xmlns="http://www.w3.org/1999/xhtml" lang="%s">\n'
        "<head>\n<meta charset=\"utf-8\"/>\n<title>%s</title>\n<style>\n%s\n</style>\n</head>\n"
        "<body>\n<main>\n%s\n</main>\n"
        '<footer>\n<script type="application/json" id="feedback-meta">%s</script>\n</footer>\n'
        "</body>\n</html>\n"
        % (
            document.language,
            escape(captions["student" if document.mode != FeedbackMode.REFERENCE_GRAPH else "reference"]),
            _DOCUMENT_STYLE,
            "\n".join(sections),
            meta,
        )
    )
    return html.encode("utf-8")
