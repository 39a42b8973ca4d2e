"""Command line interface.

Subcommands wrap library operations one to one, so every artifact the
CLI writes is byte-identical to what the API produces. Exit codes:
0 success, 1 usage error, 2 processing error.
"""

import argparse
import sys
import tempfile
from pathlib import Path

from .compare import MEASURE_NAMES, ComparisonReport, compare
from .errors import TextMentorError
from .feedback import FeedbackMode, FeedbackTemplate, export_document, fill_template
from .graphs import ConceptGraph
from .builder import (
    DEFAULT_MAX_CONCEPTS,
    DEFAULT_MAX_EDGES,
    graph_from_raw_text,
)
from .textprep import DEFAULT_MIN_WORDS, RawSubmissionText

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROCESSING = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fail(stage: str, message: str) -> int:
    print(f"error [{stage}]: {message}", file=sys.stderr)
    return EXIT_PROCESSING


def _load_graph(path: str, stage: str) -> ConceptGraph:
    try:
        return ConceptGraph.from_json(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise TextMentorError(f"{path}: {exc}") from None
    except TextMentorError as exc:
        raise TextMentorError(f"{path}: {exc.message}") from None


def cmd_refgraph(args) -> int:
    try:
        content = Path(args.input).read_text(encoding="utf-8")
    except OSError as exc:
        return _fail("read", str(exc))
    except UnicodeDecodeError as exc:
        return _fail("read", f"{args.input}: not UTF-8 text ({exc})")
    if not content.strip():
        return _fail("read", f"{args.input}: file is empty")
    try:
        raw = RawSubmissionText(
            content=content, declared_language=args.language, source_id=args.input
        )
        graph = graph_from_raw_text(
            raw,
            min_words=args.min_words,
            max_concepts=args.max_concepts,
            max_edges=args.max_edges,
        )
    except TextMentorError as exc:
        return _fail("build", exc.message)
    out = Path(args.out or f"{args.input}.graph.json")
    out.write_text(graph.to_canonical_json(), encoding="utf-8")
    print(f"wrote {out}: {len(graph.vertices)} vertices, {len(graph.edges)} edges")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        student = _load_graph(args.student, "parse")
        reference = _load_graph(args.reference, "parse")
    except TextMentorError as exc:
        return _fail("parse", exc.message)
    report = compare(student, reference)
    out = Path(args.out or "comparison.report.json")
    out.write_text(report.to_canonical_json(), encoding="utf-8")
    width = max(len(name) for name in MEASURE_NAMES)
    for name in MEASURE_NAMES:
        print(f"{name.ljust(width)}  {report.measures[name]:.2f}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_feedback(args) -> int:
    try:
        report = ComparisonReport.from_json(Path(args.report).read_text(encoding="utf-8"))
    except OSError as exc:
        return _fail("read", str(exc))
    except TextMentorError as exc:
        return _fail("parse", f"{args.report}: {exc.message}")
    mode = FeedbackMode(args.mode)
    graphs = {}
    try:
        if args.student_graph:
            graphs["student_graph"] = _load_graph(args.student_graph, "parse")
        if args.reference_graph:
            graphs["reference_graph"] = _load_graph(args.reference_graph, "parse")
    except TextMentorError as exc:
        return _fail("parse", exc.message)
    checks = (
        ("student_graph", report.student_fingerprint),
        ("reference_graph", report.reference_fingerprint),
    )
    for key, fingerprint in checks:
        if key in graphs and fingerprint and graphs[key].fingerprint() != fingerprint:
            return _fail(
                "verify", f"{key.replace('_', ' ')} does not match the report fingerprint"
            )
    try:
        template = FeedbackTemplate.load(args.template, args.language)
        document = fill_template(template, report, mode, **graphs)
        html = export_document(document)
    except TextMentorError as exc:
        return _fail("render", exc.message)
    except ValueError as exc:
        return _fail("render", str(exc))
    out = Path(args.out or "feedback.html")
    out.write_bytes(html)
    print(f"wrote {out} (document {document.document_id})")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .config import load_config
    from .service import ServiceRuntime, create_app

    try:
        config = load_config(args.config)
        runtime = ServiceRuntime(config)
    except TextMentorError as exc:
        return _fail("config", exc.message)
    runtime.start()
    recovered = runtime.recover()
    if recovered:
        print(f"recovering {len(recovered)} pending submission(s)")
    app = create_app(runtime)
    print(f"serving on http://{config.host}:{config.port}")
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    finally:
        runtime.stop()
    return EXIT_OK


def cmd_demo(args) -> int:
    from .bootstrap import run_demo

    workdir = args.out or tempfile.mkdtemp(prefix="textmentor-demo-")
    try:
        run_demo(workdir)
    except Exception as exc:  # demo is a self-checking end-to-end run
        return _fail("demo", str(exc))
    print("demo completed")
    return EXIT_OK


def cmd_init(args) -> int:
    from .bootstrap import scaffold

    try:
        config_path = scaffold(args.out, language=args.language)
    except TextMentorError as exc:
        return _fail("init", exc.message)
    print(f"wrote {config_path}")
    print(f"start the service with: textmentor serve --config {config_path}")
    return EXIT_OK


def cmd_mint_token(args) -> int:
    from . import auth as auth_tokens

    try:
        key = auth_tokens.load_issuer_key(Path(args.issuer_key).read_bytes())
    except (OSError, ValueError) as exc:
        return _fail("key", str(exc))
    print(auth_tokens.mint_token(args.subject, key, ttl_seconds=args.ttl))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="textmentor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refgraph", help="build a concept graph file from a text file")
    p.add_argument("--input", required=True)
    p.add_argument("--language", default="en", choices=["en", "de"])
    p.add_argument("--min-words", type=int, default=DEFAULT_MIN_WORDS, dest="min_words")
    p.add_argument("--max-concepts", type=int, default=DEFAULT_MAX_CONCEPTS, dest="max_concepts")
    p.add_argument("--max-edges", type=int, default=DEFAULT_MAX_EDGES, dest="max_edges")
    p.add_argument("--out")
    p.set_defaults(func=cmd_refgraph)

    p = sub.add_parser("compare", help="compare two concept graph files")
    p.add_argument("--student", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("feedback", help="render a feedback HTML document from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--template", default="comparison")
    p.add_argument("--mode", default="comparison",
                   choices=[m.value for m in FeedbackMode])
    p.add_argument("--language", default="en", choices=["en", "de"])
    p.add_argument("--student-graph", dest="student_graph")
    p.add_argument("--reference-graph", dest="reference_graph")
    p.add_argument("--out")
    p.set_defaults(func=cmd_feedback)

    p = sub.add_parser("serve", help="run the mentoring service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("demo", help="run the scripted end-to-end demo")
    p.add_argument("--out", help="working directory (default: a fresh temp dir)")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("init", help="scaffold a service directory")
    p.add_argument("--out", required=True)
    p.add_argument("--language", default="en", choices=["en", "de"])
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("mint-token", help="mint a signed access token")
    p.add_argument("--issuer-key", required=True, dest="issuer_key")
    p.add_argument("--subject", required=True)
    p.add_argument("--ttl", type=int, default=3600)
    p.set_defaults(func=cmd_mint_token)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
