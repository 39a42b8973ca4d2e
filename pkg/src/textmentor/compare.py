"""Similarity measures between two concept graphs.

Six bounded measures cover different aspects: vertex-set and edge-set
overlap (Jaccard), relative size, diameter, density, and degree
structure. All are symmetric, land in [0, 1], and ignore edge
strengths; degenerate graphs have fixed conventions (1 when both
sides are empty for a measure, 0 when exactly one is).
"""

import json
from dataclasses import dataclass, field

from .errors import GraphFormatError
from .graphs import ConceptGraph, canonical_json

REPORT_FORMAT_MARKER = "comparison-report/v1"

MEASURE_NAMES = (
    "concept_match",
    "propositional_match",
    "surface_match",
    "graphical_match",
    "gamma_match",
    "structural_match",
)


def _jaccard(set_a: set, set_b: set) -> float:
    if not set_a and not set_b:
        return 1.0
    union = set_a | set_b
    return len(set_a & set_b) / len(union)


def _min_over_max(a: float, b: float) -> float:
    if a == 0 and b == 0:
        return 1.0
    return min(a, b) / max(a, b)


def concept_match(a: ConceptGraph, b: ConceptGraph) -> float:
    """Jaccard overlap of the vertex label sets."""
    return _jaccard(a.labels(), b.labels())


def propositional_match(a: ConceptGraph, b: ConceptGraph) -> float:
    """Jaccard overlap of the edge sets (unordered pairs, strengths ignored)."""
    return _jaccard(a.edge_pairs(), b.edge_pairs())


def surface_match(a: ConceptGraph, b: ConceptGraph) -> float:
    """Smaller edge count over larger."""
    return _min_over_max(len(a.edges), len(b.edges))


def graphical_match(a: ConceptGraph, b: ConceptGraph) -> float:
    """Smaller diameter over larger (shortest-path edge counts)."""
    return _min_over_max(a.diameter(), b.diameter())


def _density(g: ConceptGraph) -> float:
    n = len(g.vertices)
    if n <= 1:
        return 0.0
    return 2 * len(g.edges) / (n * (n - 1))


def gamma_match(a: ConceptGraph, b: ConceptGraph) -> float:
    """Smaller density over larger."""
    return _min_over_max(_density(a), _density(b))


def structural_match(a: ConceptGraph, b: ConceptGraph) -> float:
    """Degree-sequence agreement: 1 - L1 distance over elementwise max."""
    deg_a = a.degree_sequence()
    deg_b = b.degree_sequence()
    size = max(len(deg_a), len(deg_b))
    deg_a = deg_a + [0] * (size - len(deg_a))
    deg_b = deg_b + [0] * (size - len(deg_b))
    diff = sum(abs(x - y) for x, y in zip(deg_a, deg_b))
    ceiling = sum(max(x, y) for x, y in zip(deg_a, deg_b))
    if ceiling == 0:
        return 1.0
    return 1.0 - diff / ceiling


_MEASURE_FUNCTIONS = {
    "concept_match": concept_match,
    "propositional_match": propositional_match,
    "surface_match": surface_match,
    "graphical_match": graphical_match,
    "gamma_match": gamma_match,
    "structural_match": structural_match,
}


@dataclass
class ComparisonReport:
    measures: dict
    shared_concepts: list
    only_student: list
    only_reference: list
    linkage_statements: list = field(default_factory=list)
    student_fingerprint: str = ""
    reference_fingerprint: str = ""

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT_MARKER,
            "measures": {name: self.measures[name] for name in MEASURE_NAMES},
            "shared_concepts": list(self.shared_concepts),
            "only_student": list(self.only_student),
            "only_reference": list(self.only_reference),
            "linkage_statements": [
                {
                    "concept": entry["concept"],
                    "neighbors_in_student": list(entry["neighbors_in_student"]),
                }
                for entry in self.linkage_statements
            ],
            "student_fingerprint": self.student_fingerprint,
            "reference_fingerprint": self.reference_fingerprint,
        }

    def to_canonical_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict):
        if not isinstance(data, dict) or data.get("format") != REPORT_FORMAT_MARKER:
            raise GraphFormatError("not a comparison report document")
        try:
            measures = {name: float(data["measures"][name]) for name in MEASURE_NAMES}
            return cls(
                measures=measures,
                shared_concepts=list(data["shared_concepts"]),
                only_student=list(data["only_student"]),
                only_reference=list(data["only_reference"]),
                linkage_statements=[
                    {
                        "concept": e["concept"],
                        "neighbors_in_student": list(e["neighbors_in_student"]),
                    }
                    for e in data.get("linkage_statements", [])
                ],
                student_fingerprint=data.get("student_fingerprint", ""),
                reference_fingerprint=data.get("reference_fingerprint", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphFormatError(f"malformed comparison report: {exc}") from None

    @classmethod
    def from_json(cls, text: str):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"not valid JSON: {exc}") from None
        return cls.from_dict(data)


def compare(student: ConceptGraph, reference: ConceptGraph) -> ComparisonReport:
    """Full report: six measures, concept diffs, linkage statements."""
    student_labels = student.labels()
    reference_labels = reference.labels()
    shared = sorted(student_labels & reference_labels)
    measures = {
        name: fn(student, reference) for name, fn in _MEASURE_FUNCTIONS.items()
    }
    linkage = [
        {"concept": concept, "neighbors_in_student": sorted(student.neighbors(concept))}
        for concept in shared
    ]
    return ComparisonReport(
        measures=measures,
        shared_concepts=shared,
        only_student=sorted(student_labels - reference_labels),
        only_reference=sorted(reference_labels - student_labels),
        linkage_statements=linkage,
        student_fingerprint=student.fingerprint(),
        reference_fingerprint=reference.fingerprint(),
    )
