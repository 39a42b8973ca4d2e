"""Concept graph construction from tokenized sentences.

The association window is the sentence: every unordered pair of
distinct stems inside one sentence counts once (set semantics), and a
term's frequency is the number of sentences containing it. Concepts
are the highest-frequency terms; the graph keeps the strongest
co-occurrence edges and is repaired to a single connected component.
All tie-breaks are total orders, so builds are byte-reproducible.
"""

import hashlib
import json
from dataclasses import dataclass
from itertools import combinations

from . import resources
from .errors import EmptyConcepts, EmptyInput
from .graphs import ConceptGraph, GraphMeta, edge_key
from .textprep import (
    DEFAULT_MIN_WORDS,
    RawSubmissionText,
    clean_text,
    sentences_to_tokens,
)

DEFAULT_MAX_CONCEPTS = 25
DEFAULT_MAX_EDGES = 40


@dataclass
class AssociationMatrix:
    """Symmetric sentence-window co-occurrence counts.

    terms are sorted lexicographically; counts[i][j] is the number of
    sentences containing both terms i and j (diagonal fixed at 0);
    term_freq[t] is the number of sentences containing t.
    """

    terms: list
    counts: list
    term_freq: dict

    def index(self, term: str) -> int:
        return self.terms.index(term)

    def pair_count(self, a: str, b: str) -> int:
        return self.counts[self.index(a)][self.index(b)]

    def row_mass(self, term: str) -> int:
        return sum(self.counts[self.index(term)])


def _sentence_stems(sentence) -> set:
    """Distinct stems of a sentence; accepts TokenizedSentence or iterable of stems."""
    tokens = getattr(sentence, "tokens", None)
    if tokens is not None:
        return {t.stem for t in tokens}
    return set(sentence)


def build_association_matrix(sentences) -> AssociationMatrix:
    stem_sets = [_sentence_stems(s) for s in sentences]
    stem_sets = [s for s in stem_sets if s]
    if not stem_sets:
        raise EmptyInput("no non-empty sentences to analyze")
    terms = sorted(set().union(*stem_sets))
    index = {term: i for i, term in enumerate(terms)}
    size = len(terms)
    counts = [[0] * size for _ in range(size)]
    term_freq = {term: 0 for term in terms}
    for stems in stem_sets:
        for stem in stems:
            term_freq[stem] += 1
        for a, b in combinations(sorted(stems), 2):
            i, j = index[a], index[b]
            counts[i][j] += 1
            counts[j][i] += 1
    return AssociationMatrix(terms=terms, counts=counts, term_freq=term_freq)


def select_concepts(matrix: AssociationMatrix, max_concepts: int = DEFAULT_MAX_CONCEPTS) -> list:
    """Top terms by (frequency desc, association mass desc, label asc)."""
    if max_concepts < 1:
        raise ValueError("max_concepts must be positive")
    ranked = sorted(
        matrix.terms,
        key=lambda t: (-matrix.term_freq[t], -matrix.row_mass(t), t),
    )
    return ranked[:max_concepts]


def build_graph(
    matrix: AssociationMatrix,
    concepts,
    max_edges: int = DEFAULT_MAX_EDGES,
    meta: GraphMeta = None,
) -> ConceptGraph:
    """Strongest-edge graph over the concepts, repaired to connectivity.

    Candidate edges (count > 0 pairs within the concepts) are ranked by
    (strength desc, label pair asc); the top max_edges are kept, then
    the best remaining candidates joining distinct components are added
    until connected. Vertices with no co-occurrence path to the largest
    component are dropped and recorded in meta.isolated_dropped.
    """
    concepts = list(concepts)
    if not concepts:
        raise EmptyConcepts("cannot build a graph over zero concepts")
    unknown = [c for c in concepts if c not in matrix.term_freq]
    if unknown:
        raise ValueError(f"concepts not present in matrix: {unknown!r}")
    if max_edges < 1:
        raise ValueError("max_edges must be positive")

    index = {term: i for i, term in enumerate(matrix.terms)}
    candidates = []
    for a, b in combinations(sorted(set(concepts)), 2):
        strength = matrix.counts[index[a]][index[b]]
        if strength > 0:
            candidates.append((a, b, strength))
    candidates.sort(key=lambda e: (-e[2], (e[0], e[1])))

    kept = candidates[:max_edges]
    remaining = candidates[max_edges:]

    labels = sorted(set(concepts))
    component = _components(labels, kept)
    for a, b, strength in remaining:
        if len(set(component.values())) == 1:
            break
        if component[a] != component[b]:
            kept.append((a, b, strength))
            component = _merge(component, component[a], component[b])

    dropped = ()
    roots = set(component.values())
    if len(roots) > 1:
        keep_root = _largest_component_root(component)
        dropped = tuple(sorted(l for l, r in component.items() if r != keep_root))
        labels = [l for l in labels if component[l] == keep_root]
        kept = [e for e in kept if component[e[0]] == keep_root]

    meta = meta or GraphMeta()
    if dropped:
        meta = GraphMeta(
            source_id=meta.source_id,
            params_hash=meta.params_hash,
            stopword_hash=meta.stopword_hash,
            builder_version=meta.builder_version,
            isolated_dropped=dropped,
        )
    return ConceptGraph(
        vertices={label: matrix.term_freq[label] for label in labels},
        edges={edge_key(a, b): strength for a, b, strength in kept},
        meta=meta,
    )


def _components(labels, edges) -> dict:
    """Union-find over labels; returns label -> component root."""
    parent = {label: label for label in labels}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, _ in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return {label: find(label) for label in labels}


def _merge(component, root_a, root_b) -> dict:
    target, source = min(root_a, root_b), max(root_a, root_b)
    return {l: (target if r == source else r) for l, r in component.items()}


def _largest_component_root(component) -> str:
    sizes = {}
    for root in component.values():
        sizes[root] = sizes.get(root, 0) + 1
    # ties go to the component whose smallest member label sorts first
    members = {}
    for label, root in component.items():
        members.setdefault(root, []).append(label)
    return min(sizes, key=lambda r: (-sizes[r], min(members[r])))


def params_hash(params: dict) -> str:
    payload = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def graph_from_raw_text(
    raw: RawSubmissionText,
    min_words: int = DEFAULT_MIN_WORDS,
    max_concepts: int = DEFAULT_MAX_CONCEPTS,
    max_edges: int = DEFAULT_MAX_EDGES,
) -> ConceptGraph:
    """Full pipeline: clean, segment, tokenize, associate, build."""
    clean = clean_text(raw, min_words=min_words)
    sentences = sentences_to_tokens(clean)
    matrix = build_association_matrix(sentences)
    concepts = select_concepts(matrix, max_concepts=max_concepts)
    meta = GraphMeta(
        source_id=raw.source_id,
        params_hash=params_hash(
            {
                "language": clean.language.value,
                "min_words": min_words,
                "max_concepts": max_concepts,
                "max_edges": max_edges,
                "window": "sentence",
            }
        ),
        stopword_hash=resources.stopword_hash(clean.language),
    )
    return build_graph(matrix, concepts, max_edges=max_edges, meta=meta)


def graph_from_clean_text(
    clean,
    source_id: str = "",
    max_concepts: int = DEFAULT_MAX_CONCEPTS,
    max_edges: int = DEFAULT_MAX_EDGES,
) -> ConceptGraph:
    """Pipeline from an already-cleaned text (used by the service stages)."""
    sentences = sentences_to_tokens(clean)
    matrix = build_association_matrix(sentences)
    concepts = select_concepts(matrix, max_concepts=max_concepts)
    meta = GraphMeta(
        source_id=source_id,
        params_hash=params_hash(
            {
                "language": clean.language.value,
                "min_words": 0,
                "max_concepts": max_concepts,
                "max_edges": max_edges,
                "window": "sentence",
            }
        ),
        stopword_hash=resources.stopword_hash(clean.language),
    )
    return build_graph(matrix, concepts, max_edges=max_edges, meta=meta)
