"""Shared test helpers: graph factories and brute-force oracles.

The oracles deliberately use different algorithms than the library
(dict-of-pairs counting, Floyd-Warshall) so agreement is meaningful.
"""

import itertools
import random
import string

import pytest

from textmentor.graphs import ConceptGraph, edge_key


def make_graph(labels, edges, weights=None):
    """ConceptGraph from a label list and (a, b[, strength]) tuples."""
    weights = weights or {}
    vertices = {label: weights.get(label, 1) for label in labels}
    edge_map = {}
    for edge in edges:
        a, b = edge[0], edge[1]
        strength = edge[2] if len(edge) > 2 else 1
        edge_map[edge_key(a, b)] = strength
    return ConceptGraph(vertices=vertices, edges=edge_map)


LABEL_POOL = [f"c{letter}" for letter in string.ascii_lowercase]


def random_connected_graph(rng: random.Random, max_vertices: int = 12) -> ConceptGraph:
    """Random spanning tree plus random extra edges; always connected."""
    n = rng.randint(1, max_vertices)
    labels = rng.sample(LABEL_POOL, n)
    edges = []
    for i in range(1, n):
        j = rng.randrange(i)
        edges.append((labels[i], labels[j], rng.randint(1, 5)))
    for a, b in itertools.combinations(labels, 2):
        if rng.random() < 0.15 and edge_key(a, b) not in {edge_key(x, y) for x, y, _ in edges}:
            edges.append((a, b, rng.randint(1, 5)))
    weights = {label: rng.randint(1, 9) for label in labels}
    return make_graph(labels, edges, weights)


def random_corpus(rng: random.Random, max_sentences: int = 6, max_stems: int = 10):
    """Random token-sentence corpus as lists of stem lists."""
    vocabulary = rng.sample(LABEL_POOL, rng.randint(1, max_stems))
    sentences = []
    for _ in range(rng.randint(1, max_sentences)):
        k = rng.randint(0, min(len(vocabulary), 5))
        sentence = [rng.choice(vocabulary) for _ in range(k + rng.randint(0, 2))]
        sentences.append(sentence)
    return sentences


def oracle_matrix(sentences):
    """Brute-force pair enumeration: dict of (a, b) -> count, term -> freq."""
    pair_counts = {}
    term_freq = {}
    for sentence in sentences:
        stems = sorted(set(sentence))
        for stem in stems:
            term_freq[stem] = term_freq.get(stem, 0) + 1
        for a, b in itertools.combinations(stems, 2):
            pair_counts[(a, b)] = pair_counts.get((a, b), 0) + 1
    return pair_counts, term_freq


def oracle_jaccard(set_a, set_b) -> float:
    if not set_a and not set_b:
        return 1.0
    return len(set_a & set_b) / len(set_a | set_b)


def oracle_diameter(graph: ConceptGraph) -> int:
    """Floyd-Warshall longest shortest path (finite pairs only)."""
    labels = sorted(graph.vertices)
    if len(labels) <= 1:
        return 0
    big = float("inf")
    dist = {(a, b): (0 if a == b else big) for a in labels for b in labels}
    for a, b in graph.edges:
        dist[(a, b)] = 1
        dist[(b, a)] = 1
    for k in labels:
        for i in labels:
            for j in labels:
                through = dist[(i, k)] + dist[(k, j)]
                if through < dist[(i, j)]:
                    dist[(i, j)] = through
    finite = [d for d in dist.values() if d != big]
    return int(max(finite))


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
