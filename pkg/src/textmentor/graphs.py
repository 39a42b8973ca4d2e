"""Concept graph model and its canonical file format.

A ConceptGraph is an undirected weighted graph over stemmed concept
labels. The serialized form is canonical: sorted JSON keys, vertices
sorted by label, edges sorted by (a, b) with a < b, so equal graphs
produce byte-identical files and a stable content fingerprint.
"""

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field, replace

from .errors import GraphFormatError

FORMAT_MARKER = "concept-graph/v1"
BUILDER_VERSION = "1"


@dataclass(frozen=True)
class GraphMeta:
    source_id: str = ""
    params_hash: str = ""
    stopword_hash: str = ""
    builder_version: str = BUILDER_VERSION
    isolated_dropped: tuple = ()

    def to_dict(self) -> dict:
        data = {
            "source_id": self.source_id,
            "params_hash": self.params_hash,
            "stopword_hash": self.stopword_hash,
            "builder_version": self.builder_version,
        }
        if self.isolated_dropped:
            data["isolated_dropped"] = sorted(self.isolated_dropped)
        return data

    @classmethod
    def from_dict(cls, data: dict):
        return cls(
            source_id=data.get("source_id", ""),
            params_hash=data.get("params_hash", ""),
            stopword_hash=data.get("stopword_hash", ""),
            builder_version=data.get("builder_version", BUILDER_VERSION),
            isolated_dropped=tuple(data.get("isolated_dropped", ())),
        )


def edge_key(a: str, b: str) -> tuple:
    """Unordered label pair in canonical (min, max) order."""
    return (a, b) if a <= b else (b, a)


@dataclass
class ConceptGraph:
    """vertices: label -> weight; edges: (a, b) with a < b -> strength."""

    vertices: dict = field(default_factory=dict)
    edges: dict = field(default_factory=dict)
    meta: GraphMeta = field(default_factory=GraphMeta)

    def __post_init__(self):
        self.validate()

    def validate(self):
        for label, weight in self.vertices.items():
            if not isinstance(label, str) or not label:
                raise GraphFormatError(f"invalid vertex label {label!r}")
            if not isinstance(weight, int) or weight < 0:
                raise GraphFormatError(f"invalid weight for {label!r}: {weight!r}")
        for (a, b), strength in self.edges.items():
            if a >= b:
                raise GraphFormatError(f"edge pair not in canonical order: {(a, b)!r}")
            if a not in self.vertices or b not in self.vertices:
                raise GraphFormatError(f"edge endpoint not a vertex: {(a, b)!r}")
            if not isinstance(strength, int) or strength < 1:
                raise GraphFormatError(f"invalid strength for {(a, b)!r}: {strength!r}")

    # --- structure -----------------------------------------------------

    def labels(self) -> set:
        return set(self.vertices)

    def edge_pairs(self) -> set:
        return set(self.edges)

    def neighbors(self, label: str) -> set:
        out = set()
        for a, b in self.edges:
            if a == label:
                out.add(b)
            elif b == label:
                out.add(a)
        return out

    def adjacency(self) -> dict:
        adj = {label: set() for label in self.vertices}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def degree_sequence(self) -> list:
        """Vertex degrees, descending."""
        adj = self.adjacency()
        return sorted((len(n) for n in adj.values()), reverse=True)

    def is_connected(self) -> bool:
        if len(self.vertices) <= 1:
            return True
        adj = self.adjacency()
        start = next(iter(adj))
        seen = {start}
        pending = deque([start])
        while pending:
            for nxt in adj[pending.popleft()]:
                if nxt not in seen:
                    seen.add(nxt)
                    pending.append(nxt)
        return len(seen) == len(self.vertices)

    def diameter(self) -> int:
        """Longest shortest path in edge counts; 0 for <= 1 vertex."""
        if len(self.vertices) <= 1:
            return 0
        adj = self.adjacency()
        best = 0
        for start in adj:
            dist = {start: 0}
            pending = deque([start])
            while pending:
                cur = pending.popleft()
                for nxt in adj[cur]:
                    if nxt not in dist:
                        dist[nxt] = dist[cur] + 1
                        pending.append(nxt)
            best = max(best, max(dist.values()))
        return best

    # --- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_MARKER,
            "vertices": [
                {"label": label, "weight": weight}
                for label, weight in sorted(self.vertices.items())
            ],
            "edges": [
                {"a": a, "b": b, "strength": strength}
                for (a, b), strength in sorted(self.edges.items())
            ],
            "meta": self.meta.to_dict(),
        }

    def to_canonical_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict):
        if not isinstance(data, dict):
            raise GraphFormatError("graph document must be an object")
        if data.get("format") != FORMAT_MARKER:
            raise GraphFormatError(f"unexpected format marker {data.get('format')!r}")
        try:
            vertices = {v["label"]: v["weight"] for v in data.get("vertices", [])}
            edges = {
                edge_key(e["a"], e["b"]): e["strength"] for e in data.get("edges", [])
            }
        except (TypeError, KeyError) as exc:
            raise GraphFormatError(f"malformed graph document: {exc}") from None
        meta = GraphMeta.from_dict(data.get("meta", {}))
        return cls(vertices=vertices, edges=edges, meta=meta)

    @classmethod
    def from_json(cls, text: str):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def fingerprint(self) -> str:
        """Content hash over sorted vertices and edges (meta excluded)."""
        payload = json.dumps(
            {
                "vertices": sorted(self.vertices.items()),
                "edges": sorted((a, b, s) for (a, b), s in self.edges.items()),
            },
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def with_meta(self, **changes):
        return ConceptGraph(
            vertices=dict(self.vertices),
            edges=dict(self.edges),
            meta=replace(self.meta, **changes),
        )


def graph_fingerprint(graph: ConceptGraph) -> str:
    return graph.fingerprint()


def canonical_json(data) -> str:
    """Sorted-key, UTF-8, newline-terminated JSON used for all artifacts."""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
