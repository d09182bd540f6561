# file: services/graph_store.py

from collections import defaultdict
from functools import lru_cache
from typing import Iterable, Iterator, Optional

from app.models.rdf import (
    BlankNode,
    Iri,
    PrefixMap,
    Subject,
    Term,
    Triple,
    XSD_STRING,
)


def expand_qname(prefixes: PrefixMap, qname: str) -> Iri:
    """Expands `label:local` against `prefixes`; raises UnknownPrefix for an unbound label."""
    return prefixes.expand(qname)


def _escape(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


@lru_cache(maxsize=131072)
def canonical_term(term: Term) -> str:
    if isinstance(term, Iri):
        return f"<{term.value}>"
    if isinstance(term, BlankNode):
        return f"_:{term.label}"
    text = f'"{_escape(term.lexical)}"'
    if term.language is not None:
        return f"{text}@{term.language}"
    if term.datatype != XSD_STRING:
        return f"{text}^^<{term.datatype.value}>"
    return text


@lru_cache(maxsize=131072)
def canonical_ntriple(triple: Triple) -> str:
    return (
        f"{canonical_term(triple.subject)} {canonical_term(triple.predicate)} "
        f"{canonical_term(triple.object)} ."
    )


def graph_insert(graph: "Graph", triple: Triple) -> bool:
    return graph.insert(triple)


def graph_match(graph: "Graph", s: Optional[Term] = None, p: Optional[Iri] = None, o: Optional[Term] = None) -> list[Triple]:
    return graph.match(s, p, o)


class Graph:
    """Set of triples with subject, predicate and object indexes.

    Single writer; safe to share read-only once built.
    """

    def __init__(self, triples: Iterable[Triple] = (), prefixes: Optional[PrefixMap] = None):
        self._triples: set[Triple] = set()
        self._by_subject: dict[Subject, set[Triple]] = defaultdict(set)
        self._by_predicate: dict[Iri, set[Triple]] = defaultdict(set)
        self._by_object: dict[Term, set[Triple]] = defaultdict(set)
        self.prefixes = prefixes if prefixes is not None else PrefixMap()
        for triple in triples:
            self.insert(triple)

    def insert(self, triple: Triple) -> bool:
        if triple in self._triples:
            return False
        self._triples.add(triple)
        self._by_subject[triple.subject].add(triple)
        self._by_predicate[triple.predicate].add(triple)
        self._by_object[triple.object].add(triple)
        return True

    def remove(self, triple: Triple) -> bool:
        if triple not in self._triples:
            return False
        self._triples.discard(triple)
        for index, key in (
            (self._by_subject, triple.subject),
            (self._by_predicate, triple.predicate),
            (self._by_object, triple.object),
        ):
            bucket = index[key]
            bucket.discard(triple)
            if not bucket:
                del index[key]
        return True

    def update(self, triples: Iterable[Triple]) -> int:
        return sum(1 for triple in triples if self.insert(triple))

    def match(
        self,
        s: Optional[Term] = None,
        p: Optional[Iri] = None,
        o: Optional[Term] = None,
    ) -> list[Triple]:
        """Triples agreeing with every bound position, in canonical N-Triples order."""
        candidates: Optional[set[Triple]] = None
        for index, key in ((self._by_subject, s), (self._by_predicate, p), (self._by_object, o)):
            if key is None:
                continue
            bucket = index.get(key)
            if not bucket:
                return []
            if candidates is None or len(bucket) < len(candidates):
                candidates = bucket
        if candidates is None:
            candidates = self._triples
        found = [
            t for t in candidates
            if (s is None or t.subject == s) and (p is None or t.predicate == p) and (o is None or t.object == o)
        ]
        return sorted(found, key=canonical_ntriple)

    def objects(self, s: Term, p: Iri) -> list[Term]:
        return [t.object for t in self.match(s, p, None)]

    def has_node(self, term: Term) -> bool:
        return term in self._by_subject or term in self._by_object

    def subjects(self) -> list[Subject]:
        return sorted(self._by_subject, key=canonical_term)

    def index_sizes(self) -> tuple[int, int, int]:
        return (
            sum(len(bucket) for bucket in self._by_subject.values()),
            sum(len(bucket) for bucket in self._by_predicate.values()),
            sum(len(bucket) for bucket in self._by_object.values()),
        )

    def sorted_triples(self) -> list[Triple]:
        return sorted(self._triples, key=canonical_ntriple)

    def copy(self) -> "Graph":
        return Graph(self._triples, self.prefixes.copy())

    def __contains__(self, triple: object) -> bool:
        return triple in self._triples

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.sorted_triples())

    def __len__(self) -> int:
        return len(self._triples)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Graph) and self._triples == other._triples

    def __repr__(self) -> str:
        return f"<Graph {len(self)} triples>"


class BlankNodeAllocator:
    """Hands out fresh labels b0, b1, ... skipping labels already in use."""

    def __init__(self, prefix: str = "b", reserved: Iterable[str] = ()):
        self.prefix = prefix
        self._next = 0
        self._used = set(reserved)

    def reserve(self, label: str) -> None:
        self._used.add(label)

    def __contains__(self, label: object) -> bool:
        return label in self._used

    def fresh(self) -> BlankNode:
        while f"{self.prefix}{self._next}" in self._used:
            self._next += 1
        label = f"{self.prefix}{self._next}"
        self._used.add(label)
        self._next += 1
        return BlankNode(label)


def relabel_blank_nodes(graph: Graph, allocator: BlankNodeAllocator) -> Graph:
    """Copy of `graph` with every blank node renamed to a fresh allocator label."""
    mapping: dict[BlankNode, BlankNode] = {}

    def rename(term):
        if isinstance(term, BlankNode):
            if term not in mapping:
                mapping[term] = allocator.fresh()
            return mapping[term]
        return term

    relabelled = Graph(prefixes=graph.prefixes.copy())
    for triple in graph.sorted_triples():
        relabelled.insert(Triple(rename(triple.subject), triple.predicate, rename(triple.object)))
    return relabelled


def _blank_signatures(graph: Graph) -> dict[BlankNode, str]:
    """Colour refinement over blank nodes: each round folds in the neighbours' colours."""
    nodes = {t.subject for t in graph._triples if isinstance(t.subject, BlankNode)}
    nodes |= {t.object for t in graph._triples if isinstance(t.object, BlankNode)}
    colours = {node: "" for node in nodes}

    def show(term, table):
        return f"_:{table[term]}" if isinstance(term, BlankNode) else canonical_term(term)

    for _ in range(len(nodes) + 1):
        refined = {}
        for node in nodes:
            out_edges = sorted(f"+{canonical_term(t.predicate)} {show(t.object, colours)}"
                               for t in graph._by_subject.get(node, ()))
            in_edges = sorted(f"-{canonical_term(t.predicate)} {show(t.subject, colours)}"
                              for t in graph._by_object.get(node, ()))
            refined[node] = str(hash((colours[node], tuple(out_edges), tuple(in_edges))))
        stable = len(set(refined.values())) == len(set(colours.values()))
        colours = refined
        if stable:
            break
    return colours


def isomorphic(first: Graph, second: Graph) -> bool:
    """Graph equality up to blank-node relabelling (colour refinement, then a backtracking check)."""
    if len(first) != len(second):
        return False
    if first == second:
        return True
    ground_a = {t for t in first._triples if not _has_blank(t)}
    ground_b = {t for t in second._triples if not _has_blank(t)}
    if ground_a != ground_b:
        return False
    colours_a = _blank_signatures(first)
    colours_b = _blank_signatures(second)
    if sorted(colours_a.values()) != sorted(colours_b.values()):
        return False
    rest_a = [t for t in first._triples if _has_blank(t)]
    rest_b = {t for t in second._triples if _has_blank(t)}
    nodes_a = sorted(colours_a, key=lambda n: (colours_a[n], n.label))
    candidates = {
        node: [m for m in colours_b if colours_b[m] == colours_a[node]]
        for node in nodes_a
    }

    def consistent(mapping) -> bool:
        for t in rest_a:
            s = mapping.get(t.subject, t.subject) if isinstance(t.subject, BlankNode) else t.subject
            o = mapping.get(t.object, t.object) if isinstance(t.object, BlankNode) else t.object
            if (isinstance(t.subject, BlankNode) and t.subject not in mapping) or (
                isinstance(t.object, BlankNode) and t.object not in mapping
            ):
                continue
            if Triple(s, t.predicate, o) not in rest_b:
                return False
        return True

    def search(i: int, mapping: dict, used: set) -> bool:
        if i == len(nodes_a):
            return True
        node = nodes_a[i]
        for target in candidates[node]:
            if target in used:
                continue
            mapping[node] = target
            used.add(target)
            if consistent(mapping) and search(i + 1, mapping, used):
                return True
            del mapping[node]
            used.discard(target)
        return False

    return search(0, {}, set())


def _has_blank(triple: Triple) -> bool:
    return isinstance(triple.subject, BlankNode) or isinstance(triple.object, BlankNode)

