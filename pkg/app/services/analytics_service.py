# file: services/analytics_service.py

import json
import math
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import structlog

from app.models.analytics import (
    Binding,
    GroupDistribution,
    GroupedDistribution,
    GroupSummary,
    Histogram,
    PropertyGraphTables,
    TriplesPerDoc,
)
from app.models.ontology import Ontology, OntProperty, PropertyKind, UnknownProperty
from app.models.rdf import BlankNode, Iri, Literal, Term, TriplePattern, Variable, Vocab, fca
from app.services.graph_store import Graph, canonical_term
from app.services.ontology_service import property_spec
from app.services.turtle_service import parse_triple_patterns, parse_turtle
from app.storage.outputs import doc_id_of, graph_files, write_csv
from app.storage.run_state import write_atomic
from app.utils.errors import EmptyCorpus, EmptySample, UnknownPredicate

logger = structlog.get_logger(__name__)

OFFENSE_CATEGORY = fca("offenseCategory")
DURATION_DAYS = fca("durationDays")
AMOUNT_EUR = fca("amountEUR")
FROM_DOCUMENT = fca("fromDocument")

DEFAULT_GROUP_PATH = """
?case fca:hasAppeal ?appeal .
?appeal fca:hasDecision ?group .
?case fca:hasConviction ?conviction .
?conviction fca:imposedPunishment ?node .
"""

HISTOGRAM_FIELDS = ["group", "bin_lo", "bin_hi", "count", "fraction"]


def _substitute(position, binding: Binding):
    if isinstance(position, Variable):
        return binding.get(position.name)
    return position


def bgp_match(graph: Graph, patterns: Sequence[TriplePattern]) -> list[Binding]:
    """Left-to-right nested-loop join; distinct solutions in canonical order."""
    if not patterns:
        raise ValueError("at least one triple pattern is required")
    solutions: list[Binding] = [{}]
    for pattern in patterns:
        extended = []
        for binding in solutions:
            s = _substitute(pattern.subject, binding)
            p = _substitute(pattern.predicate, binding)
            o = _substitute(pattern.object, binding)
            if p is not None and not isinstance(p, Iri):
                continue
            for triple in graph.match(s, p, o):
                candidate = dict(binding)
                for position, value in (
                    (pattern.subject, triple.subject),
                    (pattern.predicate, triple.predicate),
                    (pattern.object, triple.object),
                ):
                    if not isinstance(position, Variable):
                        continue
                    bound = candidate.get(position.name)
                    if bound is not None and bound != value:
                        break
                    candidate[position.name] = value
                else:
                    extended.append(candidate)
        solutions = extended
        if not solutions:
            return []

    unique = {}
    for binding in solutions:
        key = tuple(sorted((name, canonical_term(term)) for name, term in binding.items()))
        unique.setdefault(key, binding)
    return [unique[key] for key in sorted(unique)]


def linear_edges(values: Sequence[float], width: float) -> list[float]:
    if width <= 0:
        raise ValueError("bin width must be positive")
    if not len(values):
        return [0.0, float(width)]
    lo = math.floor(min(values) / width) * width
    hi = (math.floor(max(values) / width) + 1) * width
    count = int(round((hi - lo) / width))
    return [float(lo + i * width) for i in range(count + 1)]


def decade_edges(values: Sequence[float]) -> list[float]:
    """Powers of ten covering the positive values; 0 is prepended when a value is not positive."""
    positives = [v for v in values if v > 0]
    if not positives:
        return [0.0, 1.0]
    lo = math.floor(math.log10(min(positives)))
    hi = math.floor(math.log10(max(positives))) + 1
    edges = [float(10 ** k) for k in range(lo, hi + 1)]
    if len(positives) < len(values):
        edges = [0.0] + [e for e in edges if e > 0]
    return edges


def histogram(values: Sequence[float], edges: Sequence[float]) -> Histogram:
    counts, _ = np.histogram(np.asarray(values, dtype=float), bins=np.asarray(edges, dtype=float))
    counts = [int(c) for c in counts]
    total = sum(counts)
    normalized = [c / total for c in counts] if total else None
    return Histogram(bin_edges=list(edges), counts=counts, normalized=normalized)


def summarize(group: str, values: Sequence[float]) -> GroupSummary:
    data = np.asarray(values, dtype=float)
    q1, median, q3 = np.percentile(data, [25, 50, 75])
    return GroupSummary(
        group=group,
        n=len(data),
        mean=float(data.mean()),
        median=float(median),
        q1=float(q1),
        q3=float(q3),
        min=float(data.min()),
        max=float(data.max()),
    )


def ks_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """Largest gap between the two empirical CDFs, evaluated at every sample point."""
    if not len(a) or not len(b):
        raise EmptySample()
    first = np.sort(np.asarray(a, dtype=float))
    second = np.sort(np.asarray(b, dtype=float))
    points = np.concatenate([first, second])
    cdf_first = np.searchsorted(first, points, side="right") / len(first)
    cdf_second = np.searchsorted(second, points, side="right") / len(second)
    return float(np.max(np.abs(cdf_first - cdf_second)))


def triples_per_doc(output_dir: Union[str, Path], bin_width: float = 5) -> TriplesPerDoc:
    files = graph_files(output_dir)
    if not files:
        raise EmptyCorpus(str(output_dir))
    counts = {}
    for path in files:
        counts[doc_id_of(path)] = len(parse_turtle(path.read_text(encoding="utf-8"), source=path.name).graph)
    values = list(counts.values())
    return TriplesPerDoc(
        counts=counts,
        histogram=histogram(values, linear_edges(values, bin_width)),
        mean=float(np.mean(values)),
        median=float(np.median(values)),
    )


def count_by_object(graph: Graph, ontology: Ontology, predicate: Iri = OFFENSE_CATEGORY) -> dict[Term, int]:
    """Distinct subjects per object value of `predicate`, most frequent first."""
    if isinstance(property_spec(ontology, predicate), UnknownProperty):
        raise UnknownPredicate(predicate.value)
    counts: dict[Term, int] = {}
    for triple in graph.match(None, predicate, None):
        counts[triple.object] = counts.get(triple.object, 0) + 1
    ordered = sorted(counts.items(), key=lambda item: (-item[1], canonical_term(item[0])))
    return dict(ordered)


def _number(term: Term) -> Optional[float]:
    if not isinstance(term, Literal):
        return None
    try:
        value = Decimal(term.lexical.strip())
    except InvalidOperation:
        return None
    return float(value) if value.is_finite() else None


def _group_label(term: Term) -> str:
    if isinstance(term, Iri):
        return term.local_name()
    return canonical_term(term)


def grouped_distribution(
    graph: Graph,
    value_predicate: Iri,
    group_path: Optional[Sequence[TriplePattern]] = None,
    bin_width: Optional[float] = None,
) -> GroupedDistribution:
    """Per decision group: normalized histogram on shared bin edges plus a five-number summary.

    `group_path` must bind ?group (the decision) and ?node (the node carrying `value_predicate`).
    Each value-bearing node contributes one value to one group: its first readable value in
    canonical order, in the first group (canonical order) it is reachable from. Extra values and
    nodes reachable from several groups are reported in `warnings`.
    """
    patterns = group_path or parse_triple_patterns(DEFAULT_GROUP_PATH)
    pairs = {(b["group"], b["node"]) for b in bgp_match(graph, patterns) if "group" in b and "node" in b}
    groups_of: dict[Term, list[Term]] = {}
    for group, node in sorted(pairs, key=lambda pair: (canonical_term(pair[0]), canonical_term(pair[1]))):
        if not isinstance(node, Literal):
            groups_of.setdefault(node, []).append(group)

    per_group: dict[str, list[float]] = {}
    skipped = extra = shared = 0
    for node in sorted(groups_of, key=canonical_term):
        numbers = []
        for value in sorted(graph.objects(node, value_predicate), key=canonical_term):
            number = _number(value)
            if number is None:
                skipped += 1
            else:
                numbers.append(number)
        if not numbers:
            continue
        extra += len(numbers) - 1
        groups = groups_of[node]
        if len({_group_label(g) for g in groups}) > 1:
            shared += 1
        per_group.setdefault(_group_label(groups[0]), []).append(numbers[0])

    result = GroupedDistribution(value_predicate=value_predicate.value, skipped=skipped)
    if skipped:
        result.warnings.append(f"{skipped} value(s) could not be read as numbers and were skipped")
    if extra:
        result.warnings.append(f"{extra} extra value(s) on nodes with several values were ignored")
    if shared:
        result.warnings.append(f"{shared} node(s) reachable from several groups were counted in the first one only")
    if not per_group:
        result.warnings.append(f"no values of <{value_predicate.value}> are reachable from a decision group")
        logger.warning("grouped_distribution_empty", predicate=value_predicate.value)
        return result

    everything = [v for values in per_group.values() for v in values]
    if bin_width is None and value_predicate == AMOUNT_EUR:
        edges = decade_edges(everything)
    else:
        edges = linear_edges(everything, bin_width or 90)
    for label in sorted(per_group):
        values = per_group[label]
        result.groups[label] = GroupDistribution(
            histogram=histogram(values, edges),
            summary=summarize(label, values),
            values=values,
        )
    compared = compare_groups(result)
    if compared is not None:
        result.compared, result.ks_statistic = compared
    return result


def compare_groups(distribution: GroupedDistribution) -> Optional[tuple[list[str], float]]:
    """KS statistic between the first two groups in label order; None with fewer than two groups."""
    if len(distribution.groups) < 2:
        return None
    first, second = sorted(distribution.groups)[:2]
    return [first, second], ks_statistic(distribution.groups[first].values, distribution.groups[second].values)


def _node_id(term: Term) -> str:
    return term.value if isinstance(term, Iri) else f"_:{term.label}"


def _most_specific(types: set[Iri], ontology: Ontology) -> str:
    if not types:
        return ""
    known = [t for t in types if t in ontology.classes]
    pool = known or list(types)
    best = min(pool, key=lambda t: (-len(ontology.superclass_closure(t)), t.value))
    return best.local_name()


def _is_edge(triple, ontology: Ontology) -> bool:
    spec = property_spec(ontology, triple.predicate)
    return (
        isinstance(spec, OntProperty)
        and spec.kind == PropertyKind.OBJECT
        and isinstance(triple.object, (Iri, BlankNode))
    )


def export_property_graph(graph: Graph, ontology: Ontology) -> PropertyGraphTables:
    """Nodes with a class, provenance and attributes; edges for object-property triples only.

    Resource-valued triples of other predicates (external or unknown) become attributes holding
    the object's id, so edge count equals the number of object-property triples.
    """
    nodes: set = set()
    for triple in graph.sorted_triples():
        if triple.subject in ontology.classes:
            continue
        nodes.add(triple.subject)
        if _is_edge(triple, ontology):
            nodes.add(triple.object)

    attribute_names: set[str] = set()
    rows = []
    edges = []
    for node in sorted(nodes, key=canonical_term):
        types = {o for o in graph.objects(node, Vocab.RDF_TYPE) if isinstance(o, Iri)}
        row = {"id": _node_id(node), "class": _most_specific(types, ontology), "doc": ""}
        docs = []
        attributes: dict[str, list[str]] = {}
        for triple in graph.match(node):
            if triple.predicate == Vocab.RDF_TYPE:
                continue
            if _is_edge(triple, ontology):
                edges.append({
                    "src": _node_id(node),
                    "dst": _node_id(triple.object),
                    "relation": triple.predicate.local_name(),
                })
            elif triple.predicate == FROM_DOCUMENT and isinstance(triple.object, Literal):
                docs.append(triple.object.lexical)
            else:
                obj = triple.object
                value = obj.lexical if isinstance(obj, Literal) else _node_id(obj)
                attributes.setdefault(triple.predicate.local_name(), []).append(value)
        row["doc"] = "|".join(sorted(docs))
        for name, values in attributes.items():
            row[name] = "|".join(sorted(values))
            attribute_names.add(name)
        rows.append(row)

    columns = ["id", "class", "doc"] + sorted(attribute_names - {"id", "class", "doc"})
    for row in rows:
        for column in columns:
            row.setdefault(column, "")
    edges.sort(key=lambda e: (e["src"], e["relation"], e["dst"]))
    return PropertyGraphTables(node_columns=columns, nodes=rows, edges=edges)


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def histogram_rows(histograms: dict[str, Histogram]) -> list[dict]:
    rows = []
    for group, hist in histograms.items():
        fractions = hist.normalized or [0.0] * len(hist.counts)
        for i, count in enumerate(hist.counts):
            rows.append({
                "group": group,
                "bin_lo": _fmt(hist.bin_edges[i]),
                "bin_hi": _fmt(hist.bin_edges[i + 1]),
                "count": count,
                "fraction": repr(fractions[i]),
            })
    return rows


def write_histogram_csv(path: Path, histograms: dict[str, Histogram]) -> Path:
    return write_csv(path, HISTOGRAM_FIELDS, histogram_rows(histograms))


def write_plot_data(path: Path, payload: dict) -> Path:
    write_atomic(path, json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    return Path(path)


def write_property_graph(out_dir: Path, tables: PropertyGraphTables) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    nodes = write_csv(out_dir / "nodes.csv", tables.node_columns, tables.nodes)
    edges = write_csv(out_dir / "edges.csv", ["src", "dst", "relation"], tables.edges)
    return nodes, edges


def bindings_rows(bindings: list[Binding]) -> tuple[list[str], list[dict]]:
    names = sorted({name for binding in bindings for name in binding})
    rows = [{name: canonical_term(b[name]) if name in b else "" for name in names} for b in bindings]
    return names, rows
