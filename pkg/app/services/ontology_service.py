# file: services/ontology_service.py

import re
from functools import lru_cache
from pathlib import Path
from typing import Optional, Union

import structlog

from app.models.ontology import (
    ExternalProperty,
    OntClass,
    Ontology,
    OntProperty,
    PropertyKind,
    UnknownProperty,
    VocabularyRow,
)
from app.models.rdf import FCA, XSD, BlankNode, Iri, Literal, PrefixMap, Triple, Vocab, fca
from app.services.graph_store import Graph
from app.services.turtle_service import TurtleDocument, parse_turtle, render_iri, serialize_turtle
from app.utils.errors import CyclicHierarchy, UnknownClass

logger = structlog.get_logger(__name__)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
ONTOLOGY_PATH = DATA_DIR / "fca.ttl"

BASE_EXTERNALS = frozenset({Vocab.RDF_TYPE, Vocab.RDFS_LABEL, Vocab.RDFS_COMMENT})
RDFS_LITERAL = Iri("http://www.w3.org/2000/01/rdf-schema#Literal")

# Terms the analytics layer and the merge step rely on.
REQUIRED_PROPERTIES = (
    "hasAppeal", "hasDecision", "hasConviction", "imposedPunishment",
    "offenseCategory", "durationDays", "amountEUR", "fromDocument",
)

_CLASS_TYPES = {Vocab.RDFS_CLASS, Vocab.OWL_CLASS}
_PROPERTY_TYPES = {
    Vocab.RDF_PROPERTY: None,
    Vocab.OWL_ANNOTATION_PROPERTY: None,
    Vocab.OWL_OBJECT_PROPERTY: PropertyKind.OBJECT,
    Vocab.OWL_DATATYPE_PROPERTY: PropertyKind.DATATYPE,
}
_SILENT_TYPES = {Vocab.OWL_ONTOLOGY, Vocab.OWL_NAMED_INDIVIDUAL}
_KNOWN_PREDICATES = {
    Vocab.RDF_TYPE, Vocab.RDFS_SUBCLASS_OF, Vocab.RDFS_DOMAIN, Vocab.RDFS_RANGE,
    Vocab.RDFS_LABEL, Vocab.RDFS_COMMENT,
}


def _is_datatype(iri: Iri) -> bool:
    return iri.value.startswith(XSD) or iri == RDFS_LITERAL


def _text(graph: Graph, subject: Iri, predicate: Iri) -> Optional[str]:
    for value in graph.objects(subject, predicate):
        if isinstance(value, Literal):
            return value.lexical
    return None


def _iris(graph: Graph, subject: Iri, predicate: Iri) -> set[Iri]:
    return {o for o in graph.objects(subject, predicate) if isinstance(o, Iri)}


def _find_cycle(classes: dict[Iri, OntClass]) -> Optional[list[str]]:
    state: dict[Iri, int] = {}
    path: list[Iri] = []

    def visit(node: Iri) -> Optional[list[str]]:
        state[node] = 1
        path.append(node)
        for parent in sorted(classes[node].superclasses, key=lambda i: i.value):
            if parent not in classes:
                continue
            if state.get(parent) == 1:
                start = path.index(parent)
                return [c.value for c in path[start:]] + [parent.value]
            if parent not in state:
                found = visit(parent)
                if found:
                    return found
        path.pop()
        state[node] = 2
        return None

    for iri in sorted(classes, key=lambda i: i.value):
        if iri not in state:
            found = visit(iri)
            if found:
                return found
    return None


def load_ontology(turtle_text: str, source: Optional[str] = None) -> Ontology:
    """Reads class, property and individual declarations; anything else is ignored with a warning."""
    graph = parse_turtle(turtle_text, source).graph
    doc_prefixes = graph.prefixes
    warnings: list[str] = []
    declared: dict[Iri, set[Iri]] = {}
    for triple in graph.match(None, Vocab.RDF_TYPE, None):
        if isinstance(triple.subject, BlankNode) or not isinstance(triple.object, Iri):
            warnings.append(f"ignored anonymous or literal type declaration: {triple.subject} a {triple.object}")
            continue
        declared.setdefault(triple.subject, set()).add(triple.object)

    classes: dict[Iri, OntClass] = {}
    for iri, types in declared.items():
        if types & _CLASS_TYPES:
            superclasses = _iris(graph, iri, Vocab.RDFS_SUBCLASS_OF) - {Vocab.OWL_THING}
            classes[iri] = OntClass(
                iri=iri,
                label=_text(graph, iri, Vocab.RDFS_LABEL) or iri.local_name(),
                superclasses=superclasses,
                comment=_text(graph, iri, Vocab.RDFS_COMMENT),
            )
    for ont_class in list(classes.values()):
        for parent in ont_class.superclasses:
            if parent not in classes:
                warnings.append(f"superclass <{parent.value}> of <{ont_class.iri.value}> is not declared")
                classes[parent] = OntClass(iri=parent, label=parent.local_name())

    cycle = _find_cycle(classes)
    if cycle:
        raise CyclicHierarchy(cycle)

    properties: dict[Iri, OntProperty] = {}
    externals = set(BASE_EXTERNALS)
    for iri, types in declared.items():
        kinds = [_PROPERTY_TYPES[t] for t in types if t in _PROPERTY_TYPES]
        if not kinds:
            continue
        domains = _iris(graph, iri, Vocab.RDFS_DOMAIN)
        ranges = _iris(graph, iri, Vocab.RDFS_RANGE)
        if not domains and not ranges:
            externals.add(iri)
            continue
        kind = next((k for k in kinds if k is not None), None)
        if kind is None:
            kind = PropertyKind.DATATYPE if ranges and all(_is_datatype(r) for r in ranges) else PropertyKind.OBJECT
        properties[iri] = OntProperty(
            iri=iri,
            kind=kind,
            domains=domains,
            ranges=ranges,
            label=_text(graph, iri, Vocab.RDFS_LABEL) or iri.local_name(),
            comment=_text(graph, iri, Vocab.RDFS_COMMENT),
        )

    individuals: dict[Iri, Iri] = {}
    for iri, types in sorted(declared.items(), key=lambda item: item[0].value):
        class_types = sorted((t for t in types if t in classes), key=lambda t: t.value)
        if class_types:
            if len(class_types) > 1:
                warnings.append(f"individual <{iri.value}> has several classes; keeping <{class_types[0].value}>")
            individuals[iri] = class_types[0]
        elif not types & (_CLASS_TYPES | set(_PROPERTY_TYPES) | _SILENT_TYPES):
            warnings.append(f"ignored <{iri.value}>: no recognised declaration")

    for triple in graph.sorted_triples():
        if triple.predicate not in _KNOWN_PREDICATES:
            warnings.append(f"ignored statement with predicate <{triple.predicate.value}>")

    for warning in warnings:
        logger.warning("ontology_construct_ignored", detail=warning, source=source)
    return Ontology(
        classes=classes,
        properties=properties,
        individuals=individuals,
        prefixes=doc_prefixes,
        externals=externals,
        source=turtle_text,
        warnings=warnings,
    )


def load_ontology_file(path: Union[str, Path]) -> Ontology:
    path = Path(path)
    return load_ontology(path.read_text(encoding="utf-8"), source=str(path))


@lru_cache(maxsize=1)
def builtin_criminal_ontology() -> Ontology:
    return load_ontology_file(ONTOLOGY_PATH)


def _require_class(ontology: Ontology, iri: Iri) -> None:
    if iri != Vocab.OWL_THING and iri not in ontology.classes:
        raise UnknownClass(iri.value)


def is_subclass(ontology: Ontology, c1: Iri, c2: Iri) -> bool:
    """Reflexive-transitive rdfs:subClassOf; every class is below owl:Thing."""
    _require_class(ontology, c1)
    _require_class(ontology, c2)
    if c2 == Vocab.OWL_THING or c1 == c2:
        return True
    if c1 == Vocab.OWL_THING:
        return False
    return c2 in ontology.superclass_closure(c1)


def property_spec(ontology: Ontology, iri: Iri) -> Union[OntProperty, ExternalProperty, UnknownProperty]:
    found = ontology.properties.get(iri)
    if found is not None:
        return found
    if iri in ontology.externals:
        return ExternalProperty(iri=iri)
    return UnknownProperty(iri=iri)


def self_check(ontology: Ontology, rules_text: Optional[str] = None) -> list[str]:
    """Problems that would make validation or analytics unreliable; empty when healthy."""
    problems = []

    def known_class(iri: Iri) -> bool:
        return iri == Vocab.OWL_THING or iri in ontology.classes

    for iri, prop in sorted(ontology.properties.items(), key=lambda item: item[0].value):
        name = render_iri(iri, ontology.prefixes)
        if not prop.domains:
            problems.append(f"{name} has no rdfs:domain")
        if not prop.ranges:
            problems.append(f"{name} has no rdfs:range")
        for domain in sorted(prop.domains, key=lambda i: i.value):
            if not known_class(domain):
                problems.append(f"{name} domain <{domain.value}> is not a declared class")
        for range_ in sorted(prop.ranges, key=lambda i: i.value):
            if prop.kind == PropertyKind.DATATYPE and not _is_datatype(range_):
                problems.append(f"{name} is a datatype property but its range <{range_.value}> is not a datatype")
            if prop.kind == PropertyKind.OBJECT and not known_class(range_):
                problems.append(f"{name} is an object property but its range <{range_.value}> is not a declared class")
    for individual, cls in sorted(ontology.individuals.items(), key=lambda item: item[0].value):
        if cls not in ontology.classes:
            problems.append(f"individual <{individual.value}> has undeclared class <{cls.value}>")
    if Vocab.RDF_TYPE not in ontology.externals:
        problems.append("rdf:type is not whitelisted")
    if "fca" in ontology.prefixes and ontology.prefixes.namespace("fca").value == FCA:
        for local in REQUIRED_PROPERTIES:
            if fca(local) not in ontology.properties:
                problems.append(f"fca:{local} is required by the pipeline but not declared")
    if rules_text:
        vocabulary = set(ontology.classes) | set(ontology.properties) | set(ontology.individuals) | ontology.externals
        for label, local in sorted(set(re.findall(r"\b([a-z][a-z0-9]*):([A-Za-z][A-Za-z0-9_]*)", rules_text))):
            if label not in ontology.prefixes:
                continue
            iri = Iri(ontology.prefixes.namespace(label).value + local)
            if iri not in vocabulary and not _is_datatype(iri):
                problems.append(f"guidance rules mention {label}:{local}, which the ontology does not declare")
    return problems


def ontology_to_graph(ontology: Ontology, annotations: bool = True) -> Graph:
    """Declarations as triples; loading the serialization of this graph gives back the same vocabulary."""
    graph = Graph(prefixes=ontology.prefixes.copy())

    def annotate(iri: Iri, label: str, comment: Optional[str]) -> None:
        if not annotations:
            return
        graph.insert(Triple(iri, Vocab.RDFS_LABEL, Literal(label)))
        if comment:
            graph.insert(Triple(iri, Vocab.RDFS_COMMENT, Literal(comment)))

    for iri, ont_class in ontology.classes.items():
        graph.insert(Triple(iri, Vocab.RDF_TYPE, Vocab.OWL_CLASS))
        for parent in ont_class.superclasses:
            graph.insert(Triple(iri, Vocab.RDFS_SUBCLASS_OF, parent))
        annotate(iri, ont_class.label, ont_class.comment)
    for iri, prop in ontology.properties.items():
        kind = Vocab.OWL_DATATYPE_PROPERTY if prop.kind == PropertyKind.DATATYPE else Vocab.OWL_OBJECT_PROPERTY
        graph.insert(Triple(iri, Vocab.RDF_TYPE, kind))
        for domain in prop.domains:
            graph.insert(Triple(iri, Vocab.RDFS_DOMAIN, domain))
        for range_ in prop.ranges:
            graph.insert(Triple(iri, Vocab.RDFS_RANGE, range_))
        annotate(iri, prop.label, prop.comment)
    for iri in ontology.externals - BASE_EXTERNALS:
        graph.insert(Triple(iri, Vocab.RDF_TYPE, Vocab.RDF_PROPERTY))
    for iri, cls in ontology.individuals.items():
        graph.insert(Triple(iri, Vocab.RDF_TYPE, cls))
    return graph


def ontology_prompt_text(ontology: Ontology, granularity: str = "full") -> str:
    """`full` is the source file verbatim; `compact` drops labels and comments."""
    if granularity == "full" and ontology.source:
        return ontology.source
    annotations = granularity == "full"
    graph = ontology_to_graph(ontology, annotations=annotations)
    return serialize_turtle(TurtleDocument(graph, graph.prefixes))


def vocabulary_table(ontology: Ontology) -> list[VocabularyRow]:
    prefixes: PrefixMap = ontology.prefixes

    def show(iris) -> str:
        return ", ".join(sorted(render_iri(i, prefixes) for i in iris))

    rows = []
    for iri, ont_class in ontology.classes.items():
        rows.append(VocabularyRow(kind="class", term=render_iri(iri, prefixes), label=ont_class.label,
                                  domain=show(ont_class.superclasses)))
    for iri, prop in ontology.properties.items():
        rows.append(VocabularyRow(kind=f"{prop.kind.value} property", term=render_iri(iri, prefixes),
                                  label=prop.label, domain=show(prop.domains), range=show(prop.ranges)))
    for iri, cls in ontology.individuals.items():
        rows.append(VocabularyRow(kind="individual", term=render_iri(iri, prefixes), range=show([cls])))
    for iri in ontology.externals:
        rows.append(VocabularyRow(kind="external", term=render_iri(iri, prefixes)))
    order = {"class": 0, "object property": 1, "datatype property": 2, "individual": 3, "external": 4}
    return sorted(rows, key=lambda row: (order[row.kind], row.term))
