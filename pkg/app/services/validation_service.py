# file: services/validation_service.py

import re
from datetime import date
from typing import Optional, Union

from app.models.ontology import ExternalProperty, Ontology, OntProperty, PropertyKind, UnknownProperty
from app.models.rdf import Iri, Literal, Subject, Term, Triple, Vocab
from app.models.validation import Rule, Severity, ValidationMode, ValidationReport, Violation
from app.services.graph_store import Graph
from app.services.ontology_service import RDFS_LITERAL, property_spec
from app.services.turtle_service import render_iri

_DATE = r"(?P<year>\d{4})-(?P<month>\d{2})-(?P<day>\d{2})"
_ZONE = r"(?:Z|[+-](?:0\d|1[0-3]):[0-5]\d|[+-]14:00)?"
_LEXICAL_SPACE = {
    Vocab.XSD_INTEGER: re.compile(r"^[+-]?\d+$"),
    Vocab.XSD_NON_NEGATIVE_INTEGER: re.compile(r"^\+?\d+$"),
    Vocab.XSD_DECIMAL: re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$"),
    Vocab.XSD_DOUBLE: re.compile(r"^(?:[+-]?(?:(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?|INF)|NaN)$"),
    Vocab.XSD_BOOLEAN: re.compile(r"^(?:true|false|1|0)$"),
    Vocab.XSD_DATE: re.compile(rf"^{_DATE}{_ZONE}$"),
    Vocab.XSD_DATE_TIME: re.compile(
        rf"^{_DATE}T(?P<hour>\d{{2}}):(?P<minute>\d{{2}}):(?P<second>\d{{2}})(?:\.\d+)?{_ZONE}$"
    ),
}
_STRING_TYPES = {Vocab.XSD_STRING, Vocab.RDF_LANG_STRING}


def _real_date(m: re.Match) -> bool:
    try:
        date(int(m.group("year")), int(m.group("month")), int(m.group("day")))
    except ValueError:
        return False
    return True


def validate_literal(lexical: str, datatype: Iri) -> Optional[Violation]:
    """None when `lexical` belongs to the lexical space of `datatype`."""
    if datatype in _STRING_TYPES:
        return None
    pattern = _LEXICAL_SPACE.get(datatype)
    if pattern is None:
        return Violation(
            rule=Rule.BAD_LITERAL,
            severity=Severity.WARNING,
            message=f"datatype <{datatype.value}> is not supported; {lexical!r} was not checked",
        )
    m = pattern.match(lexical.strip())
    ok = m is not None
    if ok and datatype == Vocab.XSD_DATE:
        ok = _real_date(m)
    if ok and datatype == Vocab.XSD_DATE_TIME:
        hour, minute, second = int(m.group("hour")), int(m.group("minute")), int(m.group("second"))
        ok = _real_date(m) and minute < 60 and second < 60 and (hour < 24 or (hour == 24 and minute == second == 0))
    if ok:
        return None
    return Violation(
        rule=Rule.BAD_LITERAL,
        message=f"{lexical!r} is not a valid xsd:{datatype.local_name()}",
    )


def _explicit_types(graph: Graph) -> dict[Subject, set[Iri]]:
    declared: dict[Subject, set[Iri]] = {}
    for triple in graph.match(None, Vocab.RDF_TYPE, None):
        if isinstance(triple.object, Iri):
            declared.setdefault(triple.subject, set()).add(triple.object)
    return declared


def _declared_classes(graph: Graph, ontology: Ontology) -> dict[Term, set[Iri]]:
    declared: dict[Term, set[Iri]] = dict(_explicit_types(graph))
    for individual, cls in ontology.individuals.items():
        declared[individual] = declared.get(individual, set()) | {cls}
    return declared


def _close(ontology: Ontology, classes) -> set[Iri]:
    closed: set[Iri] = set()
    for cls in classes:
        closed |= ontology.superclass_closure(cls)
    return closed


def infer_types(graph: Graph, ontology: Ontology, mode: Union[ValidationMode, str] = ValidationMode.LENIENT) -> dict:
    """Known classes per node, closed under superclasses; owl:Thing is left implicit.

    Explicit rdf:type assertions and ontology individuals always count. In lenient mode a node with
    no rdf:type also takes the domains and ranges of the properties it is used with.
    """
    mode = ValidationMode(mode)
    declared = _explicit_types(graph)
    types: dict[Term, set[Iri]] = {}
    for node, classes in declared.items():
        closed = _close(ontology, classes)
        if closed:
            types[node] = closed
    for individual, cls in ontology.individuals.items():
        if graph.has_node(individual):
            types.setdefault(individual, set()).update(ontology.superclass_closure(cls))

    if mode == ValidationMode.LENIENT:
        implied: dict[Term, set[Iri]] = {}
        for triple in graph.sorted_triples():
            prop = ontology.properties.get(triple.predicate)
            if prop is None:
                continue
            if triple.subject not in declared and triple.subject not in ontology.individuals:
                implied.setdefault(triple.subject, set()).update(_close(ontology, prop.domains))
            if (
                prop.kind == PropertyKind.OBJECT
                and not isinstance(triple.object, Literal)
                and triple.object not in declared
                and triple.object not in ontology.individuals
            ):
                implied.setdefault(triple.object, set()).update(_close(ontology, prop.ranges))
        for node, classes in implied.items():
            if classes:
                types[node] = classes
    return {node: classes for node, classes in types.items() if classes}


def _conforms(ontology: Ontology, classes: set[Iri], expected: set[Iri]) -> bool:
    """Every declared class the ontology knows must be compatible with `expected`."""
    if not expected or Vocab.OWL_THING in expected:
        return True
    allowed = _close(ontology, expected)
    for cls in classes:
        closure = ontology.superclass_closure(cls)
        if closure and not closure & allowed:
            return False
    return True


def _node(term: Term) -> str:
    return term.value if isinstance(term, Iri) else f"_:{term.label}"


def _show(ontology: Ontology, iris) -> str:
    return " or ".join(sorted(render_iri(i, ontology.prefixes) for i in iris))


def _check_datatype_object(triple: Triple, prop: OntProperty, ontology: Ontology) -> Optional[Violation]:
    obj = triple.object
    name = render_iri(prop.iri, ontology.prefixes)
    if not isinstance(obj, Literal):
        return Violation(
            rule=Rule.RANGE_MISMATCH,
            triple=triple,
            message=f"{name} expects a literal ({_show(ontology, prop.ranges)}), got {_node(obj)}",
        )
    ranges = prop.ranges
    if obj.datatype in ranges or RDFS_LITERAL in ranges:
        found = validate_literal(obj.lexical, obj.datatype)
        return found.model_copy(update={"triple": triple}) if found else None
    if obj.datatype in _STRING_TYPES and Vocab.XSD_STRING in ranges:
        return None
    if obj.datatype == Vocab.XSD_STRING:
        failures = [validate_literal(obj.lexical, r) for r in sorted(ranges, key=lambda i: i.value)]
        if any(f is None for f in failures):
            return None
        return Violation(
            rule=Rule.BAD_LITERAL,
            triple=triple,
            severity=Severity.ERROR if any(f.severity == Severity.ERROR for f in failures) else Severity.WARNING,
            message=f"{obj.lexical!r} is not a valid {_show(ontology, ranges)} value for {name}",
        )
    return Violation(
        rule=Rule.RANGE_MISMATCH,
        triple=triple,
        message=(
            f"{name} expects {_show(ontology, ranges)}, "
            f"got {obj.lexical!r} typed {render_iri(obj.datatype, ontology.prefixes)}"
        ),
    )


def _check_triple(triple: Triple, ontology: Ontology, declared: dict, mode: ValidationMode) -> list:
    found = []
    spec = property_spec(ontology, triple.predicate)
    if isinstance(spec, UnknownProperty):
        return [Violation(
            rule=Rule.UNKNOWN_PREDICATE,
            triple=triple,
            message=f"predicate <{triple.predicate.value}> is neither in the ontology nor whitelisted",
        )]
    if isinstance(spec, ExternalProperty):
        obj = triple.object
        if triple.predicate == Vocab.RDF_TYPE and isinstance(obj, Literal):
            found.append(Violation(
                rule=Rule.RANGE_MISMATCH,
                triple=triple,
                message=f"rdf:type needs a class, got literal {obj.lexical!r}",
            ))
        elif isinstance(obj, Literal):
            # unconstrained predicate, but a typed literal must still match its own datatype
            bad = validate_literal(obj.lexical, obj.datatype)
            if bad is not None and bad.severity == Severity.ERROR:
                found.append(bad.model_copy(update={"triple": triple}))
        return found

    name = render_iri(spec.iri, ontology.prefixes)
    subject_types = declared.get(triple.subject, set())
    if not _conforms(ontology, subject_types, spec.domains):
        found.append(Violation(
            rule=Rule.DOMAIN_MISMATCH,
            triple=triple,
            message=(
                f"subject {_node(triple.subject)} is {_show(ontology, subject_types)}, "
                f"but {name} applies to {_show(ontology, spec.domains)}"
            ),
        ))
    if spec.kind == PropertyKind.DATATYPE:
        checked = _check_datatype_object(triple, spec, ontology)
        if checked is not None:
            found.append(checked)
    elif isinstance(triple.object, Literal):
        found.append(Violation(
            rule=Rule.RANGE_MISMATCH,
            triple=triple,
            message=f"{name} expects a {_show(ontology, spec.ranges)} node, got literal {triple.object.lexical!r}",
        ))
    else:
        object_types = declared.get(triple.object, set())
        if not _conforms(ontology, object_types, spec.ranges):
            found.append(Violation(
                rule=Rule.RANGE_MISMATCH,
                triple=triple,
                message=(
                    f"object {_node(triple.object)} is {_show(ontology, object_types)}, "
                    f"but {name} expects {_show(ontology, spec.ranges)}"
                ),
            ))
    if mode == ValidationMode.STRICT and triple.subject not in declared:
        found.append(Violation(
            rule=Rule.UNTYPED_SUBJECT,
            triple=triple,
            message=f"subject {_node(triple.subject)} uses {name} but has no rdf:type",
        ))
    return found


def validate_graph(
    graph: Graph,
    ontology: Ontology,
    mode: Union[ValidationMode, str] = ValidationMode.LENIENT,
) -> ValidationReport:
    mode = ValidationMode(mode)
    declared = _declared_classes(graph, ontology)
    violations = []
    for triple in graph.sorted_triples():
        violations.extend(_check_triple(triple, ontology, declared, mode))
    violations.sort(key=Violation.sort_key)
    return ValidationReport(violations=violations, checked_triples=len(graph), mode=mode)
