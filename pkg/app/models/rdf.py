# file: models/rdf.py

import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

from app.utils.errors import InvalidTerm, UnknownPrefix

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
OWL = "http://www.w3.org/2002/07/owl#"
XSD = "http://www.w3.org/2001/XMLSchema#"
FOAF = "http://xmlns.com/foaf/0.1/"
SCHEMA = "https://schema.org/"
FCA = "https://growgraph.dev/fcaont#"

_IRI_FORBIDDEN = re.compile(r"[\s\x00-\x20<>\"{}|^`\\]")
_SCHEME = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*:")
_BLANK_LABEL = re.compile(r"^[A-Za-z0-9_]+$")
_LANG_TAG = re.compile(r"^[A-Za-z]+(-[A-Za-z0-9]+)*$")


@dataclass(frozen=True, slots=True)
class Iri:
    value: str

    def __post_init__(self):
        if not self.value or not _SCHEME.match(self.value) or _IRI_FORBIDDEN.search(self.value):
            raise InvalidTerm(f"Invalid IRI {self.value!r}")

    def local_name(self) -> str:
        for sep in ("#", "/", ":"):
            head, found, tail = self.value.rpartition(sep)
            if found and tail:
                return tail
        return self.value

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class BlankNode:
    label: str

    def __post_init__(self):
        if not _BLANK_LABEL.match(self.label):
            raise InvalidTerm(f"Invalid blank node label {self.label!r}")

    def __str__(self) -> str:
        return f"_:{self.label}"


XSD_STRING = Iri(XSD + "string")
RDF_LANG_STRING = Iri(RDF + "langString")


@dataclass(frozen=True, slots=True)
class Literal:
    lexical: str
    datatype: Optional[Iri] = None
    language: Optional[str] = None

    def __post_init__(self):
        if self.language is not None:
            if not _LANG_TAG.match(self.language):
                raise InvalidTerm(f"Invalid language tag {self.language!r}")
            if self.datatype is None:
                object.__setattr__(self, "datatype", RDF_LANG_STRING)
            elif self.datatype != RDF_LANG_STRING:
                raise InvalidTerm("A language-tagged literal must have datatype rdf:langString")
        elif self.datatype is None:
            object.__setattr__(self, "datatype", XSD_STRING)
        elif self.datatype == RDF_LANG_STRING:
            raise InvalidTerm("rdf:langString literal without a language tag")

    def __str__(self) -> str:
        return self.lexical


Term = Union[Iri, BlankNode, Literal]
Subject = Union[Iri, BlankNode]


@dataclass(frozen=True, slots=True)
class Triple:
    subject: Subject
    predicate: Iri
    object: Term

    def __post_init__(self):
        if not isinstance(self.subject, (Iri, BlankNode)):
            raise InvalidTerm("Triple subject must be an IRI or a blank node")
        if not isinstance(self.predicate, Iri):
            raise InvalidTerm("Triple predicate must be an IRI")
        if not isinstance(self.object, (Iri, BlankNode, Literal)):
            raise InvalidTerm("Triple object must be an RDF term")


class PrefixMap:
    """Prefix label -> namespace. Rebinding a label replaces its namespace."""

    def __init__(self, entries: Optional[dict[str, Union[str, Iri]]] = None):
        self._entries: dict[str, Iri] = {}
        for label, namespace in (entries or {}).items():
            self.bind(label, namespace)

    def bind(self, label: str, namespace: Union[str, Iri]) -> None:
        self._entries[label] = namespace if isinstance(namespace, Iri) else Iri(namespace)

    def namespace(self, label: str) -> Iri:
        try:
            return self._entries[label]
        except KeyError:
            raise UnknownPrefix(label) from None

    def expand(self, qname: str) -> Iri:
        label, sep, local = qname.partition(":")
        if not sep:
            raise InvalidTerm(f"{qname!r} is not a prefixed name")
        return Iri(self.namespace(label).value + local)

    def compact(self, iri: Iri) -> Optional[tuple[str, str]]:
        """Longest namespace covering `iri`, as (label, local); None when no prefix applies."""
        best: Optional[tuple[str, str]] = None
        best_len = -1
        for label, namespace in sorted(self._entries.items()):
            ns = namespace.value
            if iri.value.startswith(ns) and len(ns) > best_len:
                best = (label, iri.value[len(ns):])
                best_len = len(ns)
        return best

    def update(self, other: "PrefixMap") -> None:
        for label, namespace in other.items():
            self._entries.setdefault(label, namespace)

    def copy(self) -> "PrefixMap":
        return PrefixMap(dict(self._entries))

    def items(self) -> list[tuple[str, Iri]]:
        return sorted(self._entries.items())

    def __contains__(self, label: object) -> bool:
        return label in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._entries))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PrefixMap) and self._entries == other._entries

    def __repr__(self) -> str:
        return f"PrefixMap({ {k: v.value for k, v in self.items()} })"


def default_prefixes() -> PrefixMap:
    return PrefixMap({
        "rdf": RDF,
        "rdfs": RDFS,
        "owl": OWL,
        "xsd": XSD,
        "foaf": FOAF,
        "schema": SCHEMA,
        "fca": FCA,
    })


@dataclass(frozen=True, slots=True)
class Variable:
    """Query variable (`?name`) used by triple patterns."""

    name: str

    def __post_init__(self):
        if not re.match(r"^[a-z][a-z0-9_]*$", self.name):
            raise InvalidTerm(f"Invalid variable name {self.name!r}")

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True, slots=True)
class TriplePattern:
    subject: Union[Term, Variable]
    predicate: Union[Iri, Variable]
    object: Union[Term, Variable]

    def variables(self) -> list[str]:
        seen = []
        for position in (self.subject, self.predicate, self.object):
            if isinstance(position, Variable) and position.name not in seen:
                seen.append(position.name)
        return seen


class Vocab:
    """Frequently used vocabulary terms."""

    RDF_TYPE = Iri(RDF + "type")
    RDF_FIRST = Iri(RDF + "first")
    RDF_REST = Iri(RDF + "rest")
    RDF_NIL = Iri(RDF + "nil")
    RDF_PROPERTY = Iri(RDF + "Property")
    RDFS_CLASS = Iri(RDFS + "Class")
    RDFS_SUBCLASS_OF = Iri(RDFS + "subClassOf")
    RDFS_DOMAIN = Iri(RDFS + "domain")
    RDFS_RANGE = Iri(RDFS + "range")
    RDFS_LABEL = Iri(RDFS + "label")
    RDFS_COMMENT = Iri(RDFS + "comment")
    OWL_CLASS = Iri(OWL + "Class")
    OWL_THING = Iri(OWL + "Thing")
    OWL_ONTOLOGY = Iri(OWL + "Ontology")
    OWL_OBJECT_PROPERTY = Iri(OWL + "ObjectProperty")
    OWL_DATATYPE_PROPERTY = Iri(OWL + "DatatypeProperty")
    OWL_ANNOTATION_PROPERTY = Iri(OWL + "AnnotationProperty")
    OWL_NAMED_INDIVIDUAL = Iri(OWL + "NamedIndividual")
    XSD_STRING = XSD_STRING
    XSD_INTEGER = Iri(XSD + "integer")
    XSD_NON_NEGATIVE_INTEGER = Iri(XSD + "nonNegativeInteger")
    XSD_DECIMAL = Iri(XSD + "decimal")
    XSD_DOUBLE = Iri(XSD + "double")
    XSD_BOOLEAN = Iri(XSD + "boolean")
    XSD_DATE = Iri(XSD + "date")
    XSD_DATE_TIME = Iri(XSD + "dateTime")
    RDF_LANG_STRING = RDF_LANG_STRING
    FOAF_NAME = Iri(FOAF + "name")
    SCHEMA_NAME = Iri(SCHEMA + "name")
    SCHEMA_DATE = Iri(SCHEMA + "date")


def fca(local: str) -> Iri:
    return Iri(FCA + local)

