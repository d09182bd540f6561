# file: models/ontology.py

from enum import Enum
from typing import Dict, List, Optional, Set

from pydantic import BaseModel, ConfigDict, InstanceOf, PrivateAttr

from app.models.rdf import Iri, PrefixMap


class PropertyKind(str, Enum):
    OBJECT = "object"
    DATATYPE = "datatype"


class OntClass(BaseModel):
    iri: InstanceOf[Iri]
    label: str
    superclasses: Set[InstanceOf[Iri]] = set()
    comment: Optional[str] = None

    model_config = ConfigDict(frozen=True)


class OntProperty(BaseModel):
    iri: InstanceOf[Iri]
    kind: PropertyKind
    domains: Set[InstanceOf[Iri]] = set()
    ranges: Set[InstanceOf[Iri]] = set()
    label: str
    comment: Optional[str] = None

    model_config = ConfigDict(frozen=True)


class ExternalProperty(BaseModel):
    """Whitelisted predicate from another vocabulary; no domain or range constraint."""

    iri: InstanceOf[Iri]


class UnknownProperty(BaseModel):
    iri: InstanceOf[Iri]


class Ontology(BaseModel):
    classes: Dict[InstanceOf[Iri], OntClass] = {}
    properties: Dict[InstanceOf[Iri], OntProperty] = {}
    individuals: Dict[InstanceOf[Iri], InstanceOf[Iri]] = {}
    prefixes: InstanceOf[PrefixMap]
    externals: Set[InstanceOf[Iri]] = set()
    source: str = ""
    warnings: List[str] = []

    _closures: dict = PrivateAttr(default_factory=dict)

    def superclass_closure(self, iri: Iri) -> frozenset:
        """`iri` and all its ancestors (owl:Thing excluded)."""
        cached = self._closures.get(iri)
        if cached is None:
            seen = set()
            stack = [iri]
            while stack:
                current = stack.pop()
                if current in seen:
                    continue
                seen.add(current)
                declared = self.classes.get(current)
                if declared is not None:
                    stack.extend(declared.superclasses)
            cached = frozenset(c for c in seen if c in self.classes)
            self._closures[iri] = cached
        return cached


class VocabularyRow(BaseModel):
    kind: str
    term: str
    label: str = ""
    domain: str = ""
    range: str = ""
