# file: models/analytics.py

from typing import Dict, List, Optional

from pydantic import BaseModel

from app.models.rdf import Term

# variable name -> bound term
Binding = Dict[str, Term]


class Histogram(BaseModel):
    bin_edges: List[float]
    counts: List[int]
    normalized: Optional[List[float]] = None

    @property
    def total(self) -> int:
        return sum(self.counts)


class GroupSummary(BaseModel):
    group: str
    n: int
    mean: float
    median: float
    q1: float
    q3: float
    min: float
    max: float


class GroupDistribution(BaseModel):
    histogram: Histogram
    summary: GroupSummary
    values: List[float] = []


class GroupedDistribution(BaseModel):
    value_predicate: str
    groups: Dict[str, GroupDistribution] = {}
    skipped: int = 0
    ks_statistic: Optional[float] = None
    compared: Optional[List[str]] = None
    warnings: List[str] = []


class TriplesPerDoc(BaseModel):
    counts: Dict[str, int]
    histogram: Histogram
    mean: float
    median: float


class PropertyGraphTables(BaseModel):
    node_columns: List[str]
    nodes: List[Dict[str, str]]
    edges: List[Dict[str, str]]
