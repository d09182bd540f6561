import importlib.util
import json
import math
from decimal import Decimal
from pathlib import Path
from unittest.mock import AsyncMock

import httpx
import pytest
from pydantic import ValidationError

from app.models.rdf import (
    FCA,
    XSD,
    BlankNode,
    Iri,
    Literal,
    PrefixMap,
    Triple,
    Vocab,
    default_prefixes,
    fca,
)
from app.utils.errors import (
    BackendError,
    CyclicHierarchy,
    DuplicateId,
    EmptyCorpus,
    EmptyInput,
    EmptyResponse,
    EmptySample,
    InvalidTerm,
    InvalidTransition,
    MalformedRecord,
    ParseError,
    StateFingerprintMismatch,
    UnknownClass,
    UnknownPredicate,
    UnknownPrefix,
)

FIXTURES = Path(__file__).parent / "fixtures"
ROOT = Path(__file__).parent.parent
GOOD_TTL = (FIXTURES / "good.ttl").read_text(encoding="utf-8")

PREFIXES = """@prefix rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#> .
@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .
@prefix fca: <https://growgraph.dev/fcaont#> .
"""


def ex(local: str) -> Iri:
    return Iri(f"http://example.org/{local}")


# === Test Fixtures ===
@pytest.fixture
def ontology():
    from app.services.ontology_service import builtin_criminal_ontology
    return builtin_criminal_ontology()


@pytest.fixture
def small_graph():
    from app.services.graph_store import Graph
    return Graph([
        Triple(ex("a"), ex("knows"), ex("b")),
        Triple(ex("b"), ex("knows"), ex("c")),
        Triple(ex("a"), ex("name"), Literal("Alice")),
        Triple(BlankNode("x"), ex("knows"), ex("a")),
    ])


###############################################################
# 1. Unit Tests for `app/models/rdf.py`
###############################################################

def test_utc_001_iri_requires_scheme_and_no_spaces():
    assert Iri("https://growgraph.dev/fcaont#Case").local_name() == "Case"
    with pytest.raises(InvalidTerm):
        Iri("relative/path")
    with pytest.raises(InvalidTerm):
        Iri("http://example.org/has space")


def test_utc_002_literal_default_and_language_datatypes():
    assert Literal("abc").datatype == Vocab.XSD_STRING
    tagged = Literal("bonjour", language="fr-BE")
    assert tagged.datatype == Vocab.RDF_LANG_STRING
    with pytest.raises(InvalidTerm):
        Literal("x", language="not a tag")
    with pytest.raises(InvalidTerm):
        Literal("x", datatype=Vocab.RDF_LANG_STRING)


def test_utc_003_blank_node_label_charset():
    assert str(BlankNode("crime1")) == "_:crime1"
    with pytest.raises(InvalidTerm):
        BlankNode("crime-1")


def test_utc_004_prefix_map_expand_and_compact():
    prefixes = default_prefixes()
    assert prefixes.expand("fca:Case") == fca("Case")
    assert prefixes.compact(Iri(XSD + "date")) == ("xsd", "date")
    with pytest.raises(UnknownPrefix):
        prefixes.expand("ex:thing")
    prefixes.bind("ex", "http://example.org/")
    assert prefixes.expand("ex:thing") == ex("thing")


def test_utc_005_triple_rejects_literal_subject():
    with pytest.raises(InvalidTerm):
        Triple(Literal("x"), ex("p"), ex("o"))


@pytest.mark.parametrize("char", ["|", '"', "{", "}", "^", "`", "\\", "\x00", "\x1f", "<", ">", "\t"])
def test_utc_078_iri_rejects_characters_turtle_cannot_write(char):
    with pytest.raises(InvalidTerm):
        Iri(f"urn:a{char}b")


###############################################################
# 2. Unit Tests for `app/services/graph_store.py`
###############################################################
from app.services.graph_store import (
    BlankNodeAllocator,
    Graph,
    canonical_ntriple,
    canonical_term,
    expand_qname,
    graph_insert,
    graph_match,
    isomorphic,
    relabel_blank_nodes,
)


def test_utc_006_insert_is_idempotent(small_graph):
    triple = Triple(ex("a"), ex("knows"), ex("b"))
    assert graph_insert(small_graph, triple) is False
    assert len(small_graph) == 4
    assert small_graph.index_sizes() == (4, 4, 4)


def test_utc_007_match_uses_bound_positions_in_canonical_order(small_graph):
    found = graph_match(small_graph, None, ex("knows"), None)
    assert [canonical_ntriple(t) for t in found] == sorted(canonical_ntriple(t) for t in found)
    assert len(found) == 3
    assert graph_match(small_graph, ex("a"), None, None) == small_graph.match(ex("a"))
    assert small_graph.match(ex("zzz")) == []


def test_utc_008_remove_keeps_indexes_consistent(small_graph):
    triple = Triple(ex("a"), ex("name"), Literal("Alice"))
    assert small_graph.remove(triple) is True
    assert small_graph.remove(triple) is False
    assert small_graph.index_sizes() == (3, 3, 3)
    assert small_graph.objects(ex("a"), ex("name")) == []


def test_utc_009_canonical_term_escapes_literals():
    assert canonical_term(Literal('say "hi"\n')) == '"say \\"hi\\"\\n"'
    assert canonical_term(Literal("5", Vocab.XSD_INTEGER)) == f'"5"^^<{XSD}integer>'
    assert canonical_term(Literal("chat", language="fr")) == '"chat"@fr'
    assert canonical_ntriple(Triple(Iri("urn:a"), Iri("urn:b"), Literal("x"))) == '<urn:a> <urn:b> "x" .'
    assert canonical_ntriple(Triple(Iri("urn:a"), Iri("urn:b"), Literal("30", Vocab.XSD_NON_NEGATIVE_INTEGER))) == (
        f'<urn:a> <urn:b> "30"^^<{XSD}nonNegativeInteger> .'
    )


def test_utc_009b_expand_qname():
    assert expand_qname(default_prefixes(), "fca:Crime") == fca("Crime")
    assert expand_qname(PrefixMap({"x": "urn:a:"}), "x:") == Iri("urn:a:")
    with pytest.raises(UnknownPrefix):
        expand_qname(PrefixMap(), "fca:Crime")


def test_utc_010_relabel_blank_nodes_is_deterministic(small_graph):
    allocator = BlankNodeAllocator()
    first = relabel_blank_nodes(small_graph, allocator)
    second = relabel_blank_nodes(small_graph, allocator)
    assert BlankNode("b0") in first.subjects()
    assert BlankNode("b1") in second.subjects()
    assert isomorphic(first, second)
    assert first != second


def test_utc_011_isomorphic_detects_structure_change():
    a = Graph([Triple(BlankNode("p"), ex("knows"), BlankNode("q")), Triple(BlankNode("q"), ex("knows"), ex("z"))])
    b = Graph([Triple(BlankNode("m"), ex("knows"), BlankNode("n")), Triple(BlankNode("n"), ex("knows"), ex("z"))])
    c = Graph([Triple(BlankNode("m"), ex("knows"), BlankNode("n")), Triple(BlankNode("m"), ex("knows"), ex("z"))])
    assert isomorphic(a, b)
    assert not isomorphic(a, c)


###############################################################
# 3. Unit Tests for `app/services/turtle_service.py`
###############################################################
from app.services.turtle_service import (
    parse_ntriples,
    parse_triple_patterns,
    parse_turtle,
    render_iri,
    serialize_ntriples,
    serialize_turtle,
)


def test_utc_012_parse_turtle_shorthand():
    doc = parse_turtle(PREFIXES + """
_:case a fca:Case ;
    fca:hasCrime _:crime1 , _:crime2 .
_:crime1 fca:description "vol"@fr ; fca:crimeDate "2020-01-02"^^xsd:date .
_:p fca:durationDays 30 .
""")
    graph = doc.graph
    assert len(graph) == 6
    assert Triple(BlankNode("case"), Vocab.RDF_TYPE, fca("Case")) in graph
    assert graph.objects(BlankNode("p"), fca("durationDays")) == [Literal("30", Vocab.XSD_INTEGER)]
    assert doc.prefixes.namespace("fca") == Iri(FCA)


def test_utc_013_parse_error_reports_line_and_column():
    with pytest.raises(ParseError) as info:
        parse_turtle(PREFIXES + "_:case a fca:Case\n_:appeal a fca:Appeal .\n", source="doc.ttl")
    error = info.value
    assert error.line == 5
    assert error.column == 1
    assert str(error).startswith("doc.ttl:5:1:")


def test_utc_014_unknown_prefix_and_relative_iri_are_errors():
    with pytest.raises(ParseError, match="unknown prefix"):
        parse_turtle("ex:a ex:b ex:c .")
    with pytest.raises(ParseError, match="without @base"):
        parse_turtle("<a> <http://example.org/p> <b> .")
    doc = parse_turtle("@base <http://example.org/> .\n<a> <p> <b> .")
    assert Triple(ex("a"), ex("p"), ex("b")) in doc.graph


def test_utc_015_invalid_blank_labels_map_consistently():
    doc = parse_turtle(PREFIXES + "_:crime-1 a fca:Crime .\n_:case fca:hasCrime _:crime-1 .\n")
    crimes = doc.graph.match(None, Vocab.RDF_TYPE, fca("Crime"))
    assert len(crimes) == 1
    node = crimes[0].subject
    assert doc.graph.match(BlankNode("case"), fca("hasCrime"), node)


def test_utc_016_collections_and_string_escapes():
    doc = parse_turtle('<http://example.org/s> <http://example.org/p> ( "a\\tb" "\\u00e9" ) .')
    firsts = sorted(t.object.lexical for t in doc.graph.match(None, Vocab.RDF_FIRST, None))
    assert firsts == ["a\tb", "é"]
    assert len(doc.graph.match(None, Vocab.RDF_REST, Vocab.RDF_NIL)) == 1


def test_utc_017_ntriples_one_triple_per_line():
    graph = parse_ntriples('<http://example.org/a> <http://example.org/p> "x"@en .\n_:b <http://example.org/p> <http://example.org/a> .\n')
    assert len(graph) == 2
    with pytest.raises(ParseError, match="missing final"):
        parse_ntriples("<http://example.org/a> <http://example.org/p> <http://example.org/b>\n")


def test_utc_018_serialize_ntriples_is_sorted_and_reparses(small_graph):
    text = serialize_ntriples(small_graph)
    lines = text.splitlines()
    assert lines == sorted(lines)
    assert text.endswith(" .\n")
    assert parse_ntriples(text) == small_graph


def test_utc_019_serialize_turtle_round_trip():
    doc = parse_turtle(GOOD_TTL)
    text = serialize_turtle(doc)
    assert text.startswith("@prefix fca: <https://growgraph.dev/fcaont#> .")
    assert parse_turtle(text).graph == doc.graph
    assert serialize_turtle(Graph()) == ""


def test_utc_020_render_iri_prefers_qnames():
    prefixes = default_prefixes()
    assert render_iri(fca("hasAppeal"), prefixes) == "fca:hasAppeal"
    assert render_iri(ex("no/prefix"), prefixes) == "<http://example.org/no/prefix>"


def test_utc_021_triple_patterns_use_default_prefixes():
    patterns = parse_triple_patterns("?crime fca:offenseCategory ?category .\n?crime a fca:Crime .")
    assert len(patterns) == 2
    assert patterns[0].variables() == ["crime", "category"]
    assert patterns[1].predicate == Vocab.RDF_TYPE
    with pytest.raises(ParseError, match="variables are not allowed"):
        parse_turtle("?x <http://example.org/p> <http://example.org/o> .")


def test_utc_079_unusual_iri_characters_round_trip():
    iri = Iri("urn:a~b%20c(d)!$&'*+,;=é")
    graph = Graph([Triple(iri, ex("p"), Literal("x"))])
    assert parse_ntriples(serialize_ntriples(graph)) == graph
    assert parse_turtle(serialize_turtle(graph)).graph == graph


def test_utc_080_deep_nesting_is_a_parse_error():
    for opening, closing in (("(", ")"), ("[ <urn:p> ", "]")):
        text = "<urn:s> <urn:p> " + opening * 5000 + closing * 5000 + " ."
        with pytest.raises(ParseError, match="nested"):
            parse_turtle(text)
    shallow = "<urn:s> <urn:p> " + "[ <urn:p> " * 100 + "<urn:o>" + " ]" * 100 + " ."
    assert len(parse_turtle(shallow).graph) == 101


###############################################################
# 4. Unit Tests for `app/services/ontology_service.py`
###############################################################
from app.models.ontology import ExternalProperty, OntProperty, PropertyKind, UnknownProperty
from app.services.generation_service import RULES_PATH
from app.services.ontology_service import (
    is_subclass,
    load_ontology,
    ontology_prompt_text,
    ontology_to_graph,
    property_spec,
    self_check,
    vocabulary_table,
)


def test_utc_022_builtin_ontology_contents(ontology):
    assert len(ontology.classes) == 14
    assert ontology.individuals[fca("Rejected")] == fca("AppealDecision")
    assert fca("ViolentOffense") in ontology.individuals
    assert {Vocab.RDF_TYPE, Vocab.FOAF_NAME, Vocab.SCHEMA_DATE} <= ontology.externals
    assert ontology.warnings == []


def test_utc_023_is_subclass_is_reflexive_and_transitive(ontology):
    assert is_subclass(ontology, fca("Convict"), fca("Person"))
    assert is_subclass(ontology, fca("Person"), fca("Person"))
    assert not is_subclass(ontology, fca("Person"), fca("Convict"))
    assert not is_subclass(ontology, fca("Person"), fca("Crime"))
    assert is_subclass(ontology, fca("CustodialPunishment"), fca("Punishment"))
    assert is_subclass(ontology, fca("Crime"), Vocab.OWL_THING)
    with pytest.raises(UnknownClass):
        is_subclass(ontology, fca("Judge"), fca("Person"))


def test_utc_024_cyclic_hierarchy_is_rejected():
    text = PREFIXES + """@prefix owl: <http://www.w3.org/2002/07/owl#> .
@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .
fca:A a owl:Class ; rdfs:subClassOf fca:B .
fca:B a owl:Class ; rdfs:subClassOf fca:A .
"""
    with pytest.raises(CyclicHierarchy):
        load_ontology(text)


def test_utc_025_property_spec_kinds(ontology):
    duration = property_spec(ontology, fca("durationDays"))
    assert isinstance(duration, OntProperty)
    assert duration.kind == PropertyKind.DATATYPE
    assert duration.ranges == {Vocab.XSD_NON_NEGATIVE_INTEGER}
    assert isinstance(property_spec(ontology, Vocab.SCHEMA_NAME), ExternalProperty)
    assert isinstance(property_spec(ontology, fca("hasJudge")), UnknownProperty)


def test_utc_026_self_check_of_shipped_files_is_clean(ontology):
    assert self_check(ontology, RULES_PATH.read_text(encoding="utf-8")) == []


def test_utc_027_self_check_reports_problems():
    text = PREFIXES + """@prefix owl: <http://www.w3.org/2002/07/owl#> .
@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .
fca:Case a owl:Class .
fca:hasJudge a owl:ObjectProperty ; rdfs:domain fca:Case .
fca:weight a owl:DatatypeProperty ; rdfs:domain fca:Case ; rdfs:range fca:Case .
"""
    problems = self_check(load_ontology(text), "Attach every fca:Judge to the case.")
    assert "fca:hasJudge has no rdfs:range" in problems
    assert any("fca:weight is a datatype property" in p for p in problems)
    assert any("fca:Judge" in p for p in problems)


def test_utc_028_ontology_graph_round_trip(ontology):
    reloaded = load_ontology(serialize_turtle(ontology_to_graph(ontology)))
    assert set(reloaded.classes) == set(ontology.classes)
    assert reloaded.properties == ontology.properties
    assert reloaded.individuals == ontology.individuals
    assert reloaded.externals == ontology.externals


def test_utc_029_compact_prompt_is_smaller(ontology):
    full = ontology_prompt_text(ontology, "full")
    compact = ontology_prompt_text(ontology, "compact")
    assert full == ontology.source
    assert len(compact) < len(full)
    assert "rdfs:label" not in compact
    assert "fca:durationDays" in compact


def test_utc_030_vocabulary_table_order(ontology):
    rows = vocabulary_table(ontology)
    kinds = [row.kind for row in rows]
    assert kinds[0] == "class"
    assert kinds[-1] == "external"
    convict = next(row for row in rows if row.term == "fca:Convict")
    assert convict.domain == "fca:Person"


###############################################################
# 5. Unit Tests for `app/services/validation_service.py`
###############################################################
from app.models.validation import Rule, Severity, ValidationMode
from app.services.validation_service import infer_types, validate_graph, validate_literal


@pytest.mark.parametrize("lexical, datatype, ok", [
    ("2024-02-29", Vocab.XSD_DATE, True),
    ("2023-02-29", Vocab.XSD_DATE, False),
    ("2021-13-01", Vocab.XSD_DATE, False),
    ("12.50", Vocab.XSD_DECIMAL, True),
    ("12,50", Vocab.XSD_DECIMAL, False),
    ("1e3", Vocab.XSD_DECIMAL, False),
    ("true", Vocab.XSD_BOOLEAN, True),
    ("yes", Vocab.XSD_BOOLEAN, False),
    ("0", Vocab.XSD_NON_NEGATIVE_INTEGER, True),
    ("-5", Vocab.XSD_NON_NEGATIVE_INTEGER, False),
    ("-5", Vocab.XSD_INTEGER, True),
    ("2021-03-16T24:00:00", Vocab.XSD_DATE_TIME, True),
    ("2021-03-16T24:30:00", Vocab.XSD_DATE_TIME, False),
    ("1.5E-3", Vocab.XSD_DOUBLE, True),
    ("anything", Vocab.XSD_STRING, True),
])
def test_utc_031_validate_literal_lexical_spaces(lexical, datatype, ok):
    assert (validate_literal(lexical, datatype) is None) is ok


def test_utc_032_unsupported_datatype_is_only_a_warning():
    found = validate_literal("P1D", Iri(XSD + "duration"))
    assert found.rule == Rule.BAD_LITERAL
    assert found.severity == Severity.WARNING


def test_utc_033_clean_fixture_has_no_violations(ontology):
    graph = parse_turtle(GOOD_TTL).graph
    assert len(graph) == 20
    for mode in (ValidationMode.STRICT, ValidationMode.LENIENT):
        report = validate_graph(graph, ontology, mode)
        assert report.violations == []
        assert report.is_valid
        assert report.checked_triples == 20


RDFS_COMMENT = "<http://www.w3.org/2000/01/rdf-schema#comment>"

SEEDED_FAULTS = [
    ("negative_duration", lambda t: t.replace('"730"', '"-5"'), Rule.BAD_LITERAL),
    ("non_leap_day", lambda t: t.replace('"2019-07-02"', '"2023-02-29"'), Rule.BAD_LITERAL),
    ("unknown_predicate", lambda t: t + "_:crime fca:hasJudge _:place .\n", Rule.UNKNOWN_PREDICATE),
    ("court_as_crime_location", lambda t: t + "_:court a fca:Court ; fca:crimeLocation _:place .\n",
     Rule.DOMAIN_MISMATCH),
    ("wrong_range_object", lambda t: t.replace("fca:offenseCategory fca:ViolentOffense",
                                               "fca:offenseCategory fca:Rejected"), Rule.RANGE_MISMATCH),
    ("untyped_subject", lambda t: t + '_:crime2 fca:description "theft of a bicycle" .\n', Rule.UNTYPED_SUBJECT),
    ("bad_decimal", lambda t: t + '_:fine a fca:MonetaryPunishment ; fca:amountEUR "12,50"^^xsd:decimal .\n',
     Rule.BAD_LITERAL),
    ("bad_boolean", lambda t: t + f'_:appeal {RDFS_COMMENT} "maybe"^^xsd:boolean .\n', Rule.BAD_LITERAL),
]


@pytest.mark.parametrize("name, seed, rule", SEEDED_FAULTS, ids=[fault[0] for fault in SEEDED_FAULTS])
def test_utc_034_each_seeded_fault_yields_exactly_its_violation(ontology, name, seed, rule):
    seeded = seed(GOOD_TTL)
    assert seeded != GOOD_TTL
    report = validate_graph(parse_turtle(seeded).graph, ontology, ValidationMode.STRICT)
    assert [v.rule for v in report.violations] == [rule]
    assert not report.is_valid


def test_utc_035_lenient_mode_infers_types_from_usage(ontology):
    graph = parse_turtle(PREFIXES + '_:p fca:durationDays "30"^^xsd:nonNegativeInteger .\n').graph
    assert infer_types(graph, ontology, ValidationMode.LENIENT)[BlankNode("p")] >= {fca("CustodialPunishment")}
    assert validate_graph(graph, ontology, ValidationMode.LENIENT).violations == []
    strict = validate_graph(graph, ontology, ValidationMode.STRICT)
    assert [v.rule for v in strict.violations] == [Rule.UNTYPED_SUBJECT]


def test_utc_036_domain_checked_against_explicit_type(ontology):
    graph = parse_turtle(PREFIXES + '_:p a fca:MonetaryPunishment ; fca:durationDays "30"^^xsd:nonNegativeInteger .\n').graph
    report = validate_graph(graph, ontology)
    assert [v.rule for v in report.violations] == [Rule.DOMAIN_MISMATCH]
    assert "fca:durationDays applies to fca:CustodialPunishment" in report.violations[0].message


def test_utc_037_plain_and_mistyped_literals_on_datatype_properties(ontology):
    base = PREFIXES + "_:p a fca:CustodialPunishment ; fca:durationDays {value} .\n"
    plain_ok = validate_graph(parse_turtle(base.format(value='"30"')).graph, ontology)
    plain_bad = validate_graph(parse_turtle(base.format(value='"thirty"')).graph, ontology)
    mistyped = validate_graph(parse_turtle(base.format(value='"30"^^xsd:integer')).graph, ontology)
    as_node = validate_graph(parse_turtle(base.format(value="_:thirty")).graph, ontology)
    assert plain_ok.violations == []
    assert [v.rule for v in plain_bad.violations] == [Rule.BAD_LITERAL]
    assert [v.rule for v in mistyped.violations] == [Rule.RANGE_MISMATCH]
    assert [v.rule for v in as_node.violations] == [Rule.RANGE_MISMATCH]


def test_utc_038_report_text_and_json(ontology):
    bad = (FIXTURES / "bad.ttl").read_text(encoding="utf-8")
    report = validate_graph(parse_turtle(bad).graph, ontology)
    text = report.to_text()
    assert text.startswith("BadLiteral at _:punishment <https://growgraph.dev/fcaont#durationDays>")
    body = json.loads(report.to_json())
    assert body["valid"] is False
    assert body["violations"][0]["rule"] == "BadLiteral"


def test_utc_086_extra_types_never_clear_a_mismatch(ontology):
    court = PREFIXES + "_:court a fca:Court ; fca:crimeLocation _:place .\n_:place a fca:Location .\n"
    for text in (court, court + "_:court a fca:Crime .\n"):
        report = validate_graph(parse_turtle(text).graph, ontology)
        assert [v.rule for v in report.violations] == [Rule.DOMAIN_MISMATCH]
    retyped = PREFIXES + "_:k a fca:Crime ; fca:offenseCategory fca:Rejected .\nfca:Rejected a fca:OffenseCategory .\n"
    report = validate_graph(parse_turtle(retyped).graph, ontology)
    assert [v.rule for v in report.violations] == [Rule.RANGE_MISMATCH]


###############################################################
# 6. Unit Tests for `app/services/generation_service.py`
###############################################################
from app.models.corpus import DocumentRecord
from app.models.extraction import (
    BackendReply,
    CostRecord,
    ExtractionConfig,
    ExtractionStatus,
    GuidanceRules,
    PriceTable,
    Prompt,
)
from app.services.generation_service import (
    assemble_prompt,
    cost_of,
    estimate_cost,
    load_guidance_rules,
    repair_prompt,
    run_extraction,
    split_response,
)

VALID_REPLY = (FIXTURES / "mock_responses" / "d01.attempt1.txt").read_text(encoding="utf-8")
MALFORMED_REPLY = (FIXTURES / "mock_responses" / "d09.attempt1.txt").read_text(encoding="utf-8")


def _reply(text: str) -> BackendReply:
    return BackendReply(text=text, input_tokens=1000, output_tokens=200)


def test_utc_039_guidance_rules_skip_blanks_and_comments():
    rules = GuidanceRules.from_text("# heading\nFirst rule.\n\n  Second rule.  \n")
    assert rules.rules == ["First rule.", "Second rule."]
    assert rules.to_text() == "1. First rule.\n2. Second rule."
    assert len(load_guidance_rules().rules) == 10


def test_utc_040_prompt_sections_in_fixed_order():
    rules = GuidanceRules(rules=["Use blank nodes."])
    prompt = assemble_prompt("fca:Case a owl:Class .", rules, "Le pourvoi est rejeté.")
    positions = [prompt.user.index(f"=== {name} ===") for name in ("ONTOLOGY", "RULES", "DOCUMENT", "OUTPUT INSTRUCTIONS")]
    assert positions == sorted(positions)
    assert "Le pourvoi est rejeté." in prompt.user
    assert prompt.token_estimate == math.ceil((len(prompt.system) + len(prompt.user)) / 4)


def test_utc_041_prompt_refuses_empty_sections():
    rules = GuidanceRules(rules=["Use blank nodes."])
    with pytest.raises(EmptyInput) as info:
        assemble_prompt("fca:Case a owl:Class .", rules, "   ")
    assert info.value.section == "DOCUMENT"
    with pytest.raises(EmptyInput):
        assemble_prompt("fca:Case a owl:Class .", GuidanceRules(rules=[]), "text")


def test_utc_042_repair_prompt_appends_errors():
    base = Prompt(system="s", user="u", token_estimate=1, doc_id="d01")
    repaired = repair_prompt(base, "bad output", "PARSE ERROR at 3:1: expected '.'")
    assert repaired.attempt == 2
    assert repaired.user.startswith("u\n\n=== REPAIR ===")
    assert "PARSE ERROR at 3:1" in repaired.user
    assert "bad output" in repaired.user


def test_utc_043_split_response_fence_and_comments():
    turtle, comments = split_response(VALID_REPLY)
    assert turtle.startswith("@prefix rdf:")
    assert turtle.endswith('"730"^^xsd:nonNegativeInteger .')
    assert comments == "The ontology cannot express whether part of the sentence is suspended."

    bare, notes = split_response("_:a a <http://example.org/C> .\nCOMMENTS: none really")
    assert bare.strip() == "_:a a <http://example.org/C> ."
    assert notes == "none really"

    truncated, _ = split_response("```turtle\n_:a a <http://example.org/C> .\n_:b")
    assert truncated.startswith("_:a a")

    with pytest.raises(EmptyResponse):
        split_response("  \n")


def test_utc_044_cost_of_single_reply():
    record = cost_of(_reply("x"), PriceTable())
    assert record.requests == 1
    assert record.cost == Decimal("0.00027")


def test_utc_045_estimate_cost_per_thousand_documents():
    prices = PriceTable(input_per_million=Decimal("0.50"), output_per_million=Decimal("1.50"))
    records = [CostRecord(input_tokens=3500, output_tokens=500, requests=1) for _ in range(1000)]
    assert estimate_cost(records, prices) == Decimal("2.5")


@pytest.mark.asyncio
async def test_utc_046_run_extraction_valid_first_attempt(ontology):
    backend = AsyncMock()
    backend.send.return_value = _reply(VALID_REPLY)
    doc = DocumentRecord(id="d01", text="Le pourvoi est rejeté.")
    outcome = await run_extraction(doc, backend, ontology, ExtractionConfig(rules=load_guidance_rules()))
    assert outcome.status == ExtractionStatus.VALID
    assert len(outcome.attempts) == 1
    assert len(outcome.graph) == 17
    assert outcome.comments.startswith("The ontology cannot express")
    prompt = backend.send.await_args.args[0]
    assert prompt.doc_id == "d01"
    assert prompt.attempt == 1


@pytest.mark.asyncio
async def test_utc_047_run_extraction_repairs_parse_error(ontology):
    backend = AsyncMock()
    backend.send.side_effect = [_reply(MALFORMED_REPLY), _reply(VALID_REPLY)]
    doc = DocumentRecord(id="d09", text="Le pourvoi est rejeté.")
    outcome = await run_extraction(doc, backend, ontology, ExtractionConfig(rules=load_guidance_rules()))
    assert outcome.status == ExtractionStatus.VALID
    assert len(outcome.attempts) == 2
    assert outcome.attempts[0].parse_error is not None
    assert outcome.cost.requests == 2
    repair = backend.send.await_args_list[1].args[0]
    assert repair.attempt == 2
    assert "PARSE ERROR at" in repair.user


@pytest.mark.asyncio
async def test_utc_048_run_extraction_keeps_last_invalid_graph(ontology):
    invalid = "```turtle\n" + PREFIXES + "_:case a fca:Case ; fca:hasJudge _:j .\n```"
    backend = AsyncMock()
    backend.send.return_value = _reply(invalid)
    doc = DocumentRecord(id="d02", text="text")
    config = ExtractionConfig(rules=load_guidance_rules(), max_retries=1)
    outcome = await run_extraction(doc, backend, ontology, config)
    assert outcome.status == ExtractionStatus.INVALID
    assert len(outcome.attempts) == 2
    assert outcome.graph is not None
    assert outcome.final_report.violations[0].rule == Rule.UNKNOWN_PREDICATE


@pytest.mark.asyncio
async def test_utc_049_run_extraction_backend_failure_and_oversized_prompt(ontology):
    backend = AsyncMock()
    backend.send.side_effect = BackendError("HTTP 401")
    doc = DocumentRecord(id="d03", text="text")
    failed = await run_extraction(doc, backend, ontology, ExtractionConfig(rules=load_guidance_rules()))
    assert failed.status == ExtractionStatus.BACKEND_FAILED
    assert failed.error == "HTTP 401"
    assert len(failed.attempts) == 1

    backend = AsyncMock()
    tiny = ExtractionConfig(rules=load_guidance_rules(), max_prompt_tokens=10)
    oversized = await run_extraction(doc, backend, ontology, tiny)
    assert oversized.status == ExtractionStatus.BACKEND_FAILED
    assert "never truncated" in oversized.error
    backend.send.assert_not_awaited()


@pytest.mark.asyncio
async def test_utc_081_run_extraction_survives_unreadable_replies(ontology, mocker):
    nested = "```turtle\n<urn:s> <urn:p> " + "(" * 5000 + ")" * 5000 + " .\n```"
    backend = AsyncMock()
    backend.send.return_value = _reply(nested)
    doc = DocumentRecord(id="d04", text="text")
    config = ExtractionConfig(rules=load_guidance_rules(), max_retries=1)
    outcome = await run_extraction(doc, backend, ontology, config)
    assert outcome.status == ExtractionStatus.PARSE_FAILED
    assert len(outcome.attempts) == 2
    assert "nested" in outcome.attempts[0].parse_error.message

    mocker.patch("app.services.generation_service.parse_turtle", side_effect=RuntimeError("boom"))
    backend.send.return_value = _reply(VALID_REPLY)
    crashed = await run_extraction(doc, backend, ontology, config)
    assert crashed.status == ExtractionStatus.PARSE_FAILED
    assert crashed.graph is None
    assert "boom" in crashed.attempts[-1].parse_error.message


def test_utc_082_split_response_one_line_fence():
    turtle, comments = split_response("```turtle <urn:s> <urn:p> <urn:o> .```")
    assert turtle == "<urn:s> <urn:p> <urn:o> ."
    assert comments is None
    untagged, _ = split_response("```<urn:s> <urn:p> <urn:o> .```")
    assert untagged == "<urn:s> <urn:p> <urn:o> ."


###############################################################
# 7. Unit Tests for `app/services/backends.py`
###############################################################
from app.models.extraction import BackendConfig
from app.services.backends import HttpBackend, MockBackend


def _prompt(doc_id="d01", attempt=1) -> Prompt:
    return Prompt(system="system", user="user", token_estimate=40, doc_id=doc_id, attempt=attempt)


@pytest.mark.asyncio
async def test_utc_050_mock_backend_replays_highest_attempt():
    backend = MockBackend(FIXTURES / "mock_responses")
    second = await backend.send(_prompt("d09", attempt=2))
    third = await backend.send(_prompt("d09", attempt=3))
    assert second.text == third.text
    assert second.input_tokens == 40
    assert second.output_tokens == math.ceil(len(second.text) / 4)
    assert backend.calls == 2
    assert backend.calls_by_doc == {"d09": 2}
    with pytest.raises(BackendError):
        await backend.send(_prompt("d99"))


def _http_config(**overrides) -> BackendConfig:
    values = dict(endpoint="https://llm.invalid/v1/chat/completions", model="test-model",
                  api_key_env="LEXKG_TEST_KEY", transport_retries=2, retry_backoff=0)
    values.update(overrides)
    return BackendConfig(**values)


CHAT_BODY = {"choices": [{"message": {"content": "```turtle\n```"}}], "usage": {"prompt_tokens": 12, "completion_tokens": 3}}


@pytest.mark.asyncio
async def test_utc_051_http_backend_sends_chat_request(monkeypatch):
    monkeypatch.setenv("LEXKG_TEST_KEY", "secret")
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        return httpx.Response(200, json=CHAT_BODY)

    backend = HttpBackend(_http_config(), transport=httpx.MockTransport(handler))
    reply = await backend.send(_prompt())
    assert reply.text == "```turtle\n```"
    assert (reply.input_tokens, reply.output_tokens) == (12, 3)
    body = json.loads(seen[0].content)
    assert seen[0].headers["Authorization"] == "Bearer secret"
    assert body["model"] == "test-model"
    assert [m["role"] for m in body["messages"]] == ["system", "user"]


@pytest.mark.asyncio
async def test_utc_052_http_backend_retries_transient_failures(monkeypatch):
    monkeypatch.setenv("LEXKG_TEST_KEY", "secret")
    statuses = iter([503, 429, 200])

    def handler(request: httpx.Request) -> httpx.Response:
        status = next(statuses)
        return httpx.Response(status, json=CHAT_BODY if status == 200 else {"error": "busy"})

    backend = HttpBackend(_http_config(), transport=httpx.MockTransport(handler))
    reply = await backend.send(_prompt())
    assert reply.input_tokens == 12


@pytest.mark.asyncio
async def test_utc_053_http_backend_errors(monkeypatch):
    monkeypatch.setenv("LEXKG_TEST_KEY", "secret")
    calls = []

    def unavailable(request):
        calls.append(request)
        return httpx.Response(500)

    backend = HttpBackend(_http_config(transport_retries=1), transport=httpx.MockTransport(unavailable))
    with pytest.raises(BackendError, match="unreachable after 2 tries"):
        await backend.send(_prompt())
    assert len(calls) == 2

    rejected = HttpBackend(_http_config(), transport=httpx.MockTransport(lambda r: httpx.Response(400, text="bad")))
    with pytest.raises(BackendError, match="HTTP 400"):
        await rejected.send(_prompt())

    monkeypatch.delenv("LEXKG_TEST_KEY")
    with pytest.raises(BackendError, match="LEXKG_TEST_KEY"):
        HttpBackend(_http_config())


###############################################################
# 8. Unit Tests for `app/models/corpus.py` and `app/storage`
###############################################################
from app.models.corpus import DocStatus, RunState
from app.storage.run_state import config_fingerprint, open_state, save_state, write_atomic


def test_utc_054_document_id_must_be_a_file_name():
    with pytest.raises(ValidationError):
        DocumentRecord(id="a/b", text="text")
    with pytest.raises(ValidationError):
        DocumentRecord(id="d01", text="  ")


def test_utc_055_run_state_transitions_and_totals():
    state = RunState(fingerprint="f")
    state.add_pending("d01")
    state.add_pending("d02")
    state.transition("d01", DocStatus.RUNNING)
    state.transition("d01", DocStatus.VALID, attempts=1)
    assert state.totals["valid"] == 1
    assert state.totals["pending"] == 1
    assert state.totals["documents"] == 2
    assert state.pending_ids() == ["d02"]
    with pytest.raises(InvalidTransition):
        state.transition("d02", DocStatus.VALID)
    with pytest.raises(InvalidTransition):
        state.transition("d01", DocStatus.RUNNING)


def test_utc_056_crashed_running_document_can_restart():
    state = RunState(fingerprint="f")
    state.add_pending("d01")
    state.transition("d01", DocStatus.RUNNING)
    state.transition("d01", DocStatus.RUNNING)
    assert state.docs["d01"].status == DocStatus.RUNNING


def test_utc_057_write_atomic_leaves_only_the_target(tmp_path):
    target = tmp_path / "nested" / "state.json"
    write_atomic(target, "one")
    write_atomic(target, "two")
    assert target.read_text() == "two"
    assert [p.name for p in target.parent.iterdir()] == ["state.json"]


def test_utc_058_state_fingerprint_guards_resume(tmp_path):
    path = tmp_path / "run_state.json"
    fingerprint = config_fingerprint(b"ontology", b"rules", "model")
    state = open_state(path, fingerprint)
    state.add_pending("d01")
    save_state(state, path)
    assert open_state(path, fingerprint).docs.keys() == {"d01"}
    assert config_fingerprint(b"ontology", b"other rules", "model") != fingerprint
    with pytest.raises(StateFingerprintMismatch):
        open_state(path, config_fingerprint(b"ontology", b"other rules", "model"))


###############################################################
# 9. Unit Tests for `app/services/corpus_service.py`
###############################################################
from app.services.corpus_service import ingest_corpus, load_graph, merge_outputs


def test_utc_059_ingest_jsonl_fixture():
    docs = ingest_corpus(FIXTURES / "corpus.jsonl")
    assert [d.id for d in docs] == [f"d{i:02d}" for i in range(1, 11)]
    assert docs[0].date.isoformat() == "2021-03-16"


def test_utc_060_ingest_rejects_bad_input(tmp_path):
    duplicated = tmp_path / "dup.jsonl"
    duplicated.write_text('{"id": "a", "text": "x"}\n{"id": "a", "text": "y"}\n')
    with pytest.raises(DuplicateId):
        ingest_corpus(duplicated)

    broken = tmp_path / "broken.jsonl"
    broken.write_text('{"id": "a", "text": "x"}\n{"id": "b", "text": \n')
    with pytest.raises(MalformedRecord) as info:
        ingest_corpus(broken)
    assert info.value.line == 2

    empty = tmp_path / "empty.jsonl"
    empty.write_text("\n")
    with pytest.raises(EmptyCorpus):
        ingest_corpus(empty)

    with pytest.raises(FileNotFoundError):
        ingest_corpus(tmp_path / "missing.jsonl")


def test_utc_061_ingest_text_directory(tmp_path):
    (tmp_path / "b.txt").write_text("Second decision.", encoding="utf-8")
    (tmp_path / "a.txt").write_text("First decision.", encoding="utf-8")
    (tmp_path / "notes.md").write_text("ignored", encoding="utf-8")
    docs = ingest_corpus(tmp_path)
    assert [d.id for d in docs] == ["a", "b"]


def test_utc_062_merge_relabels_and_tags_provenance(tmp_path):
    (tmp_path / "d01.ttl").write_text(PREFIXES + "_:case a fca:Case .\n", encoding="utf-8")
    (tmp_path / "d02.ttl").write_text(PREFIXES + "_:case a fca:Case .\n", encoding="utf-8")
    merged = merge_outputs(tmp_path)
    cases = merged.match(None, Vocab.RDF_TYPE, fca("Case"))
    assert len(cases) == 2
    docs = sorted(merged.objects(t.subject, fca("fromDocument"))[0].lexical for t in cases)
    assert docs == ["d01", "d02"]
    assert len(merged) == 4
    assert load_graph(tmp_path) == merged


def test_utc_063_merge_reports_file_of_parse_error(tmp_path):
    (tmp_path / "d01.ttl").write_text("_:a a .\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        merge_outputs(tmp_path)
    assert info.value.source.endswith("d01.ttl")


###############################################################
# 10. Unit Tests for `app/services/analytics_service.py`
###############################################################
from app.models.rdf import Variable
from app.services.analytics_service import (
    bgp_match,
    compare_groups,
    count_by_object,
    decade_edges,
    export_property_graph,
    grouped_distribution,
    histogram,
    ks_statistic,
    linear_edges,
    summarize,
)

TWO_CASES = PREFIXES + """
_:c1 a fca:Case ; fca:hasAppeal _:a1 ; fca:hasConviction _:v1 ; fca:hasCrime _:k1 .
_:a1 a fca:Appeal ; fca:hasDecision fca:Rejected .
_:v1 a fca:Conviction ; fca:imposedPunishment _:p1 , _:f1 .
_:p1 a fca:CustodialPunishment ; fca:durationDays "730"^^xsd:nonNegativeInteger .
_:f1 a fca:MonetaryPunishment ; fca:amountEUR "1500.00"^^xsd:decimal .
_:k1 a fca:Crime ; fca:offenseCategory fca:ViolentOffense .
_:c2 a fca:Case ; fca:hasAppeal _:a2 ; fca:hasConviction _:v2 ; fca:hasCrime _:k2 , _:k3 .
_:a2 a fca:Appeal ; fca:hasDecision fca:Upheld .
_:v2 a fca:Conviction ; fca:imposedPunishment _:p2 .
_:p2 a fca:CustodialPunishment ; fca:durationDays "90"^^xsd:nonNegativeInteger .
_:k2 a fca:Crime ; fca:offenseCategory fca:ViolentOffense .
_:k3 a fca:Crime ; fca:offenseCategory fca:DrugOffense .
"""


def test_utc_064_bgp_match_joins_on_shared_variables():
    graph = parse_turtle(TWO_CASES).graph
    patterns = parse_triple_patterns("?case fca:hasCrime ?crime .\n?crime fca:offenseCategory fca:ViolentOffense .")
    bindings = bgp_match(graph, patterns)
    assert len(bindings) == 2
    assert {b["case"] for b in bindings} == {BlankNode("c1"), BlankNode("c2")}
    none = bgp_match(graph, parse_triple_patterns("?x fca:hasJudge ?y ."))
    assert none == []
    with pytest.raises(ValueError):
        bgp_match(graph, [])


def test_utc_065_bgp_match_repeated_variable_in_one_pattern():
    graph = Graph([Triple(ex("a"), ex("p"), ex("a")), Triple(ex("a"), ex("p"), ex("b"))])
    from app.models.rdf import TriplePattern
    bindings = bgp_match(graph, [TriplePattern(Variable("x"), ex("p"), Variable("x"))])
    assert bindings == [{"x": ex("a")}]


def test_utc_066_binning_helpers():
    assert linear_edges([0, 7, 12], 5) == [0.0, 5.0, 10.0, 15.0]
    assert decade_edges([300, 1500, 25000]) == [100.0, 1000.0, 10000.0, 100000.0]
    assert decade_edges([0, 50])[0] == 0.0
    with pytest.raises(ValueError):
        linear_edges([1], 0)


def test_utc_067_histogram_and_summary():
    hist = histogram([1, 2, 3, 7], [0, 5, 10])
    assert hist.counts == [3, 1]
    assert hist.normalized == [0.75, 0.25]
    assert histogram([], [0, 5]).normalized is None
    summary = summarize("Rejected", [1, 2, 3, 4])
    assert (summary.min, summary.q1, summary.median, summary.q3, summary.max) == (1.0, 1.75, 2.5, 3.25, 4.0)
    assert summary.mean == 2.5


def test_utc_068_ks_statistic_known_values():
    assert ks_statistic([1, 2, 3], [4, 5, 6]) == 1.0
    assert ks_statistic([1, 2, 3], [1, 2, 3]) == 0.0
    assert ks_statistic([1, 2, 3, 4], [3, 4, 5, 6]) == 0.5
    with pytest.raises(EmptySample):
        ks_statistic([], [1.0])


def test_utc_069_count_by_object_most_frequent_first(ontology):
    graph = parse_turtle(TWO_CASES).graph
    counts = count_by_object(graph, ontology)
    assert list(counts.items()) == [(fca("ViolentOffense"), 2), (fca("DrugOffense"), 1)]
    with pytest.raises(UnknownPredicate):
        count_by_object(graph, ontology, fca("hasJudge"))


def test_utc_070_grouped_distribution_by_decision():
    graph = parse_turtle(TWO_CASES).graph
    result = grouped_distribution(graph, fca("durationDays"))
    assert sorted(result.groups) == ["Rejected", "Upheld"]
    assert result.groups["Rejected"].values == [730.0]
    assert result.groups["Upheld"].histogram.bin_edges == result.groups["Rejected"].histogram.bin_edges
    assert result.groups["Upheld"].histogram.bin_edges[0] == 90.0
    assert result.compared == ["Rejected", "Upheld"]
    assert result.ks_statistic == 1.0
    assert compare_groups(result) == (["Rejected", "Upheld"], 1.0)

    fines = grouped_distribution(graph, fca("amountEUR"))
    assert list(fines.groups) == ["Rejected"]
    assert fines.groups["Rejected"].histogram.bin_edges == [1000.0, 10000.0]
    assert fines.ks_statistic is None


def test_utc_071_grouped_distribution_skips_unreadable_values():
    text = TWO_CASES.replace('"90"^^xsd:nonNegativeInteger', '"three months"')
    result = grouped_distribution(parse_turtle(text).graph, fca("durationDays"))
    assert result.skipped == 1
    assert list(result.groups) == ["Rejected"]
    assert result.warnings


def test_utc_072_property_graph_tables(ontology):
    tables = export_property_graph(parse_turtle(GOOD_TTL).graph, ontology)
    assert tables.node_columns[:3] == ["id", "class", "doc"]
    punishment = next(row for row in tables.nodes if row["id"] == "_:punishment")
    assert punishment["class"] == "CustodialPunishment"
    assert punishment["durationDays"] == "730"
    assert {"src": "_:case", "dst": "_:appeal", "relation": "hasAppeal"} in tables.edges
    assert all(set(row) == set(tables.node_columns) for row in tables.nodes)

    small = parse_turtle(PREFIXES + '_:p1 fca:convictedOf _:c1 .\n_:pun1 fca:durationDays "365" .\n').graph
    mapped = export_property_graph(small, ontology)
    assert [row["id"] for row in mapped.nodes] == ["_:c1", "_:p1", "_:pun1"]
    assert mapped.edges == [{"src": "_:p1", "dst": "_:c1", "relation": "convictedOf"}]
    assert next(row for row in mapped.nodes if row["id"] == "_:pun1")["durationDays"] == "365"


def test_utc_083_grouped_distribution_counts_each_node_once():
    text = TWO_CASES + '_:p1 fca:durationDays "365"^^xsd:nonNegativeInteger .\n_:v2 fca:imposedPunishment _:p1 .\n'
    result = grouped_distribution(parse_turtle(text).graph, fca("durationDays"))
    assert result.groups["Rejected"].values == [365.0]
    assert result.groups["Upheld"].values == [90.0]
    assert sum(group.summary.n for group in result.groups.values()) == 2
    assert any("extra value" in warning for warning in result.warnings)
    assert any("several groups" in warning for warning in result.warnings)


def test_utc_084_property_graph_edges_are_object_property_triples(ontology):
    text = GOOD_TTL + "_:case <http://example.org/seeAlso> <http://example.org/x> .\n"
    graph = parse_turtle(text).graph
    object_triples = [
        t for t in graph
        if t.predicate in ontology.properties and ontology.properties[t.predicate].kind == PropertyKind.OBJECT
    ]
    assert len(object_triples) == 10
    tables = export_property_graph(graph, ontology)
    assert len(tables.edges) == 10
    assert all(edge["relation"] != "seeAlso" for edge in tables.edges)
    case = next(row for row in tables.nodes if row["id"] == "_:case")
    assert case["seeAlso"] == "http://example.org/x"
    assert "http://example.org/x" not in {row["id"] for row in tables.nodes}


###############################################################
# 11. Unit Tests for `app/utils/settings.py`
###############################################################
from app.utils.settings import ConfigError, load_settings


def test_utc_073_settings_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("LEXKG_MODEL", "env-model")
    monkeypatch.setenv("LEXKG_MAX_INFLIGHT", "3")
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"max_inflight": 6, "keep_invalid": False}))
    settings = load_settings(config, max_inflight=8, max_retries=None)
    assert settings.model == "env-model"
    assert settings.max_inflight == 8
    assert settings.keep_invalid is False
    assert settings.max_retries == 2


def test_utc_074_invalid_settings_are_usage_errors(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_settings(None, max_inflight=0)
    assert info.value.exit_code == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError):
        load_settings(broken)


def test_utc_085_config_file_must_hold_an_object(tmp_path):
    listed = tmp_path / "list.json"
    listed.write_text('["model", "gpt"]')
    with pytest.raises(ConfigError, match="JSON object"):
        load_settings(listed)
    scalar = tmp_path / "scalar.json"
    scalar.write_text("42")
    with pytest.raises(ConfigError) as info:
        load_settings(scalar)
    assert info.value.exit_code == 2


###############################################################
# 12. Unit Tests for `scripts/corpus_scale_check.py`
###############################################################

def _load_scale_check():
    spec = importlib.util.spec_from_file_location("corpus_scale_check", ROOT / "scripts" / "corpus_scale_check.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_utc_075_scale_check_evaluation():
    module = _load_scale_check()
    passing = module.evaluate(2820, 31.2, fca("ViolentOffense"))
    assert all(row[3] for row in passing)
    failing = module.evaluate(10, 17.0, fca("DrugOffense"))
    assert not any(row[3] for row in failing)
    assert failing[2][2] == "DrugOffense"


###############################################################
# 13. Unit Tests for `app/controllers/common.py`
###############################################################
import typer

from app.controllers.common import active_ontology, handle_errors
from app.utils.settings import Settings


def test_utc_076_handle_errors_maps_exit_codes():
    @handle_errors
    def fails_with(exc):
        raise exc

    with pytest.raises(typer.Exit) as info:
        fails_with(BackendError("HTTP 500"))
    assert info.value.exit_code == 3
    with pytest.raises(typer.Exit) as info:
        fails_with(FileNotFoundError("missing.jsonl"))
    assert info.value.exit_code == 4
    with pytest.raises(typer.Exit) as info:
        fails_with(DuplicateId("d01"))
    assert info.value.exit_code == 2


def test_utc_077_active_ontology_prefers_configured_file(mocker, ontology):
    loader = mocker.patch("app.controllers.common.load_ontology_file", return_value=ontology)
    assert active_ontology(Settings()) is ontology
    loader.assert_not_called()
    active_ontology(Settings(ontology_path=Path("custom.ttl")))
    loader.assert_called_once_with(Path("custom.ttl"))
