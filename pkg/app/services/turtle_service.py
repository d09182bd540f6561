# file: services/turtle_service.py

import re
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Optional, Union
from urllib.parse import urljoin

from app.models.rdf import (
    BlankNode,
    Iri,
    Literal,
    PrefixMap,
    Term,
    Triple,
    TriplePattern,
    Variable,
    Vocab,
    default_prefixes,
)
from app.services.graph_store import BlankNodeAllocator, Graph, canonical_ntriple, canonical_term
from app.utils.errors import InvalidTerm, ParseError

# Supported subset: @prefix/@base, PREFIX/BASE, comments, "a", ';' and ',' lists,
# IRIs, prefixed names, _:labels, [] and [ ... ], ( ... ) collections,
# short and long strings with @lang / ^^datatype, integer/decimal/double/boolean shorthand.

_PN_PREFIX = r"[^\W\d_](?:[\w.-]*[\w-])?"
_PLX = r"\\[-_~.!$&'()*+,;=/?#@%]"
_PN_LOCAL = rf"(?:[\w:%]|{_PLX})(?:(?:[\w.:%-]|{_PLX})*(?:[\w:%-]|{_PLX}))?"

_TOKEN_SPECS = [
    ("COMMENT", r"#[^\r\n]*"),
    ("WS", r"[ \t\r\n]+"),
    ("IRIREF", r"<[^<>\"{}|^`\\\x00-\x20]*>"),
    ("STRING_LONG_DQ", r'"""(?:(?:"|"")?(?:[^"\\]|\\.))*"""'),
    ("STRING_LONG_SQ", r"'''(?:(?:'|'')?(?:[^'\\]|\\.))*'''"),
    ("STRING_DQ", r'"(?:[^"\\\r\n]|\\.)*"'),
    ("STRING_SQ", r"'(?:[^'\\\r\n]|\\.)*'"),
    ("LANGTAG", r"@[A-Za-z]+(?:-[A-Za-z0-9]+)*"),
    ("DATATYPE", r"\^\^"),
    ("DOUBLE", r"[+-]?(?:\d+\.\d*[eE][+-]?\d+|\.\d+[eE][+-]?\d+|\d+[eE][+-]?\d+)"),
    ("DECIMAL", r"[+-]?\d*\.\d+"),
    ("INTEGER", r"[+-]?\d+"),
    ("BLANK", r"_:[\w](?:[\w.-]*[\w-])?"),
    ("VAR", r"\?[A-Za-z_][A-Za-z0-9_]*"),
    ("PNAME", rf"(?:{_PN_PREFIX})?:(?:{_PN_LOCAL})?"),
    ("NAME", r"[A-Za-z][A-Za-z0-9_-]*"),
    ("PUNCT", r"[.;,\[\]()]"),
]
_MASTER = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in _TOKEN_SPECS), re.S)
_STRING_KINDS = {"STRING_LONG_DQ": 3, "STRING_LONG_SQ": 3, "STRING_DQ": 1, "STRING_SQ": 1}
_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_QNAME_LOCAL = re.compile(r"^(?:[A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?)?$")
_QNAME_PREFIX = re.compile(r"^(?:[A-Za-z](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?)?$")
_MAX_NESTING = 128


@dataclass
class Token:
    kind: str
    value: str
    pos: int
    line: int
    col: int


@dataclass
class TurtleDocument:
    graph: Graph
    prefixes: PrefixMap = field(default_factory=PrefixMap)
    base: Optional[Iri] = None


class _Lexer:
    """Lazy tokenizer; the first bad character is reported only when reached."""

    def __init__(self, text: str, source: Optional[str] = None):
        self.text = text
        self.source = source
        self._line_starts = [0] + [m.end() for m in re.finditer(r"\n", text)]
        self._pos = 0
        self._peeked: Optional[Token] = None

    def position(self, pos: int) -> tuple[int, int]:
        line = bisect_right(self._line_starts, pos)
        return line, pos - self._line_starts[line - 1] + 1

    def line_end(self, line: int) -> int:
        if line < len(self._line_starts):
            return self._line_starts[line] - 1
        return len(self.text)

    def error(self, pos: int, message: str) -> ParseError:
        line, col = self.position(pos)
        if pos >= len(self.text):
            snippet = self.text[max(0, pos - 20):pos]
        else:
            snippet = self.text[pos:pos + 20]
        return ParseError(line, col, message, snippet.strip(), self.source)

    def _scan(self) -> Token:
        while True:
            if self._pos >= len(self.text):
                line, col = self.position(len(self.text))
                return Token("EOF", "", len(self.text), line, col)
            m = _MASTER.match(self.text, self._pos)
            if not m:
                char = self.text[self._pos]
                if char in "\"'":
                    raise self.error(self._pos, "unterminated string literal")
                raise self.error(self._pos, f"unexpected character {char!r}")
            kind = m.lastgroup
            start = self._pos
            self._pos = m.end()
            if kind in ("WS", "COMMENT"):
                continue
            line, col = self.position(start)
            return Token(kind, m.group(kind), start, line, col)

    def peek(self) -> Token:
        if self._peeked is None:
            self._peeked = self._scan()
        return self._peeked

    def next(self) -> Token:
        token = self.peek()
        self._peeked = None
        return token


class _ParserBase:
    def __init__(self, text: str, source: Optional[str] = None):
        self.lexer = _Lexer(text, source)
        self.base: Optional[Iri] = None
        self._bnodes: dict[str, BlankNode] = {}
        self._allocator = BlankNodeAllocator(prefix="g")

    def error(self, token: Token, message: str) -> ParseError:
        if token.kind == "EOF":
            return self.lexer.error(token.pos, f"{message}, found end of input")
        return self.lexer.error(token.pos, f"{message}, found {token.value!r}")

    def is_punct(self, token: Token, value: str) -> bool:
        return token.kind == "PUNCT" and token.value == value

    def expect_punct(self, value: str, what: str) -> Token:
        token = self.lexer.next()
        if not self.is_punct(token, value):
            raise self.error(token, f"expected {what}")
        return token

    def make_iri(self, token: Token, value: str) -> Iri:
        try:
            return Iri(value)
        except InvalidTerm as exc:
            raise self.lexer.error(token.pos, exc.detail) from None

    def iri_ref(self, token: Token) -> Iri:
        value = token.value[1:-1]
        if not re.match(r"^[A-Za-z][A-Za-z0-9+.-]*:", value):
            if self.base is None:
                raise self.lexer.error(token.pos, f"relative IRI <{value}> without @base")
            try:
                value = urljoin(self.base.value, value)
            except ValueError as exc:
                raise self.lexer.error(token.pos, f"cannot resolve <{value}> against the base: {exc}") from None
        return self.make_iri(token, value)

    def blank(self, token: Token) -> BlankNode:
        label = token.value[2:]
        node = self._bnodes.get(label)
        if node is None:
            if re.match(r"^[A-Za-z0-9_]+$", label) and label not in self._allocator:
                node = BlankNode(label)
                self._allocator.reserve(label)
            else:
                node = self._allocator.fresh()
            self._bnodes[label] = node
        return node

    def fresh_blank(self) -> BlankNode:
        return self._allocator.fresh()

    def string_literal(self, token: Token) -> str:
        quote = _STRING_KINDS[token.kind]
        body = token.value[quote:-quote]
        out = []
        i = 0
        while i < len(body):
            char = body[i]
            if char != "\\":
                out.append(char)
                i += 1
                continue
            escape = body[i + 1]
            if escape in _ECHAR:
                out.append(_ECHAR[escape])
                i += 2
            elif escape in "uU":
                width = 4 if escape == "u" else 8
                digits = body[i + 2:i + 2 + width]
                if not re.match(rf"^[0-9A-Fa-f]{{{width}}}$", digits):
                    raise self.lexer.error(token.pos + quote + i, "malformed unicode escape")
                code = int(digits, 16)
                if 0xD800 <= code <= 0xDFFF or code > 0x10FFFF:
                    raise self.lexer.error(token.pos + quote + i, "unicode escape outside the character range")
                out.append(chr(code))
                i += 2 + width
            else:
                raise self.lexer.error(token.pos + quote + i, f"invalid escape '\\{escape}'")
        return "".join(out)


class _TurtleParser(_ParserBase):
    def __init__(self, text: str, source: Optional[str] = None, prefixes: Optional[PrefixMap] = None,
                 allow_variables: bool = False):
        super().__init__(text, source)
        self.prefixes = prefixes.copy() if prefixes is not None else PrefixMap()
        self.graph = Graph(prefixes=self.prefixes)
        self.allow_variables = allow_variables
        self.patterns: list[TriplePattern] = []
        self.depth = 0

    def parse(self) -> TurtleDocument:
        while self.lexer.peek().kind != "EOF":
            self.statement()
        return TurtleDocument(self.graph, self.prefixes, self.base)

    def nest(self, token: Token) -> None:
        self.depth += 1
        if self.depth > _MAX_NESTING:
            raise self.lexer.error(token.pos, f"more than {_MAX_NESTING} nested blank nodes or collections")

    def emit(self, subject, predicate, obj, token: Token) -> None:
        if self.allow_variables:
            self.patterns.append(TriplePattern(subject, predicate, obj))
            return
        try:
            self.graph.insert(Triple(subject, predicate, obj))
        except InvalidTerm as exc:
            raise self.lexer.error(token.pos, exc.detail) from None

    def statement(self) -> None:
        token = self.lexer.peek()
        if token.kind == "LANGTAG" and token.value in ("@prefix", "@base"):
            self.lexer.next()
            if token.value == "@prefix":
                self.prefix_body()
            else:
                self.base_body()
            self.expect_punct(".", "'.' after directive")
        elif token.kind == "NAME" and token.value.upper() in ("PREFIX", "BASE"):
            self.lexer.next()
            if token.value.upper() == "PREFIX":
                self.prefix_body()
            else:
                self.base_body()
        else:
            self.triples()
            self.expect_punct(".", "'.' to end the statement")

    def prefix_body(self) -> None:
        name = self.lexer.next()
        if name.kind != "PNAME" or not name.value.endswith(":") or name.value.count(":") != 1:
            raise self.error(name, "expected a prefix label such as 'fca:'")
        ref = self.lexer.next()
        if ref.kind != "IRIREF":
            raise self.error(ref, "expected <namespace IRI>")
        self.prefixes.bind(name.value[:-1], self.iri_ref(ref))

    def base_body(self) -> None:
        ref = self.lexer.next()
        if ref.kind != "IRIREF":
            raise self.error(ref, "expected <base IRI>")
        self.base = self.iri_ref(ref)

    def triples(self) -> None:
        token = self.lexer.peek()
        if self.is_punct(token, "["):
            subject = self.blank_node_property_list()
            if not self.is_punct(self.lexer.peek(), "."):
                self.predicate_object_list(subject)
            return
        subject = self.subject()
        self.predicate_object_list(subject)

    def resource(self, token: Token) -> Iri:
        if token.kind == "IRIREF":
            return self.iri_ref(token)
        label, _, local = token.value.partition(":")
        if label not in self.prefixes:
            raise self.lexer.error(token.pos, f"unknown prefix '{label}:'")
        local = re.sub(r"\\(.)", r"\1", local)
        return self.make_iri(token, self.prefixes.namespace(label).value + local)

    def variable(self, token: Token) -> Variable:
        if not self.allow_variables:
            raise self.error(token, "variables are not allowed in Turtle data")
        try:
            return Variable(token.value[1:])
        except InvalidTerm as exc:
            raise self.lexer.error(token.pos, exc.detail) from None

    def subject(self):
        token = self.lexer.peek()
        if token.kind in ("IRIREF", "PNAME"):
            return self.resource(self.lexer.next())
        if token.kind == "BLANK":
            return self.blank(self.lexer.next())
        if self.is_punct(token, "("):
            return self.collection()
        if token.kind == "VAR":
            return self.variable(self.lexer.next())
        raise self.error(token, "expected a subject")

    def verb(self):
        token = self.lexer.next()
        if token.kind == "NAME" and token.value == "a":
            return Vocab.RDF_TYPE
        if token.kind in ("IRIREF", "PNAME"):
            return self.resource(token)
        if token.kind == "VAR":
            return self.variable(token)
        raise self.error(token, "expected a predicate")

    def predicate_object_list(self, subject) -> None:
        predicate = self.verb()
        self.object_list(subject, predicate)
        while self.is_punct(self.lexer.peek(), ";"):
            while self.is_punct(self.lexer.peek(), ";"):
                self.lexer.next()
            following = self.lexer.peek()
            if following.kind == "EOF" or self.is_punct(following, ".") or self.is_punct(following, "]"):
                break
            predicate = self.verb()
            self.object_list(subject, predicate)

    def object_list(self, subject, predicate) -> None:
        token = self.lexer.peek()
        self.emit(subject, predicate, self.object(), token)
        while self.is_punct(self.lexer.peek(), ","):
            self.lexer.next()
            token = self.lexer.peek()
            self.emit(subject, predicate, self.object(), token)

    def object(self):
        token = self.lexer.peek()
        if token.kind in ("IRIREF", "PNAME"):
            return self.resource(self.lexer.next())
        if token.kind == "BLANK":
            return self.blank(self.lexer.next())
        if self.is_punct(token, "["):
            return self.blank_node_property_list()
        if self.is_punct(token, "("):
            return self.collection()
        if token.kind in _STRING_KINDS:
            return self.literal()
        if token.kind in ("INTEGER", "DECIMAL", "DOUBLE"):
            self.lexer.next()
            datatype = {"INTEGER": Vocab.XSD_INTEGER, "DECIMAL": Vocab.XSD_DECIMAL,
                        "DOUBLE": Vocab.XSD_DOUBLE}[token.kind]
            return Literal(token.value, datatype)
        if token.kind == "NAME" and token.value in ("true", "false"):
            self.lexer.next()
            return Literal(token.value, Vocab.XSD_BOOLEAN)
        if token.kind == "VAR":
            return self.variable(self.lexer.next())
        raise self.error(token, "expected an object")

    def literal(self) -> Literal:
        token = self.lexer.next()
        lexical = self.string_literal(token)
        following = self.lexer.peek()
        try:
            if following.kind == "LANGTAG":
                self.lexer.next()
                return Literal(lexical, language=following.value[1:])
            if following.kind == "DATATYPE":
                self.lexer.next()
                ref = self.lexer.next()
                if ref.kind not in ("IRIREF", "PNAME"):
                    raise self.error(ref, "expected a datatype IRI after '^^'")
                return Literal(lexical, self.resource(ref))
            return Literal(lexical)
        except InvalidTerm as exc:
            raise self.lexer.error(token.pos, exc.detail) from None

    def blank_node_property_list(self) -> BlankNode:
        opening = self.expect_punct("[", "'['")
        node = self.fresh_blank()
        if self.is_punct(self.lexer.peek(), "]"):
            self.lexer.next()
            return node
        self.nest(opening)
        self.predicate_object_list(node)
        self.expect_punct("]", "']' to close the blank node")
        self.depth -= 1
        return node

    def collection(self):
        opening = self.expect_punct("(", "'('")
        items = []
        self.nest(opening)
        while not self.is_punct(self.lexer.peek(), ")"):
            if self.lexer.peek().kind == "EOF":
                raise self.error(self.lexer.peek(), "expected ')' to close the collection")
            items.append(self.object())
        self.lexer.next()
        self.depth -= 1
        if not items:
            return Vocab.RDF_NIL
        head = self.fresh_blank()
        current = head
        for i, item in enumerate(items):
            self.emit(current, Vocab.RDF_FIRST, item, opening)
            following = self.fresh_blank() if i < len(items) - 1 else Vocab.RDF_NIL
            self.emit(current, Vocab.RDF_REST, following, opening)
            current = following
        return head


def parse_turtle(text: str, source: Optional[str] = None) -> TurtleDocument:
    """Parses Turtle into a document; raises ParseError at the first violation."""
    return _TurtleParser(text, source).parse()


def parse_triple_patterns(text: str, prefixes: Optional[PrefixMap] = None) -> list[TriplePattern]:
    """Turtle triple syntax with `?variables`; the usual prefixes are predeclared."""
    parser = _TurtleParser(text, prefixes=prefixes or default_prefixes(), allow_variables=True)
    parser.parse()
    return parser.patterns


class _NTriplesParser(_ParserBase):
    def parse(self) -> Graph:
        graph = Graph()
        while self.lexer.peek().kind != "EOF":
            line = self.lexer.peek().line
            subject = self.term(line, ("IRIREF", "BLANK"), "subject")
            predicate = self.term(line, ("IRIREF",), "predicate")
            obj = self.term(line, ("IRIREF", "BLANK", "STRING_DQ"), "object")
            dot = self.lexer.peek()
            if not self.is_punct(dot, ".") or dot.line != line:
                raise self.lexer.error(self.lexer.line_end(line), "missing final '.'")
            self.lexer.next()
            if self.lexer.peek().kind != "EOF" and self.lexer.peek().line == line:
                raise self.error(self.lexer.peek(), "one triple per line")
            graph.insert(Triple(subject, predicate, obj))
        return graph

    def term(self, line: int, kinds: tuple, what: str) -> Term:
        token = self.lexer.peek()
        if token.kind == "EOF" or token.line != line:
            raise self.lexer.error(self.lexer.line_end(line), f"expected {what}")
        if token.kind not in kinds:
            raise self.error(token, f"expected {what}")
        self.lexer.next()
        if token.kind == "IRIREF":
            return self.iri_ref(token)
        if token.kind == "BLANK":
            return self.blank(token)
        lexical = self.string_literal(token)
        following = self.lexer.peek()
        try:
            if following.kind == "LANGTAG" and following.line == line:
                self.lexer.next()
                return Literal(lexical, language=following.value[1:])
            if following.kind == "DATATYPE" and following.line == line:
                self.lexer.next()
                ref = self.lexer.next()
                if ref.kind != "IRIREF" or ref.line != line:
                    raise self.error(ref, "expected <datatype IRI>")
                return Literal(lexical, self.iri_ref(ref))
            return Literal(lexical)
        except InvalidTerm as exc:
            raise self.lexer.error(token.pos, exc.detail) from None


def parse_ntriples(text: str, source: Optional[str] = None) -> Graph:
    return _NTriplesParser(text, source).parse()


def serialize_ntriples(graph: Graph) -> str:
    lines = sorted(canonical_ntriple(t) for t in graph.sorted_triples())
    return "".join(line + "\n" for line in lines)


def render_iri(iri: Iri, prefixes: PrefixMap) -> str:
    compacted = prefixes.compact(iri)
    if compacted is not None:
        label, local = compacted
        if _QNAME_PREFIX.match(label) and _QNAME_LOCAL.match(local):
            return f"{label}:{local}"
    return f"<{iri.value}>"


def _render_term(term: Term, prefixes: PrefixMap) -> str:
    if isinstance(term, Iri):
        return render_iri(term, prefixes)
    if isinstance(term, BlankNode):
        return f"_:{term.label}"
    text = canonical_term(Literal(term.lexical))
    if term.language is not None:
        return f"{text}@{term.language}"
    if term.datatype != Vocab.XSD_STRING:
        return f"{text}^^{render_iri(term.datatype, prefixes)}"
    return text


def serialize_turtle(doc: Union[TurtleDocument, Graph]) -> str:
    """Prefix block, then one statement per subject (sorted), predicates grouped with ';'."""
    graph = doc.graph if isinstance(doc, TurtleDocument) else doc
    prefixes = doc.prefixes if isinstance(doc, TurtleDocument) else graph.prefixes
    lines = [f"@prefix {label}: <{namespace.value}> ." for label, namespace in prefixes.items()]
    if lines and len(graph):
        lines.append("")
    for subject in graph.subjects():
        grouped: dict[Iri, list[Term]] = {}
        for triple in graph.match(subject):
            grouped.setdefault(triple.predicate, []).append(triple.object)
        ordered = sorted(grouped, key=lambda p: (p != Vocab.RDF_TYPE, canonical_term(p)))
        parts = []
        for predicate in ordered:
            verb = "a" if predicate == Vocab.RDF_TYPE else render_iri(predicate, prefixes)
            objects = sorted(grouped[predicate], key=canonical_term)
            parts.append(f"{verb} " + ", ".join(_render_term(o, prefixes) for o in objects))
        lines.append(f"{_render_term(subject, prefixes)} " + " ;\n    ".join(parts) + " .")
    return "\n".join(lines) + "\n" if lines else ""
