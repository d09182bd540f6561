# file: utils/errors.py

from typing import Optional

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_BACKEND = 3
EXIT_IO = 4


class LexKGError(Exception):
    """Base error. `exit_code` is what the command line returns for it."""

    exit_code = EXIT_USAGE

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidTerm(LexKGError, ValueError):
    pass


class UnknownPrefix(LexKGError):
    def __init__(self, label: str):
        super().__init__(f"Unknown prefix '{label}'")
        self.label = label


class ParseError(LexKGError):
    """First syntax error of a Turtle / N-Triples input (1-based positions)."""

    exit_code = EXIT_VALIDATION

    def __init__(self, line: int, column: int, message: str, snippet: str = "", source: Optional[str] = None):
        self.line = line
        self.column = column
        self.message = message
        self.snippet = snippet
        self.source = source
        super().__init__(self._render())

    def _render(self) -> str:
        where = f"{self.source}:" if self.source else ""
        text = f"{where}{self.line}:{self.column}: {self.message}"
        if self.snippet:
            text += f" near {self.snippet!r}"
        return text

    def with_source(self, source: str) -> "ParseError":
        return ParseError(self.line, self.column, self.message, self.snippet, source)

    def to_dict(self) -> dict:
        return {
            "line": self.line,
            "column": self.column,
            "message": self.message,
            "snippet": self.snippet,
            "source": self.source,
        }


class CyclicHierarchy(LexKGError):
    exit_code = EXIT_VALIDATION

    def __init__(self, cycle: list[str]):
        super().__init__("Cyclic subclass hierarchy: " + " -> ".join(cycle))
        self.cycle = cycle


class UnknownClass(LexKGError):
    def __init__(self, iri: str):
        super().__init__(f"Unknown class <{iri}>")
        self.iri = iri


class UnknownPredicate(LexKGError):
    def __init__(self, iri: str):
        super().__init__(f"Predicate <{iri}> is not declared in the ontology")
        self.iri = iri


class EmptyInput(LexKGError):
    def __init__(self, section: str):
        super().__init__(f"Prompt section {section} is empty")
        self.section = section


class EmptyResponse(LexKGError):
    exit_code = EXIT_BACKEND

    def __init__(self):
        super().__init__("The generator returned an empty response")


class BackendError(LexKGError):
    exit_code = EXIT_BACKEND


class OversizedPrompt(LexKGError):
    def __init__(self, estimate: int, limit: int):
        super().__init__(f"Prompt needs ~{estimate} tokens, limit is {limit}; documents are never truncated")
        self.estimate = estimate
        self.limit = limit


class DuplicateId(LexKGError):
    def __init__(self, doc_id: str):
        super().__init__(f"Duplicate document id '{doc_id}'")
        self.doc_id = doc_id


class MalformedRecord(LexKGError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"Malformed record at line {line}: {reason}")
        self.line = line


class EmptyCorpus(LexKGError):
    def __init__(self, path: str):
        super().__init__(f"No documents found in {path}")


class StateFingerprintMismatch(LexKGError):
    def __init__(self, expected: str, found: str):
        super().__init__(
            f"Run state was produced with fingerprint {found[:12]}, current configuration is {expected[:12]}; "
            "use a fresh --state path to start a new run"
        )


class InvalidTransition(LexKGError):
    def __init__(self, doc_id: str, current: str, new: str):
        super().__init__(f"Document '{doc_id}' cannot move from {current} to {new}")


class EmptySample(LexKGError):
    def __init__(self):
        super().__init__("KS statistic needs two non-empty samples")
