"""
Shared line tokenizer for the text file formats
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Union

from ..errors import ParseError

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Line:
    no: int
    tokens: List[str]
    raw: str

    @property
    def keyword(self) -> str:
        return self.tokens[0]

    def rest(self) -> str:
        """Everything after the keyword, verbatim apart from surrounding whitespace"""
        return self.raw.strip()[len(self.keyword):].strip()


class LineReader:
    """Iterates the non-blank, non-comment lines of a text with one token of lookahead"""

    def __init__(self, text: str, source: str):
        self.source = source
        self._lines = [
            Line(no, raw.split(), raw)
            for no, raw in enumerate(text.splitlines(), start=1)
            if raw.strip() and not raw.lstrip().startswith("#")
        ]
        self._pos = 0
        self.last_line_no = len(text.splitlines())

    def __iter__(self) -> Iterator[Line]:
        while self._pos < len(self._lines):
            yield self.next()

    def peek(self) -> Optional[Line]:
        return self._lines[self._pos] if self._pos < len(self._lines) else None

    def next(self) -> Line:
        line = self.peek()
        if line is None:
            raise self.error(self.last_line_no, "unexpected end of file")
        self._pos += 1
        return line

    def error(self, line_no: int, reason: str) -> ParseError:
        return ParseError(self.source, line_no, reason)

    def expect(self, keyword: str, n_args: Optional[int] = None) -> Line:
        line = self.next()
        if line.keyword != keyword:
            raise self.error(line.no, f"expected {keyword}, got {line.keyword}")
        self.check_arity(line, n_args)
        return line

    def check_arity(self, line: Line, n_args: Optional[int]) -> None:
        if n_args is not None and len(line.tokens) - 1 != n_args:
            raise self.error(line.no, f"{line.keyword} takes {n_args} argument(s), got {len(line.tokens) - 1}")

    def int_at(self, line: Line, index: int, minimum: Optional[int] = None) -> int:
        token = line.tokens[index]
        try:
            value = int(token)
        except ValueError:
            raise self.error(line.no, f"expected an integer, got {token!r}") from None
        if minimum is not None and value < minimum:
            raise self.error(line.no, f"expected an integer >= {minimum}, got {value}")
        return value

    def float_at(self, line: Line, index: int) -> float:
        token = line.tokens[index]
        try:
            return float(token)
        except ValueError:
            raise self.error(line.no, f"expected a number, got {token!r}") from None


def read_text(path: PathLike) -> str:
    return Path(path).read_text(encoding="utf-8")


def write_text(path: PathLike, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")
