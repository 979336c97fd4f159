"""Parser for the PVL/ODL keyword-value subset used by MSL Mastcam labels.

Supported constructs: ``KEY = value`` assignments, quoted strings, integers,
reals, ``<unit>`` annotations on numbers, parenthesized sequences (allowed to
span lines), brace sets, OBJECT/END_OBJECT and GROUP/END_GROUP blocks,
``/* comments */``, pointer keys (``^IMAGE``) and the terminal ``END``.
Anything outside this subset is rejected with a positioned error.

Parsing is total on well-formed input and the canonical dump re-parses to an
equal tree, preserving declaration order, units and value kinds.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .errors import PvlSyntaxError

_INT_RE = re.compile(r"[+-]?[0-9]+$")
_REAL_RE = re.compile(r"[+-]?(?:[0-9]+\.[0-9]*|\.[0-9]+|[0-9]+)(?:[eE][+-]?[0-9]+)?$")
# Bare symbols: dates, identifiers, version ids. Structural characters and
# whitespace end the token.
_SYMBOL_CHARS = set("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
                    "0123456789_.+-:/%#^$&@!?*~[]|;")


@dataclass(frozen=True)
class Scalar:
    """A single PVL value: integer, real, quoted string or bare symbol."""

    value: Union[int, float, str]
    unit: Optional[str] = None
    quoted: bool = False


@dataclass(frozen=True)
class Sequence:
    """Parenthesized, order-preserving list of values."""

    items: tuple = ()


@dataclass(frozen=True)
class SetValue:
    """Brace-delimited collection; order kept as written."""

    items: tuple = ()


Value = Union[Scalar, Sequence, SetValue]


class LabelTree:
    """Ordered keyword -> value/block mapping for one nesting level.

    ``kind`` is ROOT for the document, OBJECT or GROUP for nested blocks.
    Duplicate keywords at one level follow last-wins and are recorded in
    ``warnings``. Values are looked up by plain keyword or dotted path
    (``"IMAGE.LINES"`` descends into the IMAGE block).
    """

    def __init__(self, kind: str = "ROOT", name: Optional[str] = None):
        self.kind = kind
        self.name = name
        self.entries: dict[str, Union[Value, "LabelTree"]] = {}
        self.warnings: list[str] = []

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelTree):
            return NotImplemented
        if self.kind != other.kind or self.name != other.name:
            return False
        return list(self.entries.items()) == list(other.entries.items())

    def __repr__(self) -> str:
        return f"LabelTree(kind={self.kind!r}, name={self.name!r}, entries={list(self.entries)!r})"

    def __contains__(self, path: str) -> bool:
        return self.get(path) is not None

    def __getitem__(self, path: str) -> Union[Value, "LabelTree"]:
        found = self.get(path)
        if found is None:
            raise KeyError(path)
        return found

    def get(self, path: str, default=None):
        """Resolve a dotted path; each segment is a keyword or block name."""
        node: Union[Value, LabelTree] = self
        for segment in path.split("."):
            if not isinstance(node, LabelTree):
                return default
            if segment not in node.entries:
                return default
            node = node.entries[segment]
        return node

    def keys(self):
        return self.entries.keys()

    def items(self):
        return self.entries.items()


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # NAME, STRING, PUNCT, UNIT
    text: str
    line: int
    column: int


def _tokenize(text: str) -> Iterator[_Token]:
    i = 0
    n = len(text)
    line = 1
    col = 1

    def advance(k: int = 1):
        nonlocal i, line, col
        for _ in range(k):
            if i < n and text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance()
            continue
        if text.startswith("/*", i):
            start_line, start_col = line, col
            end = text.find("*/", i + 2)
            if end == -1:
                raise PvlSyntaxError("unterminated comment", start_line, start_col)
            advance(end + 2 - i)
            continue
        if ch in "\"'":
            start_line, start_col = line, col
            end = text.find(ch, i + 1)
            if end == -1:
                raise PvlSyntaxError("unterminated string", start_line, start_col)
            yield _Token("STRING", text[i + 1:end], start_line, start_col)
            advance(end + 1 - i)
            continue
        if ch == "<":
            start_line, start_col = line, col
            end = text.find(">", i + 1)
            if end == -1:
                raise PvlSyntaxError("unterminated unit annotation", start_line, start_col)
            yield _Token("UNIT", text[i + 1:end].strip(), start_line, start_col)
            advance(end + 1 - i)
            continue
        if ch in "(){},=":
            yield _Token("PUNCT", ch, line, col)
            advance()
            continue
        if ch in _SYMBOL_CHARS:
            start_line, start_col = line, col
            j = i
            while j < n and text[j] in _SYMBOL_CHARS:
                j += 1
            yield _Token("NAME", text[i:j], start_line, start_col)
            advance(j - i)
            continue
        raise PvlSyntaxError(f"unexpected character {ch!r}", line, col)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[_Token], on_duplicate: str):
        self.tokens = tokens
        self.pos = 0
        self.on_duplicate = on_duplicate

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> Optional[_Token]:
        tok = self.peek()
        if tok is not None:
            self.pos += 1
        return tok

    def expect_punct(self, char: str, context: str) -> _Token:
        tok = self.next()
        if tok is None or tok.kind != "PUNCT" or tok.text != char:
            where = tok or self.tokens[-1] if self.tokens else _Token("PUNCT", "", 1, 1)
            raise PvlSyntaxError(f"expected {char!r} {context}", where.line, where.column)
        return tok

    def parse_document(self) -> LabelTree:
        root = LabelTree("ROOT")
        self.parse_block_body(root, terminators=("END",))
        return root

    def parse_block_body(self, tree: LabelTree, terminators: tuple) -> Optional[str]:
        """Fill ``tree`` until END/END_OBJECT/END_GROUP; returns the terminator."""
        while True:
            tok = self.peek()
            if tok is None:
                if tree.kind == "ROOT":
                    return None  # implicit end of document
                raise PvlSyntaxError(
                    f"unterminated {tree.kind} {tree.name}",
                    self.tokens[-1].line, self.tokens[-1].column)
            if tok.kind != "NAME":
                raise PvlSyntaxError(f"expected keyword, got {tok.text!r}",
                                     tok.line, tok.column)
            keyword = tok.text.upper()
            if keyword == "END" and tree.kind != "ROOT":
                raise PvlSyntaxError(f"unterminated {tree.kind} {tree.name}",
                                     tok.line, tok.column)
            if keyword in terminators:
                self.next()
                if keyword in ("END_OBJECT", "END_GROUP"):
                    # Optional "= NAME" echo after the terminator.
                    nxt = self.peek()
                    if nxt is not None and nxt.kind == "PUNCT" and nxt.text == "=":
                        self.next()
                        name_tok = self.next()
                        if name_tok is None or name_tok.kind != "NAME":
                            raise PvlSyntaxError("expected block name after "
                                                 + keyword, tok.line, tok.column)
                return keyword
            self.next()
            self.expect_punct("=", f"after keyword {keyword}")
            if keyword in ("OBJECT", "GROUP"):
                name_tok = self.next()
                if name_tok is None or name_tok.kind != "NAME":
                    where = name_tok or tok
                    raise PvlSyntaxError(f"expected {keyword} name",
                                         where.line, where.column)
                block = LabelTree(keyword, name_tok.text.upper())
                end = self.parse_block_body(
                    block, terminators=(f"END_{keyword}",))
                if end != f"END_{keyword}":
                    raise PvlSyntaxError(f"unterminated {keyword} {block.name}",
                                         tok.line, tok.column)
                self._store(tree, block.name, block, tok)
                tree.warnings.extend(block.warnings)
            else:
                value = self.parse_value(tok)
                self._store(tree, keyword, value, tok)

    def _store(self, tree: LabelTree, key: str, value, tok: _Token) -> None:
        if key in tree.entries:
            msg = (f"duplicate keyword {key} at line {tok.line}; "
                   f"{'last' if self.on_duplicate == 'last' else 'first'} occurrence wins")
            if self.on_duplicate == "error":
                raise PvlSyntaxError(f"duplicate keyword {key}", tok.line, tok.column)
            tree.warnings.append(msg)
            if self.on_duplicate == "first":
                return
        tree.entries[key] = value

    def parse_value(self, ctx: _Token) -> Value:
        tok = self.next()
        if tok is None:
            raise PvlSyntaxError("missing value", ctx.line, ctx.column)
        if tok.kind == "PUNCT" and tok.text == "(":
            return Sequence(tuple(self.parse_items(")", tok)))
        if tok.kind == "PUNCT" and tok.text == "{":
            return SetValue(tuple(self.parse_items("}", tok)))
        return self.parse_scalar(tok)

    def parse_items(self, closer: str, open_tok: _Token) -> list:
        what = "sequence" if closer == ")" else "set"
        items: list[Value] = []
        first = True
        while True:
            tok = self.peek()
            if tok is None or (tok.kind == "NAME" and tok.text.upper() == "END"):
                raise PvlSyntaxError(f"unterminated {what}",
                                     open_tok.line, open_tok.column)
            if tok.kind == "PUNCT" and tok.text == closer:
                self.next()
                return items
            if not first:
                self.expect_punct(",", "between sequence elements")
                tok = self.peek()
                if tok is None:
                    raise PvlSyntaxError(f"unterminated {what}",
                                         open_tok.line, open_tok.column)
            items.append(self.parse_value(open_tok))
            first = False

    def parse_scalar(self, tok: _Token) -> Scalar:
        if tok.kind == "STRING":
            return Scalar(tok.text, quoted=True)
        if tok.kind != "NAME":
            raise PvlSyntaxError(f"expected value, got {tok.text!r}",
                                 tok.line, tok.column)
        value: Union[int, float, str]
        if _INT_RE.match(tok.text):
            value = int(tok.text)
        elif _REAL_RE.match(tok.text):
            value = float(tok.text)
        else:
            return Scalar(tok.text)
        nxt = self.peek()
        unit = None
        if nxt is not None and nxt.kind == "UNIT":
            self.next()
            unit = nxt.text
        return Scalar(value, unit=unit)


def parse_pvl(text: str, on_duplicate: str = "last") -> LabelTree:
    """Parse PVL label text into a :class:`LabelTree`.

    ``on_duplicate`` selects handling of repeated keywords at one nesting
    level: ``"last"`` (default) or ``"first"`` keep one occurrence and record
    a warning on the tree; ``"error"`` raises.
    """
    if on_duplicate not in ("last", "first", "error"):
        raise ValueError(f"on_duplicate must be last/first/error, got {on_duplicate!r}")
    tokens = list(_tokenize(text))
    return _Parser(tokens, on_duplicate).parse_document()


# ---------------------------------------------------------------------------
# Canonical serialization (round-trip support)
# ---------------------------------------------------------------------------

def _format_scalar(s: Scalar) -> str:
    if s.quoted:
        quote = '"' if '"' not in str(s.value) else "'"
        return f"{quote}{s.value}{quote}"
    if isinstance(s.value, bool):  # bool is an int subclass; not a PVL kind
        raise TypeError("boolean scalars are not representable in PVL")
    if isinstance(s.value, int):
        text = str(s.value)
    elif isinstance(s.value, float):
        text = repr(s.value)
    else:
        text = s.value
    if s.unit is not None:
        text += f" <{s.unit}>"
    return text


def _format_value(v: Value) -> str:
    if isinstance(v, Scalar):
        return _format_scalar(v)
    if isinstance(v, Sequence):
        return "(" + ", ".join(_format_value(item) for item in v.items) + ")"
    if isinstance(v, SetValue):
        return "{" + ", ".join(_format_value(item) for item in v.items) + "}"
    raise TypeError(f"not a PVL value: {v!r}")


def dump_pvl(tree: LabelTree) -> str:
    """Serialize a tree to canonical PVL text ending with END."""
    lines: list[str] = []

    def emit(node: LabelTree, indent: int) -> None:
        pad = "  " * indent
        for key, entry in node.entries.items():
            if isinstance(entry, LabelTree):
                lines.append(f"{pad}{entry.kind} = {entry.name}")
                emit(entry, indent + 1)
                lines.append(f"{pad}END_{entry.kind} = {entry.name}")
            else:
                lines.append(f"{pad}{key} = {_format_value(entry)}")

    emit(tree, 0)
    lines.append("END")
    return "\n".join(lines) + "\n"
