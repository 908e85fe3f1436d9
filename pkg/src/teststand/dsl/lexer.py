"""Tokenizer for the test-description language."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from ..errors import ParseError


class TokenKind(enum.Enum):
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    NUMBER = "number"
    TIME_UNIT = "time_unit"
    STRING = "string_literal"
    OPERATOR = "operator"
    COMMENT = "comment"


# reserved words, stored folded; matching is case-insensitive
KEYWORDS = frozenset({
    "include", "definemacro", "endmacro", "callmacro",
    "testid", "endtestid", "constant", "time", "begin",
    "process", "endprocess", "loop", "endloop", "tag", "endtag",
    "wait", "for", "assert", "report", "severity",
    "measure", "to", "name", "rising_edge", "falling_edge",
    "stop", "after",
})

TIME_UNITS = frozenset({"ns", "us", "ms", "s"})

OPERATORS = ("<=", ":=", "=", ":", ";", "(", ")")


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    line: int
    column: int

    @property
    def folded(self):
        return self.text.casefold()

    def is_kw(self, *words):
        return self.kind is TokenKind.KEYWORD and self.folded in words

    def is_op(self, op):
        return self.kind is TokenKind.OPERATOR and self.text == op


def _is_word_char(c):
    return c.isascii() and (c.isalnum() or c == "_")


def tokenize(source: str, filename: str | None = None, keep_comments: bool = False) -> list[Token]:
    """Split ``source`` into tokens.

    Words made only of digits are numbers; any other word is an identifier or
    keyword, so test ids such as ``1_1_CHECK_BASIC_INTERLOCK`` lex as one
    identifier. A unit word directly after a number becomes a ``time_unit``.
    String literals use VHDL quoting (``""`` inside a literal is one quote)
    and may not span lines.
    """
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r\f\v" or c == "﻿":
            i += 1
            col += 1
            continue
        if source.startswith("--", i):
            end = source.find("\n", i)
            end = n if end < 0 else end
            if keep_comments:
                tokens.append(Token(TokenKind.COMMENT, source[i:end], line, col))
            col += end - i
            i = end
            continue
        if c == '"':
            start_col = col
            j = i + 1
            buf = []
            while True:
                if j >= n or source[j] == "\n":
                    raise ParseError("unterminated string literal", line, start_col, filename)
                if source[j] == '"':
                    if source.startswith('""', j):
                        buf.append('"')
                        j += 2
                        continue
                    break
                buf.append(source[j])
                j += 1
            tokens.append(Token(TokenKind.STRING, "".join(buf), line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if _is_word_char(c):
            j = i
            while j < n and _is_word_char(source[j]):
                j += 1
            word = source[i:j]
            if word.isdigit():
                kind = TokenKind.NUMBER
            elif word.casefold() in TIME_UNITS and tokens and tokens[-1].kind is TokenKind.NUMBER:
                kind = TokenKind.TIME_UNIT
            elif word.casefold() in KEYWORDS:
                kind = TokenKind.KEYWORD
            else:
                kind = TokenKind.IDENTIFIER
            tokens.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        for op in OPERATORS:
            if source.startswith(op, i):
                tokens.append(Token(TokenKind.OPERATOR, op, line, col))
                i += len(op)
                col += len(op)
                break
        else:
            raise ParseError(f"illegal character {c!r}", line, col, filename)
    return tokens
