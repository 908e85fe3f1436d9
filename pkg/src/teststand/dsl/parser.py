"""Recursive-descent parser producing a :class:`TestSuiteAst`."""

from __future__ import annotations

from ..errors import ParseError
from ..logic import Edge, LogicLevel
from .ast import (
    Assert, Assign, CallMacro, ConstantDef, ConstRef, Duration, Include, LoopBlock,
    MacroDef, Measure, ProcessAst, Severity, StopAfter, TagArm, TestAst, TestSuiteAst,
    WaitFor,
)
from .lexer import Token, TokenKind, tokenize

# block closers and the opener they balance
CLOSERS = {
    "endmacro": "DefineMacro",
    "endtestid": "TestID",
    "endprocess": "Process",
    "endloop": "Loop",
    "endtag": "Tag",
}
DISPLAY = {
    "endmacro": "EndMacro", "endtestid": "EndTestID", "endprocess": "EndProcess",
    "endloop": "EndLoop", "endtag": "EndTag",
}


class _Parser:
    def __init__(self, tokens, filename):
        self.tokens = [t for t in tokens if t.kind is not TokenKind.COMMENT]
        self.pos = 0
        self.filename = filename
        last = self.tokens[-1] if self.tokens else None
        self.eof = Token(TokenKind.OPERATOR, "<end of file>",
                         last.line if last else 1, (last.column + len(last.text)) if last else 1)
        self.constants = None  # name -> Duration while inside a test
        self.open_blocks = []  # closer sets of the statement blocks being parsed

    # -- token helpers -------------------------------------------------
    def peek(self, offset=0) -> Token:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else self.eof

    def at_end(self):
        return self.pos >= len(self.tokens)

    def advance(self) -> Token:
        tok = self.peek()
        if not self.at_end():
            self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ParseError(message, tok.line, tok.column, self.filename)

    def expect_kw(self, word, display=None):
        tok = self.peek()
        if not tok.is_kw(word):
            raise self.error(f"expected '{display or word}', found {_describe(tok)}")
        return self.advance()

    def expect_op(self, op):
        tok = self.peek()
        if not tok.is_op(op):
            raise self.error(f"expected '{op}', found {_describe(tok)}")
        return self.advance()

    def expect_ident(self, what):
        tok = self.peek()
        if tok.kind is not TokenKind.IDENTIFIER:
            raise self.error(f"expected {what}, found {_describe(tok)}")
        return self.advance()

    def expect_string(self, what):
        tok = self.peek()
        if tok.kind is not TokenKind.STRING:
            raise self.error(f"expected {what} string, found {_describe(tok)}")
        return self.advance()

    def opt_semi(self):
        if self.peek().is_op(";"):
            self.advance()

    # -- suite level ---------------------------------------------------
    def parse_suite(self) -> TestSuiteAst:
        includes, macros, tests = [], [], []
        macro_names, test_ids = {}, {}
        while not self.at_end():
            tok = self.peek()
            if tok.is_kw("include"):
                self.advance()
                path = self.expect_string("include path")
                self.opt_semi()
                includes.append(Include(path.text, tok.line, tok.column))
            elif tok.is_kw("definemacro"):
                m = self.parse_macro()
                key = m.name.casefold()
                if key in macro_names:
                    raise ParseError(f"duplicate macro {m.name!r} (first defined at line {macro_names[key]})",
                                     m.line, m.column, self.filename)
                macro_names[key] = m.line
                macros.append(m)
            elif tok.is_kw("testid"):
                t = self.parse_test()
                key = t.id.casefold()
                if key in test_ids:
                    raise ParseError(f"duplicate test id {t.id!r} (first defined at line {test_ids[key]})",
                                     t.line, t.column, self.filename)
                test_ids[key] = t.line
                tests.append(t)
            else:
                raise self._unexpected(tok, "at top level")
        return TestSuiteAst(tuple(includes), tuple(macros), tuple(tests), source=self.filename or "")

    def _unexpected(self, tok, where):
        if tok.kind is TokenKind.KEYWORD and tok.folded in CLOSERS:
            return self.error(f"unbalanced {DISPLAY[tok.folded]} without matching {CLOSERS[tok.folded]}", tok)
        if tok.kind is TokenKind.IDENTIFIER:
            return self.error(f"unknown keyword {tok.text!r} {where}", tok)
        return self.error(f"unexpected {_describe(tok)} {where}", tok)

    def parse_macro(self) -> MacroDef:
        start = self.expect_kw("definemacro", "DefineMacro")
        name = self.expect_ident("macro name")
        self.opt_semi()
        body = self.parse_block({"endmacro"}, in_macro=True)
        self.expect_kw("endmacro", "EndMacro")
        self.opt_semi()
        return MacroDef(name.text, body, start.line, start.column, source=self.filename or "")

    def parse_test(self) -> TestAst:
        start = self.expect_kw("testid", "TestID")
        tid = self.peek()
        if tid.kind not in (TokenKind.IDENTIFIER, TokenKind.NUMBER):
            raise self.error(f"expected test id, found {_describe(tid)}")
        self.advance()
        self.opt_semi()
        self.constants = {}
        constants = []
        try:
            while self.peek().is_kw("constant"):
                c = self.parse_constant()
                constants.append(c)
            if self.peek().is_kw("begin"):
                self.advance()
                self.opt_semi()
            processes = []
            while self.peek().is_kw("process"):
                processes.append(self.parse_process())
            tok = self.peek()
            if tok is self.eof:
                raise self.error("missing EndTestID for TestID " + repr(tid.text), start)
            if not tok.is_kw("endtestid"):
                if tok.is_kw("constant"):
                    raise self.error("constants must be declared before the first process", tok)
                raise self._unexpected(tok, "in test body")
            if not processes:
                raise self.error(f"test {tid.text!r} has no processes", start)
            self.advance()
            self.opt_semi()
        finally:
            self.constants = None
        self._check_measure_names(processes, start)
        return TestAst(tid.text, tuple(constants), tuple(processes), start.line, start.column,
                       source=self.filename or "")

    def _check_measure_names(self, processes, start):
        seen = {}
        for p in processes:
            for name, st in _measure_names(p.body):
                key = name.casefold()
                if key in seen:
                    raise ParseError(f"duplicate measure name {name!r} in test", st.line, st.column,
                                     self.filename)
                seen[key] = st

    def parse_constant(self) -> ConstantDef:
        start = self.expect_kw("constant")
        name = self.expect_ident("constant name")
        self.expect_op(":")
        self.expect_kw("time")
        self.expect_op(":=")
        dur = self.parse_duration(resolve=True)
        self.expect_op(";")
        key = name.text.casefold()
        if key in self.constants:
            raise ParseError(f"duplicate constant {name.text!r}", name.line, name.column, self.filename)
        self.constants[key] = dur
        return ConstantDef(name.text, dur, start.line, start.column)

    def parse_process(self) -> ProcessAst:
        start = self.expect_kw("process", "Process")
        name = self.expect_ident("process name")
        self.opt_semi()
        body = self.parse_block({"endprocess"})
        self.expect_kw("endprocess", "EndProcess")
        self.opt_semi()
        return ProcessAst(name.text, body, start.line, start.column)

    # -- statements ----------------------------------------------------
    def parse_block(self, closers, in_macro=False):
        want = DISPLAY[next(iter(sorted(closers)))]
        self.open_blocks.append(closers)
        body = []
        while True:
            tok = self.peek()
            if tok is self.eof:
                raise self.error(f"missing {want} before end of file")
            if tok.kind is TokenKind.KEYWORD and tok.folded in closers:
                self.open_blocks.pop()
                return tuple(body)
            if tok.kind is TokenKind.KEYWORD and any(tok.folded in c for c in self.open_blocks):
                # closes an enclosing block while this one is still open
                raise self.error(f"missing {want} before {DISPLAY[tok.folded]}", tok)
            body.append(self.parse_statement(in_macro))

    def parse_statement(self, in_macro):
        tok = self.peek()
        if tok.kind is TokenKind.IDENTIFIER:
            if self.peek(1).is_op("<="):
                return self.parse_assign()
            raise self._unexpected(tok, "in statement position")
        if tok.kind is not TokenKind.KEYWORD:
            raise self._unexpected(tok, "in statement position")
        word = tok.folded
        if word == "wait":
            self.advance()
            self.expect_kw("for")
            dur = self.parse_duration()
            self.expect_op(";")
            return WaitFor(dur, tok.line, tok.column)
        if word == "stop":
            self.advance()
            self.expect_kw("after")
            dur = self.parse_duration()
            self.expect_op(";")
            return StopAfter(dur, tok.line, tok.column)
        if word == "assert":
            return self.parse_assert()
        if word == "measure":
            return self.parse_measure()
        if word == "loop":
            return self.parse_loop(in_macro)
        if word == "callmacro":
            self.advance()
            name = self.expect_ident("macro name")
            self.opt_semi()
            return CallMacro(name.text, tok.line, tok.column)
        if word == "definemacro":
            where = "inside a macro" if in_macro else "inside a block"
            raise self.error(f"DefineMacro not allowed {where}", tok)
        raise self._unexpected(tok, "in statement position")

    def parse_assign(self):
        sig = self.advance()
        self.expect_op("<=")
        rhs = self.peek()
        if rhs.kind is TokenKind.IDENTIFIER:
            if rhs.folded not in ("ok", "nok"):
                raise self.error("signal-to-signal assignment not allowed; assign OK or NOK", rhs)
        else:
            raise self.error(f"expected OK or NOK, found {_describe(rhs)}", rhs)
        self.advance()
        self.expect_op(";")
        return Assign(sig.text, LogicLevel.from_literal(rhs.text), sig.line, sig.column)

    def parse_assert(self):
        start = self.advance()
        sig = self.expect_ident("signal name")
        if not self.peek().is_op("="):
            raise self.error("only 'SIGNAL = OK|NOK' assertions are supported")
        self.advance()
        rhs = self.peek()
        if rhs.kind is not TokenKind.IDENTIFIER or rhs.folded not in ("ok", "nok"):
            raise self.error("only 'SIGNAL = OK|NOK' assertions are supported", rhs)
        self.advance()
        message = "Assertion violation."
        severity = Severity.ERROR
        if self.peek().is_kw("report"):
            self.advance()
            message = self.expect_string("report message").text
        if self.peek().is_kw("severity"):
            self.advance()
            sev = self.expect_ident("severity level")
            try:
                severity = Severity[sev.text.upper()]
            except KeyError:
                raise self.error(f"unknown severity {sev.text!r} (NOTE, WARNING, ERROR or FAILURE)", sev) from None
        self.expect_op(";")
        return Assert(sig.text, LogicLevel.from_literal(rhs.text), message, severity, start.line, start.column)

    def parse_edge(self):
        tok = self.peek()
        if not tok.is_kw("rising_edge", "falling_edge"):
            raise self.error(f"expected rising_edge or falling_edge, found {_describe(tok)}")
        self.advance()
        self.expect_op("(")
        sig = self.expect_ident("signal name")
        self.expect_op(")")
        return (Edge.RISING if tok.folded == "rising_edge" else Edge.FALLING), sig.text

    def parse_measure(self):
        start = self.advance()
        t_edge, t_sig = self.parse_edge()
        self.expect_kw("to")
        s_edge, s_sig = self.parse_edge()
        self.expect_kw("name")
        name = self.expect_string("measurement name")
        if not name.text.strip():
            raise self.error("measurement name must not be empty", name)
        self.expect_op(";")
        return Measure(t_edge, t_sig, s_edge, s_sig, name.text, start.line, start.column)

    def parse_loop(self, in_macro):
        start = self.advance()
        self.opt_semi()
        arms = []
        seen = set()
        while self.peek().is_kw("tag"):
            tag_tok = self.advance()
            tag = self.expect_ident("tag name")
            if tag.folded in seen:
                raise self.error(f"duplicate tag {tag.text!r} in loop", tag)
            seen.add(tag.folded)
            self.opt_semi()
            body = self.parse_block({"endtag"}, in_macro)
            self.expect_kw("endtag", "EndTag")
            self.opt_semi()
            arms.append(TagArm(tag.text, body, tag_tok.line, tag_tok.column))
        tok = self.peek()
        if tok is self.eof:
            raise self.error("missing EndLoop before end of file")
        if not tok.is_kw("endloop"):
            if tok.kind is TokenKind.KEYWORD and tok.folded in CLOSERS:
                raise self.error(f"unbalanced {DISPLAY[tok.folded]} inside Loop (expected Tag or EndLoop)", tok)
            raise self.error(f"expected Tag or EndLoop, found {_describe(tok)}", tok)
        if not arms:
            raise self.error("Loop without any Tag", start)
        self.advance()
        self.opt_semi()
        return LoopBlock(tuple(arms), start.line, start.column)

    def parse_duration(self, resolve=False):
        tok = self.peek()
        if tok.kind is TokenKind.NUMBER:
            self.advance()
            unit = self.peek()
            if unit.kind is not TokenKind.TIME_UNIT:
                raise self.error(f"missing time unit after {tok.text}", unit)
            self.advance()
            dur = Duration(int(tok.text), unit.folded)
            if dur.value <= 0:
                raise self.error("duration must be positive", tok)
            if not dur.is_whole_ticks:
                raise self.error(f"duration {dur} is not a whole number of 1 us ticks", tok)
            return dur
        if tok.kind is TokenKind.IDENTIFIER:
            self.advance()
            if self.constants is not None:
                hit = self.constants.get(tok.folded)
                if hit is None:
                    raise self.error(f"constant {tok.text!r} is not defined (or used before its declaration)", tok)
                if resolve:
                    return hit
            return ConstRef(tok.text)
        raise self.error(f"expected a duration, found {_describe(tok)}", tok)


def _measure_names(statements):
    """(name, stmt) pairs; sibling loop arms may reuse a name since only one runs."""
    out = []
    for st in statements:
        if isinstance(st, Measure):
            out.append((st.name, st))
        elif isinstance(st, LoopBlock):
            merged = {}
            for idx, arm in enumerate(st.arms):
                for name, m in _measure_names(arm.body):
                    key = name.casefold()
                    if key in merged and merged[key][0] == idx:
                        out.append((name, m))
                    else:
                        merged.setdefault(key, (idx, name, m))
            out.extend((name, m) for _, name, m in merged.values())
    return out


def _describe(tok):
    if tok.kind is TokenKind.STRING:
        return f'string "{tok.text}"'
    if tok.text == "<end of file>":
        return "end of file"
    return f"{tok.kind.value} {tok.text!r}"


def parse_suite(tokens, filename=None) -> TestSuiteAst:
    return _Parser(tokens, filename).parse_suite()


def parse_text(source: str, filename=None) -> TestSuiteAst:
    return parse_suite(tokenize(source, filename), filename)
