"""Lexer, parser and printer for the test-description language."""

from .ast import (
    Assert, Assign, CallMacro, ConstantDef, ConstRef, Duration, Include, LoopBlock,
    MacroDef, Measure, ProcessAst, Severity, StopAfter, TagArm, TestAst, TestSuiteAst,
    WaitFor, walk,
)
from .lexer import Token, TokenKind, tokenize
from .parser import parse_suite, parse_text
from .printer import format_statements, format_suite, format_test

__all__ = [
    "Assert", "Assign", "CallMacro", "ConstantDef", "ConstRef", "Duration", "Include",
    "LoopBlock", "MacroDef", "Measure", "ProcessAst", "Severity", "StopAfter", "TagArm",
    "TestAst", "TestSuiteAst", "Token", "TokenKind", "WaitFor", "format_statements",
    "format_suite", "format_test", "parse_suite", "parse_text", "tokenize", "walk",
]
