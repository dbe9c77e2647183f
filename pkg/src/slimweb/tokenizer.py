"""Best-effort JavaScript lexer that yields identifier tokens.

The lexer is total: it never raises on malformed input, it just degrades
to whatever identifiers it can still recognize. It exists to count API
names, not to parse programs, so the output is the flat ordered list of
identifier-shaped tokens (including property names and reserved words)
with the contents of comments, string literals, template-literal text
segments and recognizable regex literals stripped out.

Known approximations, all deliberate:

* identifiers are ASCII ``[A-Za-z_$][A-Za-z0-9_$]*``; exotic Unicode
  identifiers are split or skipped,
* a ``/`` in an ambiguous position is treated as division, and a regex
  literal is only consumed when the previous token makes division
  impossible,
* template interpolations ``${...}`` are lexed as code, the surrounding
  template text is not.
"""

from __future__ import annotations

import re

__all__ = ["tokenize"]

_IDENT = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_DIGITS = re.compile(r"[0-9]+")
_HEXISH = re.compile(r"0[xXbBoO][0-9a-fA-F]+")

# Previous-token kinds after which a `/` must be division, not a regex.
_NO_REGEX_AFTER = ("ident", "number", "close")


def tokenize(source: str | bytes) -> list[str]:
    """Lex ``source`` and return its identifier tokens in order."""
    if isinstance(source, bytes):
        source = source.decode("utf-8", errors="replace")

    tokens: list[str] = []
    i = 0
    n = len(source)
    prev = ""  # kind of the last significant token, for / disambiguation
    # Template nesting: each entry is the interpolation brace depth of an
    # enclosing `${`. Empty means we are in plain code.
    interp_stack: list[int] = []

    while i < n:
        ch = source[i]

        if ch in " \t\r\n\f\v":
            i += 1
            continue

        if ch == "/" and i + 1 < n:
            nxt = source[i + 1]
            if nxt == "/":
                j = source.find("\n", i + 2)
                i = n if j < 0 else j + 1
                continue
            if nxt == "*":
                j = source.find("*/", i + 2)
                i = n if j < 0 else j + 2
                continue
            if prev not in _NO_REGEX_AFTER:
                j = _scan_regex(source, i)
                if j > i:
                    i = j
                    prev = "close"
                    continue
            # division (or lone slash): fall through as punctuation

        if ch in "'\"":
            i = _scan_string(source, i)
            prev = "close"
            continue

        if ch == "`":
            i += 1
            # skip template text until `${`, backtick, or EOF
            while i < n:
                c = source[i]
                if c == "\\":
                    i += 2
                elif c == "`":
                    i += 1
                    prev = "close"
                    break
                elif c == "$" and i + 1 < n and source[i + 1] == "{":
                    interp_stack.append(0)
                    i += 2
                    prev = ""
                    break
                else:
                    i += 1
            continue

        m = _IDENT.match(source, i)
        if m:
            tokens.append(m.group())
            i = m.end()
            prev = "ident"
            continue

        if ch in "0123456789" or (
            ch == "." and i + 1 < n and source[i + 1] in "0123456789"
        ):
            i = _scan_number(source, i)
            prev = "number"
            continue

        if ch == "{":
            if interp_stack:
                interp_stack[-1] += 1
            i += 1
            prev = ""
            continue

        if ch == "}":
            i += 1
            if interp_stack:
                if interp_stack[-1] == 0:
                    # closes the `${`: resume scanning template text
                    interp_stack.pop()
                    while i < n:
                        c = source[i]
                        if c == "\\":
                            i += 2
                        elif c == "`":
                            i += 1
                            prev = "close"
                            break
                        elif c == "$" and i + 1 < n and source[i + 1] == "{":
                            interp_stack.append(0)
                            i += 2
                            prev = ""
                            break
                        else:
                            i += 1
                    continue
                interp_stack[-1] -= 1
            prev = "close"
            continue

        i += 1
        prev = "close" if ch in ")]" else ""

    return tokens


def _scan_string(source: str, i: int) -> int:
    """Skip a quoted string starting at ``i``; returns the index after it.

    Unterminated strings end at an unescaped newline (best effort) or EOF.
    """
    quote = source[i]
    i += 1
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\\":
            i += 2
        elif c == quote:
            return i + 1
        elif c == "\n":
            return i  # broken literal: resume lexing at the newline
        else:
            i += 1
    return n


def _scan_number(source: str, i: int) -> int:
    """Skip a numeric literal starting at ``i``."""
    n = len(source)
    m = _HEXISH.match(source, i)
    if m:
        i = m.end()
        if i < n and source[i] == "n":  # bigint suffix
            i += 1
        return i
    m = _DIGITS.match(source, i)
    i = m.end() if m else i
    if i < n and source[i] == "." :
        m = _DIGITS.match(source, i + 1)
        if m:
            i = m.end()
        elif source[i - 1].isdigit():
            i += 1  # trailing dot as in `1.`
    if i < n and source[i] in "eE":
        j = i + 1
        if j < n and source[j] in "+-":
            j += 1
        m = _DIGITS.match(source, j)
        if m:
            i = m.end()
    if i < n and source[i] == "n":
        i += 1
    return i


def _scan_regex(source: str, i: int) -> int:
    """Try to skip a regex literal at ``i``; return ``i`` if it is not one.

    A literal must close on the same line; otherwise the slash is left to
    be treated as division.
    """
    n = len(source)
    j = i + 1
    in_class = False
    while j < n:
        c = source[j]
        if c == "\\":
            j += 2
            continue
        if c == "\n":
            return i
        if in_class:
            if c == "]":
                in_class = False
        elif c == "[":
            in_class = True
        elif c == "/":
            j += 1
            while j < n and source[j].isalpha():  # flags
                j += 1
            return j
        j += 1
    return i
