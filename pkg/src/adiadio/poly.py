"""Exact integer polynomials over nonnegative variables, plus the equation grammar.

A polynomial is a fully expanded map from exponent tuples to integer
coefficients.  Everything stays in Python ints so squared values remain exact
at any magnitude (the diagonal of the squared-polynomial Hamiltonian must not
round before we decide whether it is zero).
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass

__all__ = [
    "MAX_VARS",
    "MAX_TOTAL_DEGREE",
    "MAX_BOX_VOLUME",
    "ParseError",
    "Polynomial",
    "parse_equation",
    "evaluate",
    "shift_variables",
    "brute_force_search",
]

MAX_VARS = 16
MAX_TOTAL_DEGREE = 20
MAX_BOX_VOLUME = 2_000_000


class ParseError(ValueError):
    """Equation text rejected.  `position` is a 0-based character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})")
        self.position = position


@dataclass(frozen=True)
class Polynomial:
    """Expanded integer polynomial in `num_vars` nonnegative unknowns.

    `terms` maps exponent tuples (length num_vars) to nonzero integer
    coefficients.  `var_names` records first-appearance order from the source
    text, which fixes the variable-to-mode assignment everywhere downstream.
    """

    num_vars: int
    terms: dict[tuple[int, ...], int]
    var_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.var_names) != self.num_vars:
            raise ValueError("var_names length does not match num_vars")
        for exps, coeff in self.terms.items():
            if len(exps) != self.num_vars:
                raise ValueError(f"exponent tuple {exps} has wrong length")
            if coeff == 0:
                raise ValueError("zero coefficient stored in terms")
            if any(e < 0 for e in exps):
                raise ValueError("negative exponent")

    @property
    def total_degree(self) -> int:
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def constant_value(self) -> int:
        """Value of a constant polynomial (0 for the empty one)."""
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return self.terms.get((0,) * self.num_vars, 0)

    def to_text(self) -> str:
        """Canonical rendering, graded-lex descending; parses back to self."""
        if not self.terms:
            return "0"
        keys = sorted(self.terms, key=lambda e: (sum(e), e), reverse=True)
        pieces: list[str] = []
        for i, exps in enumerate(keys):
            coeff = self.terms[exps]
            factors = []
            for name, e in zip(self.var_names, exps):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            mag = abs(coeff)
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([str(mag)] + factors)
            if i == 0:
                pieces.append(body if coeff > 0 else f"-{body}")
            else:
                pieces.append(f"+ {body}" if coeff > 0 else f"- {body}")
        return " ".join(pieces)

    def __str__(self) -> str:
        return self.to_text()


# ---------------------------------------------------------------------------
# term-dict arithmetic (module-private; dicts map exponent tuple -> int)

def _add(a: dict, b: dict) -> dict:
    out = dict(a)
    for exps, c in b.items():
        s = out.get(exps, 0) + c
        if s:
            out[exps] = s
        else:
            out.pop(exps, None)
    return out


def _neg(a: dict) -> dict:
    return {exps: -c for exps, c in a.items()}


def _mul(a: dict, b: dict, max_degree: int, pos: int) -> dict:
    out: dict[tuple[int, ...], int] = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            exps = tuple(x + y for x, y in zip(ea, eb))
            if sum(exps) > max_degree:
                raise ParseError(
                    f"total degree exceeds the cap of {max_degree}", pos)
            s = out.get(exps, 0) + ca * cb
            if s:
                out[exps] = s
            else:
                out.pop(exps, None)
    return out


# ---------------------------------------------------------------------------
# tokenizer / recursive-descent parser
#
# expr   := ('-')? term (('+' | '-') term)*
# term   := factor (('*' | juxtaposition) factor)*
# factor := base ('^' INT)?
# base   := INT | VAR | '(' expr ')'
#
# An optional '=' <expr> suffix is folded by subtraction, so "x = 6" and
# "x - 6 = 0" both mean x - 6.

_INT_RE = re.compile(r"[0-9]+")
_NAME_RE = re.compile(r"[a-z][a-z0-9]*")
_OPERATOR_CHARS = set("+-*^()=")
_REJECT_OPERATORS = set("/%!<>|&~")


@dataclass(frozen=True)
class _Token:
    kind: str  # "int" | "name" | "op" | "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit():
            m = _INT_RE.match(text, i)
            end = m.end()
            if end < n and text[end] == ".":
                raise ParseError("non-integer literal", i)
            tokens.append(_Token("int", m.group(), i))
            i = end
            continue
        if "a" <= ch <= "z":
            m = _NAME_RE.match(text, i)
            tokens.append(_Token("name", m.group(), i))
            i = m.end()
            continue
        if ch == ".":
            raise ParseError("non-integer literal", i)
        if ch in _OPERATOR_CHARS:
            tokens.append(_Token("op", ch, i))
            i += 1
            continue
        if ch in _REJECT_OPERATORS:
            raise ParseError(f"unknown operator '{ch}'", i)
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], var_index: dict[str, int],
                 num_vars: int, max_degree: int):
        self.tokens = tokens
        self.k = 0
        self.var_index = var_index
        self.num_vars = num_vars
        self.max_degree = max_degree
        self.zero_exps = (0,) * num_vars

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def take(self) -> _Token:
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expr(self) -> dict:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.take()
            acc = _neg(self.term())
        else:
            acc = self.term()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in "+-":
                self.take()
                rhs = self.term()
                acc = _add(acc, rhs if tok.text == "+" else _neg(rhs))
            else:
                return acc

    def term(self) -> dict:
        acc = self.factor()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text == "*":
                op_pos = self.take().pos
                acc = _mul(acc, self.factor(), self.max_degree, op_pos)
            elif tok.kind in ("int", "name") or (tok.kind == "op" and tok.text == "("):
                # juxtaposition, e.g. "2x" or "3(x + 1)"
                acc = _mul(acc, self.factor(), self.max_degree, tok.pos)
            else:
                return acc

    def factor(self) -> dict:
        base = self.base()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            op_pos = self.take().pos
            exp_tok = self.peek()
            if exp_tok.kind != "int":
                raise ParseError("exponent must be a nonnegative integer",
                                 exp_tok.pos)
            self.take()
            power = int(exp_tok.text)
            if power > self.max_degree:
                raise ParseError(
                    f"total degree exceeds the cap of {self.max_degree}", op_pos)
            acc = {self.zero_exps: 1}
            for _ in range(power):
                acc = _mul(acc, base, self.max_degree, op_pos)
            return acc
        return base

    def base(self) -> dict:
        tok = self.take()
        if tok.kind == "int":
            value = int(tok.text)
            return {self.zero_exps: value} if value else {}
        if tok.kind == "name":
            idx = self.var_index[tok.text]
            exps = tuple(1 if i == idx else 0 for i in range(self.num_vars))
            return {exps: 1}
        if tok.kind == "op" and tok.text == "(":
            inner = self.expr()
            closing = self.take()
            if not (closing.kind == "op" and closing.text == ")"):
                raise ParseError("expected ')'", closing.pos)
            return inner
        if tok.kind == "end":
            raise ParseError("unexpected end of input", tok.pos)
        raise ParseError(f"unexpected token {tok.text!r}", tok.pos)


def parse_equation(text: str, constants: dict[str, int] | None = None,
                   max_vars: int = MAX_VARS,
                   max_degree: int = MAX_TOTAL_DEGREE) -> Polynomial:
    """Parse equation text into an expanded Polynomial.

    `constants` maps names to integer values; they are substituted as whole
    identifiers before variables are assigned.  Variables are numbered by
    first appearance.  An optional "= <expr>" suffix is moved to the left-hand
    side.  Raises ParseError with a character position on any rejection.
    """
    constants = constants or {}
    for name, value in constants.items():
        if not _NAME_RE.fullmatch(name):
            raise ValueError(f"invalid constant name {name!r}")
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValueError(f"constant {name!r} must be an int")

    raw = _tokenize(text)
    tokens: list[_Token] = []
    for tok in raw:
        if tok.kind == "name" and tok.text in constants:
            value = constants[tok.text]
            if value < 0:
                # keep the substituted value atomic: -c parses as (0 - c) only
                # at expression level, so negative constants become (neg)
                tokens.append(_Token("op", "(", tok.pos))
                tokens.append(_Token("op", "-", tok.pos))
                tokens.append(_Token("int", str(-value), tok.pos))
                tokens.append(_Token("op", ")", tok.pos))
            else:
                tokens.append(_Token("int", str(value), tok.pos))
        else:
            tokens.append(tok)

    names: list[str] = []
    for tok in tokens:
        if tok.kind == "name" and tok.text not in names:
            names.append(tok.text)
            if len(names) > max_vars:
                raise ParseError(
                    f"more than {max_vars} variables", tok.pos)
    var_index = {name: i for i, name in enumerate(names)}
    num_vars = len(names)

    parser = _Parser(tokens, var_index, num_vars, max_degree)
    lhs = parser.expr()
    tok = parser.peek()
    if tok.kind == "op" and tok.text == "=":
        parser.take()
        rhs = parser.expr()
        lhs = _add(lhs, _neg(rhs))
        tok = parser.peek()
    if tok.kind != "end":
        raise ParseError(f"unexpected token {tok.text!r}", tok.pos)

    return Polynomial(num_vars=num_vars, terms=lhs, var_names=tuple(names))


# ---------------------------------------------------------------------------
# operations

def evaluate(p: Polynomial, point: tuple[int, ...] | list[int]) -> int:
    """Exact integer value of p at a point with nonnegative int coordinates."""
    pt = tuple(point)
    if len(pt) != p.num_vars:
        raise ValueError(
            f"point has {len(pt)} coordinates, expected {p.num_vars}")
    for x in pt:
        if not isinstance(x, int) or isinstance(x, bool) or x < 0:
            raise ValueError(f"coordinate {x!r} is not a nonnegative int")
    total = 0
    for exps, coeff in p.terms.items():
        v = coeff
        for x, e in zip(pt, exps):
            if e:
                v *= x ** e
        total += v
    return total


def shift_variables(p: Polynomial, offsets: tuple[int, ...] | list[int]) -> Polynomial:
    """Expanded polynomial q with q(x) = p(x + offsets), exact coefficients."""
    offs = tuple(offsets)
    if len(offs) != p.num_vars:
        raise ValueError(
            f"got {len(offs)} offsets, expected {p.num_vars}")
    for o in offs:
        if not isinstance(o, int) or isinstance(o, bool):
            raise ValueError(f"offset {o!r} is not an int")

    zero = (0,) * p.num_vars
    out: dict[tuple[int, ...], int] = {}
    for exps, coeff in p.terms.items():
        # expand prod_i (x_i + o_i)^{e_i} one variable at a time
        partial = {zero: coeff}
        for i, (e, o) in enumerate(zip(exps, offs)):
            if e == 0:
                continue
            nxt: dict[tuple[int, ...], int] = {}
            for k in range(e + 1):
                c = math.comb(e, k) * o ** (e - k)
                if c == 0:
                    continue
                for pe, pc in partial.items():
                    ne = list(pe)
                    ne[i] += k
                    key = tuple(ne)
                    s = nxt.get(key, 0) + pc * c
                    if s:
                        nxt[key] = s
                    else:
                        nxt.pop(key, None)
            partial = nxt
        for key, c in partial.items():
            s = out.get(key, 0) + c
            if s:
                out[key] = s
            else:
                out.pop(key, None)
    return Polynomial(num_vars=p.num_vars, terms=out, var_names=p.var_names)


def brute_force_search(p: Polynomial, box: tuple[int, ...] | list[int],
                       volume_cap: int = MAX_BOX_VOLUME) -> list[tuple[int, ...]]:
    """All zeros of p in the box {0..box[0]} x ... x {0..box[K-1]}, lex order.

    The box volume (product of box[i]+1) must stay at or below volume_cap.
    """
    bounds = tuple(box)
    if len(bounds) != p.num_vars:
        raise ValueError(
            f"box has {len(bounds)} bounds, expected {p.num_vars}")
    for b in bounds:
        if not isinstance(b, int) or isinstance(b, bool) or b < 0:
            raise ValueError(f"box bound {b!r} is not a nonnegative int")
    volume = math.prod(b + 1 for b in bounds)
    if volume > volume_cap:
        raise ValueError(
            f"box volume {volume} exceeds the cap of {volume_cap}")
    if p.num_vars == 0:
        return [()] if p.constant_value() == 0 else []
    hits: list[tuple[int, ...]] = []
    for pt in itertools.product(*(range(b + 1) for b in bounds)):
        if evaluate(p, pt) == 0:
            hits.append(pt)
    return hits
