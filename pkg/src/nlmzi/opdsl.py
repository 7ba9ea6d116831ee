"""A small textual operator-expression language.

Scenario configs declare observables as strings like
``"sz_A * c3 * c2A + h.c."`` which lower to SparseOperators without code
changes.  Grammar (whitespace insignificant, ``*`` required between
atoms):

    expr    := sum ("+" "h.c.")?
    sum     := ("-")? term (("+"|"-") term)*
    term    := factor ("*" factor)*
    factor  := scalar | atom | "(" sum ")"
    atom    := IDENT "'"?            trailing apostrophe = adjoint
    scalar  := NUMBER | NUMBER "i" | "i"
    IDENT   := [A-Za-z_][A-Za-z0-9_]*

``i`` is reserved for the imaginary unit.  A trailing ``+ h.c.`` adds the
adjoint of the entire preceding expression, making the lowered operator
Hermitian by construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .hspace import HilbertSpace
from .operators import SparseOperator, create, destroy, identity, pauli

__all__ = [
    "OperatorSyntaxError",
    "OpExpr",
    "Scalar",
    "Sym",
    "Prod",
    "Sum",
    "HermitianClosure",
    "parse",
    "to_text",
    "lower",
]


class OperatorSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Scalar:
    value: complex


@dataclass(frozen=True)
class Sym:
    name: str
    adjoint: bool = False


@dataclass(frozen=True)
class Prod:
    factors: tuple


@dataclass(frozen=True)
class Sum:
    # tuple of (sign, node) with sign in {+1, -1}
    terms: tuple


@dataclass(frozen=True)
class HermitianClosure:
    inner: object


OpExpr = object  # union of the node dataclasses above

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<hc>h\.c\.)
  | (?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[+\-*()'])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    line, col = 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise OperatorSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        val = m.group()
        if kind != "ws":
            if kind == "number" and pos + len(val) < len(text) and text[pos + len(val)] == "i":
                nxt = text[pos + len(val) + 1 : pos + len(val) + 2]
                if not re.match(r"[A-Za-z0-9_.]", nxt or " "):
                    val += "i"
                    kind = "imag_number"
                    m = None
            tokens.append((kind, val, line, col))
        span = len(val) if m is None else m.end() - pos
        for ch in text[pos : pos + span]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        pos += span
    tokens.append(("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def next(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def fail(self, message):
        kind, val, line, col = self.peek()
        shown = val if kind != "eof" else "end of input"
        raise OperatorSyntaxError(f"{message}, found {shown!r}", line, col)

    def expect_op(self, symbol):
        kind, val, line, col = self.peek()
        if kind == "op" and val == symbol:
            return self.next()
        self.fail(f"expected {symbol!r}")

    def parse_expr(self):
        node = self.parse_sum()
        kind, val, _, _ = self.peek()
        if kind == "op" and val == "+" and self.tokens[self.k + 1][0] == "hc":
            self.next()
            self.next()
            node = HermitianClosure(node)
        if self.peek()[0] != "eof":
            self.fail("unexpected trailing input")
        return node

    def parse_sum(self):
        terms = []
        sign = 1
        if self.peek()[:2] == ("op", "-"):
            self.next()
            sign = -1
        terms.append((sign, self.parse_term()))
        while True:
            kind, val, _, _ = self.peek()
            if kind == "op" and val in "+-":
                if val == "+" and self.tokens[self.k + 1][0] == "hc":
                    break
                self.next()
                terms.append((1 if val == "+" else -1, self.parse_term()))
            else:
                break
        if len(terms) == 1 and terms[0][0] == 1:
            return terms[0][1]
        return Sum(tuple(terms))

    def parse_term(self):
        factors = [self.parse_factor()]
        while self.peek()[:2] == ("op", "*"):
            self.next()
            factors.append(self.parse_factor())
        if len(factors) == 1:
            return factors[0]
        return Prod(tuple(factors))

    def parse_factor(self):
        kind, val, line, col = self.peek()
        if kind == "number":
            self.next()
            return Scalar(complex(float(val)))
        if kind == "imag_number":
            self.next()
            return Scalar(complex(0.0, float(val[:-1])))
        if kind == "ident":
            self.next()
            if val == "i":
                return Scalar(1j)
            adjoint = False
            if self.peek()[:2] == ("op", "'"):
                self.next()
                adjoint = True
            return Sym(val, adjoint)
        if kind == "op" and val == "(":
            self.next()
            inner = self.parse_sum()
            if self.peek()[:2] != ("op", ")"):
                self.fail("unbalanced parentheses: expected ')'")
            self.next()
            return inner
        self.fail("expected a scalar, symbol, or '('")


def parse(text: str) -> OpExpr:
    """Parse an operator expression; raises OperatorSyntaxError on bad input."""
    return _Parser(_tokenize(text)).parse_expr()


def _fmt_scalar(z: complex) -> str:
    if z.imag == 0.0:
        return repr(z.real)
    if z.real == 0.0:
        return "i" if z.imag == 1.0 else f"{z.imag!r}i"
    # not grammar-expressible as one literal; render as a parenthesised sum
    return f"({z.real!r} + {z.imag!r}i)"


def to_text(node: OpExpr) -> str:
    """Render an AST back to the textual form (inverse of parse on its image)."""
    if isinstance(node, Scalar):
        return _fmt_scalar(node.value)
    if isinstance(node, Sym):
        return node.name + ("'" if node.adjoint else "")
    if isinstance(node, Prod):
        return " * ".join(
            f"({to_text(f)})" if isinstance(f, (Sum, HermitianClosure)) else to_text(f)
            for f in node.factors
        )
    if isinstance(node, Sum):
        parts = []
        for j, (sign, sub) in enumerate(node.terms):
            txt = to_text(sub)
            if isinstance(sub, Sum):
                txt = f"({txt})"
            if j == 0:
                parts.append(("-" if sign < 0 else "") + txt)
            else:
                parts.append(("- " if sign < 0 else "+ ") + txt)
        return " ".join(parts)
    if isinstance(node, HermitianClosure):
        return to_text(node.inner) + " + h.c."
    raise TypeError(f"not an operator expression node: {node!r}")


def lower(expr: OpExpr, space: HilbertSpace, symbols: dict) -> SparseOperator:
    """Lower an AST to a SparseOperator on `space`.

    `symbols` maps identifiers to ``(kind, label)`` with kind one of
    "boson", "pauli_x", "pauli_y", "pauli_z".  A trailing "+ h.c." sets
    the Hermitian hint on the result.
    """
    if isinstance(expr, HermitianClosure):
        half = _lower_node(expr.inner, space, symbols)
        op = _as_operator(half, space)
        out = op + op.H
        return SparseOperator(space, out.matrix, hermitian_hint=True)
    return _as_operator(_lower_node(expr, space, symbols), space)


def _as_operator(val, space) -> SparseOperator:
    if isinstance(val, SparseOperator):
        return val
    return complex(val) * identity(space)


def _lower_node(node, space, symbols):
    """Returns either a complex scalar or a SparseOperator."""
    if isinstance(node, Scalar):
        return node.value
    if isinstance(node, Sym):
        return _lower_symbol(node, space, symbols)
    if isinstance(node, Prod):
        scal = 1.0 + 0.0j
        op = None
        for f in node.factors:
            v = _lower_node(f, space, symbols)
            if isinstance(v, SparseOperator):
                op = v if op is None else op @ v
            else:
                scal *= v
        if op is None:
            return scal
        return scal * op if scal != 1.0 else op
    if isinstance(node, Sum):
        acc = None
        for sign, sub in node.terms:
            v = _as_operator(_lower_node(sub, space, symbols), space)
            v = v if sign > 0 else -v
            acc = v if acc is None else acc + v
        return acc
    if isinstance(node, HermitianClosure):
        raise ValueError("'+ h.c.' is only allowed at the top level of an expression")
    raise TypeError(f"not an operator expression node: {node!r}")


def _lower_symbol(sym: Sym, space, symbols) -> SparseOperator:
    try:
        kind, label = symbols[sym.name]
    except KeyError:
        raise KeyError(
            f"symbol {sym.name!r} is not defined for this scenario "
            f"(known: {sorted(symbols)})"
        ) from None
    if kind == "boson":
        return create(space, label) if sym.adjoint else destroy(space, label)
    if kind in ("pauli_x", "pauli_y", "pauli_z"):
        # Pauli operators are self-adjoint; the adjoint marker is a no-op
        return pauli(space, label, kind[-1])
    raise ValueError(f"unknown symbol kind {kind!r} for {sym.name!r}")
