"""
Arithmetic expressions over x1..xn.

Expressions define field coefficients, density weights and test functions in
config files. The parser is a small recursive-descent parser over a regex
tokenizer; trees are immutable and evaluate vectorised over numpy arrays.

Grammar (standard precedence, left associative)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := ('-' | '+') unary | power
    power    := atom ('^' exponent)*
    atom     := NUMBER | 'pi' | VAR | FUNC '(' expr ')' | '(' expr ')'
    exponent := ['-'] INTEGER | '(' ['-'] INTEGER ')'
"""

import logging
import math
import re
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnknownIdentifierError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

FUNCTIONS = ('sin', 'cos', 'exp', 'log', 'sqrt', 'abs', 'sign')
NAMED_CONSTANTS = {'pi': math.pi}

TOKEN_RE = re.compile(
    r'(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)'
    r'|(?P<name>[A-Za-z_][A-Za-z_0-9]*)'
    r'|(?P<op>[-+*/^()])'
)
VAR_RE = re.compile(r'x(\d+)')


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    def evaluate(self, x: ArrayLike):
        """Evaluate at a point (shape (n,)) or a batch of points (shape (N, n)).

        Returns a float for a single point and an array of shape (N,) for a
        batch. Raises DomainError when any entry leaves the domain of an
        elementary function or the result is not finite.
        """
        pts = np.asarray(x, dtype=float)
        single = pts.ndim <= 1
        if pts.ndim == 0:
            pts = pts.reshape(1)
        cols = list(pts) if single else list(pts.T)
        shape = () if single else (pts.shape[0],)
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            value = np.broadcast_to(np.asarray(self._ev(cols), dtype=float), shape)
        if not np.all(np.isfinite(value)):
            raise DomainError(f"non-finite result evaluating {self.to_text()}")
        return float(value) if single else np.array(value)

    def differentiate(self, k: int) -> 'Expr':
        return self._diff(k)

    def substitute(self, mapping: Mapping[int, 'Expr']) -> 'Expr':
        """Replace variable x_k by mapping[k] (variables not in mapping stay)."""
        return self._subst(mapping)

    def to_text(self) -> str:
        return self._text()

    def __str__(self) -> str:
        return self._text()

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0.0

    def max_variable(self) -> int:
        return 0

    # node protocol
    def _ev(self, cols):
        raise NotImplementedError

    def _diff(self, k: int) -> 'Expr':
        raise NotImplementedError

    def _subst(self, mapping):
        raise NotImplementedError

    def _text(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def _ev(self, cols):
        return self.value

    def _diff(self, k):
        return ZERO

    def _subst(self, mapping):
        return self

    def _text(self):
        text = repr(float(self.value))
        return f"({text})" if self.value < 0 or text.startswith('-') else text


@dataclass(frozen=True)
class Var(Expr):
    index: int

    def _ev(self, cols):
        return cols[self.index - 1]

    def _diff(self, k):
        return ONE if k == self.index else ZERO

    def _subst(self, mapping):
        return mapping.get(self.index, self)

    def _text(self):
        return f"x{self.index}"

    def max_variable(self):
        return self.index


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def _ev(self, cols):
        a = self.left._ev(cols)
        b = self.right._ev(cols)
        if self.op == '+':
            return a + b
        if self.op == '-':
            return a - b
        if self.op == '*':
            return a * b
        if np.any(np.asarray(b) == 0.0):
            raise DomainError(f"division by zero in {self.to_text()}")
        return a / b

    def _diff(self, k):
        u, v = self.left, self.right
        du, dv = u._diff(k), v._diff(k)
        if self.op == '+':
            return add(du, dv)
        if self.op == '-':
            return sub(du, dv)
        if self.op == '*':
            return add(mul(du, v), mul(u, dv))
        return div(sub(mul(du, v), mul(u, dv)), power(v, 2))

    def _subst(self, mapping):
        return BinOp(self.op, self.left._subst(mapping), self.right._subst(mapping))

    def _text(self):
        return f"({self.left._text()} {self.op} {self.right._text()})"

    def max_variable(self):
        return max(self.left.max_variable(), self.right.max_variable())


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def _ev(self, cols):
        b = self.base._ev(cols)
        if self.exponent < 0 and np.any(np.asarray(b) == 0.0):
            raise DomainError(f"zero raised to negative power in {self.to_text()}")
        return np.power(np.asarray(b, dtype=float), float(self.exponent))

    def _diff(self, k):
        k_exp = self.exponent
        return mul(mul(Const(float(k_exp)), power(self.base, k_exp - 1)), self.base._diff(k))

    def _subst(self, mapping):
        return Pow(self.base._subst(mapping), self.exponent)

    def _text(self):
        exp_text = str(self.exponent) if self.exponent >= 0 else f"({self.exponent})"
        return f"({self.base._text()} ^ {exp_text})"

    def max_variable(self):
        return self.base.max_variable()


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def _ev(self, cols):
        return -self.arg._ev(cols)

    def _diff(self, k):
        return neg(self.arg._diff(k))

    def _subst(self, mapping):
        return Neg(self.arg._subst(mapping))

    def _text(self):
        return f"(-{self.arg._text()})"

    def max_variable(self):
        return self.arg.max_variable()


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr

    def _ev(self, cols):
        u = np.asarray(self.arg._ev(cols), dtype=float)
        if self.name == 'sin':
            return np.sin(u)
        if self.name == 'cos':
            return np.cos(u)
        if self.name == 'exp':
            return np.exp(u)
        if self.name == 'log':
            if np.any(u <= 0.0):
                raise DomainError(f"log of non-positive value in {self.to_text()}")
            return np.log(u)
        if self.name == 'sqrt':
            if np.any(u < 0.0):
                raise DomainError(f"sqrt of negative value in {self.to_text()}")
            return np.sqrt(u)
        if self.name == 'abs':
            return np.abs(u)
        if np.any(u == 0.0):
            raise DomainError(f"sign is undefined at 0 in {self.to_text()}")
        return np.sign(u)

    def _diff(self, k):
        u = self.arg
        du = u._diff(k)
        if du.is_zero():
            return ZERO
        if self.name == 'sin':
            return mul(Func('cos', u), du)
        if self.name == 'cos':
            return neg(mul(Func('sin', u), du))
        if self.name == 'exp':
            return mul(self, du)
        if self.name == 'log':
            return div(du, u)
        if self.name == 'sqrt':
            return div(du, mul(Const(2.0), self))
        if self.name == 'abs':
            return mul(Func('sign', u), du)
        # sign' = 0 wherever sign is defined; keep the domain restriction
        return mul(ZERO_KEEP, Func('sign', u))

    def _subst(self, mapping):
        return Func(self.name, self.arg._subst(mapping))

    def _text(self):
        return f"{self.name}({self.arg._text()})"

    def max_variable(self):
        return self.arg.max_variable()


ZERO = Const(0.0)
ONE = Const(1.0)
# a zero that smart constructors do not fold away
ZERO_KEEP = BinOp('-', ONE, ONE)


# smart constructors: only trivial identities are folded

def add(a: Expr, b: Expr) -> Expr:
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return BinOp('+', a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if b.is_zero():
        return a
    if a.is_zero():
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return BinOp('-', a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if a.is_zero() or b.is_zero():
        return ZERO
    if isinstance(a, Const) and a.value == 1.0:
        return b
    if isinstance(b, Const) and b.value == 1.0:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return BinOp('*', a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Const) and b.value == 1.0:
        return a
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    return BinOp('/', a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a: Expr, k: int) -> Expr:
    if k == 0:
        return ONE
    if k == 1:
        return a
    if isinstance(a, Const) and (a.value != 0.0 or k > 0):
        return Const(a.value ** k)
    return Pow(a, k)


def const(value: float) -> Expr:
    return Const(float(value))


def var(index: int) -> Expr:
    return Var(int(index))


# parsing

class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _offset(self, char_pos: int) -> int:
        return len(self.text[:char_pos].encode('utf-8'))

    def _tokenize(self, text: str) -> List[Tuple[str, str, int]]:
        tokens = []
        i = 0
        while i < len(text):
            if text[i].isspace():
                i += 1
                continue
            m = TOKEN_RE.match(text, i)
            if m is None:
                raise ExprSyntaxError(f"invalid character {text[i]!r}", self._offset(i))
            kind = m.lastgroup
            tokens.append((kind, m.group(kind), i))
            i = m.end()
        return tokens

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def end_offset(self) -> int:
        return self._offset(len(self.text))

    def error(self, message: str, tok=None) -> ExprSyntaxError:
        offset = self._offset(tok[2]) if tok is not None else self.end_offset()
        return ExprSyntaxError(message, offset)

    def take(self):
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of expression")
        self.pos += 1
        return tok

    def expect(self, value: str):
        tok = self.peek()
        if tok is None or tok[1] != value:
            raise self.error(f"expected '{value}'", tok)
        self.pos += 1

    def parse(self) -> Expr:
        if not self.tokens:
            raise ExprSyntaxError("empty expression", 0)
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise self.error(f"unexpected token {tok[1]!r}", tok)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while (tok := self.peek()) is not None and tok[1] in ('+', '-'):
            self.pos += 1
            node = BinOp(tok[1], node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while (tok := self.peek()) is not None and tok[1] in ('*', '/'):
            self.pos += 1
            node = BinOp(tok[1], node, self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok[1] == '-':
            self.pos += 1
            return Neg(self.unary())
        if tok is not None and tok[1] == '+':
            self.pos += 1
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        while (tok := self.peek()) is not None and tok[1] == '^':
            self.pos += 1
            node = Pow(node, self.exponent())
        return node

    def exponent(self) -> int:
        paren = False
        tok = self.peek()
        if tok is not None and tok[1] == '(':
            paren = True
            self.pos += 1
        sign = 1
        tok = self.peek()
        if tok is not None and tok[1] in ('-', '+'):
            sign = -1 if tok[1] == '-' else 1
            self.pos += 1
        tok = self.take()
        if tok[0] != 'num' or not float(tok[1]).is_integer():
            raise self.error("exponent must be an integer constant", tok)
        if paren:
            self.expect(')')
        return sign * int(float(tok[1]))

    def atom(self) -> Expr:
        tok = self.take()
        kind, value, _ = tok
        if kind == 'num':
            return Const(float(value))
        if kind == 'name':
            if value in FUNCTIONS:
                self.expect('(')
                arg = self.expr()
                self.expect(')')
                return Func(value, arg)
            if value in NAMED_CONSTANTS:
                return Const(NAMED_CONSTANTS[value])
            m = VAR_RE.fullmatch(value)
            if m is None:
                raise UnknownIdentifierError(f"unknown identifier {value!r}", self._offset(tok[2]))
            index = int(m.group(1))
            if not 1 <= index <= self.n:
                raise ExprSyntaxError(
                    f"variable index {index} out of range for dimension {self.n}", self._offset(tok[2]))
            return Var(index)
        if value == '(':
            node = self.expr()
            self.expect(')')
            return node
        raise self.error(f"unexpected token {value!r}", tok)


def parse(text: str, n: int) -> Expr:
    """Parse text into an expression over x1..xn."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n}")
    node = _Parser(text, n).parse()
    logger.debug(f"parsed {text!r} -> {node.to_text()}")
    return node


def evaluate(e: Expr, x: ArrayLike):
    """Evaluate e at x (a point or a batch of points)."""
    return e.evaluate(x)


def differentiate(e: Expr, k: int) -> Expr:
    """Symbolic partial derivative with respect to x_k."""
    if k < 1:
        raise ValueError(f"variable index must be >= 1, got {k}")
    return e.differentiate(k)


def gradient(e: Expr, n: int) -> List[Expr]:
    return [e.differentiate(k) for k in range(1, n + 1)]


def as_expr(value: Union[Expr, str, float, int], n: int) -> Expr:
    """Accept an Expr, expression text or a number."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value, n)
    return Const(float(value))


def substitution_for_affine(matrix: np.ndarray, offset: np.ndarray) -> Dict[int, Expr]:
    """Mapping x_i -> sum_k matrix[i,k] x_k + offset[i] (1-based keys)."""
    mapping = {}
    rows, cols = matrix.shape
    for i in range(rows):
        term: Expr = Const(float(offset[i]))
        for k in range(cols):
            term = add(term, mul(Const(float(matrix[i, k])), Var(k + 1)))
        mapping[i + 1] = term
    return mapping
