"""Expression trees over constants, input variables and a few base operations.

Trees are immutable. ``size`` follows the complexity rule used for the
symbolic-regression tables: variables, constants, ``+``, ``-`` and ``*``
cost 1, ``/`` costs 2 and every unary function costs 4.

Text form is infix, e.g. ``1.51977 / (1.00625 + 0.0932972 * cos(x0 + 0.544536))``.
Variables are ``x<k>`` unless a list of names is supplied.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from keplaw.errors import ExpressionSyntaxError, UnboundVariableError

BINARY_OPS = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
UNARY_OPS = ("cos", "sin", "tan")
_SYMBOL_TO_OP = {v: k for k, v in BINARY_OPS.items()}
_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2}

# |denominator| below this is a domain fault.
DIV_FLOOR = 1e-300

SIZE_RULE = {"var": 1, "const": 1, "add": 1, "sub": 1, "mul": 1, "div": 2}
FUNCTION_SIZE = 4


@dataclass(frozen=True, slots=True)
class Constant:
    value: float


@dataclass(frozen=True, slots=True)
class Variable:
    index: int


@dataclass(frozen=True, slots=True)
class Unary:
    op: str
    arg: object


@dataclass(frozen=True, slots=True)
class Binary:
    op: str
    left: object
    right: object


def add(a, b):
    return Binary("add", a, b)


def sub(a, b):
    return Binary("sub", a, b)


def mul(a, b):
    return Binary("mul", a, b)


def div(a, b):
    return Binary("div", a, b)


def cos(a):
    return Unary("cos", a)


def is_fault(value):
    """True where an evaluation hit a domain fault (or overflowed)."""
    return ~np.isfinite(value)


def evaluate(expr, bindings):
    """Evaluate ``expr`` with one value (or array) per input variable.

    Division by ``|d| < 1e-300`` and overflow give NaN/inf rather than an
    exception; check results with :func:`is_fault`.
    """
    with np.errstate(all="ignore"):
        out = _eval(expr, bindings)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _eval(e, b):
    if isinstance(e, Binary):
        left = _eval(e.left, b)
        right = _eval(e.right, b)
        op = e.op
        if op == "add":
            return left + right
        if op == "sub":
            return left - right
        if op == "mul":
            return left * right
        bad = np.abs(right) < DIV_FLOOR
        if np.any(bad):
            return np.where(bad, np.nan, left / np.where(bad, 1.0, right))
        return left / right
    if isinstance(e, Constant):
        return np.float64(e.value)
    if isinstance(e, Variable):
        if e.index >= len(b):
            raise UnboundVariableError(f"x{e.index} is unbound ({len(b)} inputs given)")
        return np.asarray(b[e.index], dtype=float)
    if isinstance(e, Unary):
        arg = _eval(e.arg, b)
        if e.op == "cos":
            return np.cos(arg)
        if e.op == "sin":
            return np.sin(arg)
        if e.op == "tan":
            return np.tan(arg)
        raise ValueError(f"unknown function {e.op}")
    raise TypeError(f"not an expression node: {e!r}")


def size(expr):
    if isinstance(expr, Binary):
        return SIZE_RULE[expr.op] + size(expr.left) + size(expr.right)
    if isinstance(expr, Unary):
        return FUNCTION_SIZE + size(expr.arg)
    if isinstance(expr, Variable):
        return SIZE_RULE["var"]
    return SIZE_RULE["const"]


def depth(expr):
    if isinstance(expr, Binary):
        return 1 + max(depth(expr.left), depth(expr.right))
    if isinstance(expr, Unary):
        return 1 + depth(expr.arg)
    return 0


def variables(expr):
    """Set of variable indices used by ``expr``."""
    if isinstance(expr, Binary):
        return variables(expr.left) | variables(expr.right)
    if isinstance(expr, Unary):
        return variables(expr.arg)
    if isinstance(expr, Variable):
        return {expr.index}
    return set()


def constants(expr):
    """Constant values in left-to-right order."""
    out = []
    _collect_consts(expr, out)
    return out


def _collect_consts(e, out):
    if isinstance(e, Binary):
        _collect_consts(e.left, out)
        _collect_consts(e.right, out)
    elif isinstance(e, Unary):
        _collect_consts(e.arg, out)
    elif isinstance(e, Constant):
        out.append(e.value)


def with_constants(expr, values):
    """Copy of ``expr`` with its constants replaced, in :func:`constants` order."""
    it = iter(values)
    out = _replace_consts(expr, it)
    return out


def _replace_consts(e, it):
    if isinstance(e, Binary):
        return Binary(e.op, _replace_consts(e.left, it), _replace_consts(e.right, it))
    if isinstance(e, Unary):
        return Unary(e.op, _replace_consts(e.arg, it))
    if isinstance(e, Constant):
        return Constant(float(next(it)))
    return e


def fold_constants(expr):
    """Replace every variable-free subtree by its value (no algebraic identities).

    Subtrees whose value is not finite are left alone.
    """
    if isinstance(expr, Binary):
        left = fold_constants(expr.left)
        right = fold_constants(expr.right)
        node = Binary(expr.op, left, right)
        if isinstance(left, Constant) and isinstance(right, Constant):
            value = evaluate(node, ())
            if math.isfinite(value):
                return Constant(value)
        return node
    if isinstance(expr, Unary):
        arg = fold_constants(expr.arg)
        node = Unary(expr.op, arg)
        if isinstance(arg, Constant):
            value = evaluate(node, ())
            if math.isfinite(value):
                return Constant(value)
        return node
    return expr


# --- printing ---------------------------------------------------------------


def _fmt_const(value, digits):
    return format(value, f".{digits}g")


def to_text(expr, names=None, digits=17):
    """Infix text that :func:`parse` turns back into the identical tree."""
    return _to_text(expr, names, digits)


def _var_name(index, names):
    if names is not None and index < len(names):
        return names[index]
    return f"x{index}"


def _to_text(e, names, digits):
    if isinstance(e, Constant):
        return _fmt_const(e.value, digits)
    if isinstance(e, Variable):
        return _var_name(e.index, names)
    if isinstance(e, Unary):
        return f"{e.op}({_to_text(e.arg, names, digits)})"
    prec = _PREC[e.op]
    left = _to_text(e.left, names, digits)
    right = _to_text(e.right, names, digits)
    if isinstance(e.left, Binary) and _PREC[e.left.op] < prec:
        left = f"({left})"
    # Right operands of equal precedence are always bracketed so that the
    # parser's left associativity rebuilds the same tree.
    if isinstance(e.right, Binary) and _PREC[e.right.op] <= prec:
        right = f"({right})"
    return f"{left} {BINARY_OPS[e.op]} {right}"


def pretty(expr, names=None, digits=6):
    return to_text(expr, names, digits)


# --- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/()]))"
)


def _tokenize(text):
    pos = 0
    tokens = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            pos += len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, names):
        self.tokens = _tokenize(text)
        self.i = 0
        self.names = {n: k for k, n in enumerate(names)} if names else {}

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            what = "end of input" if kind == "end" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {what}", pos)

    def expression(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = _SYMBOL_TO_OP[self.take()[1]]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = _SYMBOL_TO_OP[self.take()[1]]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        kind, text, pos = self.peek()
        if kind == "op" and text in "+-":
            self.take()
            nxt = self.peek()
            if nxt[0] == "num":
                self.take()
                value = float(nxt[1])
                return Constant(-value if text == "-" else value)
            operand = self.unary()
            return operand if text == "+" else Binary("mul", Constant(-1.0), operand)
        return self.atom()

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Constant(float(text))
        if kind == "name":
            if self.peek()[1] == "(":
                if text not in UNARY_OPS:
                    raise ExpressionSyntaxError(f"unknown function {text!r}", pos)
                self.take()
                arg = self.expression()
                self.expect(")")
                return Unary(text, arg)
            if text in self.names:
                return Variable(self.names[text])
            if text in ("inf", "nan"):
                return Constant(float(text))
            m = re.fullmatch(r"x(\d+)", text)
            if m:
                return Variable(int(m.group(1)))
            raise ExpressionSyntaxError(f"unknown name {text!r}", pos)
        if text == "(":
            node = self.expression()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise ExpressionSyntaxError(f"unexpected {what}", pos)


def parse(text, names=None):
    """Parse infix text. ``names`` optionally maps identifiers to variable indices."""
    p = _Parser(text, names)
    node = p.expression()
    kind, tok, pos = p.peek()
    if kind != "end":
        raise ExpressionSyntaxError(f"unexpected {tok!r}", pos)
    return node
