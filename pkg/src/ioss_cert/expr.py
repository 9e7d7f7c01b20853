"""Scalar expression language for subsystem formulas.

Dynamics, outputs, Lyapunov candidates and comparison functions are given
as infix strings such as ``"-2*x1 + sin(x1 - x2)"``.  They are parsed once
into an immutable tree and then either walked (:func:`eval_expr`) or turned
into a plain Python function (:func:`compile_exprs`) for the integrator's
inner loop.

Precedence, tightest first: ``^`` (right associative, ``**`` accepted as an
alias), unary ``-``/``+``, ``*``/``/``, ``+``/``-``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence, Union

__all__ = [
    "Const",
    "Var",
    "Unary",
    "Binary",
    "ExprAst",
    "ExprError",
    "ExprSyntaxError",
    "UnknownVariableError",
    "UnknownFunctionError",
    "ArityError",
    "ExprEvalError",
    "parse_expr",
    "eval_expr",
    "compile_exprs",
    "to_string",
    "free_vars",
    "expand_sat",
    "count_internal",
]


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, text: str, pos: int, expected: str):
        self.text = text
        self.pos = pos
        self.expected = expected
        found = text[pos] if pos < len(text) else "end of input"
        super().__init__(f"syntax error at position {pos}: expected {expected}, found {found!r}")


class UnknownVariableError(ExprError):
    def __init__(self, name: str, allowed: Sequence[str], pos: int):
        self.name = name
        self.pos = pos
        super().__init__(
            f"unknown variable {name!r} at position {pos} (allowed: {', '.join(allowed) or 'none'})"
        )


class UnknownFunctionError(ExprError):
    def __init__(self, name: str, pos: int):
        self.name = name
        self.pos = pos
        super().__init__(f"unknown function {name!r} at position {pos}")


class ArityError(ExprError):
    def __init__(self, name: str, expected: int, got: int, pos: int):
        self.name = name
        super().__init__(f"{name}() takes {expected} argument(s), got {got} (position {pos})")


class ExprEvalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "ExprAst"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "ExprAst"
    right: "ExprAst"


ExprAst = Union[Const, Var, Unary, Binary]

UNARY_FUNCS = ("abs", "sin", "cos", "exp", "ln", "sqrt", "sat")
BINARY_FUNCS = ("min", "max")
_OPERATORS = {"+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow"}
_SYMBOLS = {v: k for k, v in _OPERATORS.items()}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(text, start, "number, name, operator or parenthesis")
        kind = m.lastgroup
        value = m.group(kind)
        if value == "**":
            value = "^"
        tokens.append((kind, value, m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, allowed: Sequence[str]):
        self.text = text
        self.allowed = list(allowed)
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.peek()
        if val != value or kind == "end":
            raise ExprSyntaxError(self.text, pos, repr(value))
        return self.advance()

    def parse(self) -> ExprAst:
        node = self.expr()
        kind, _, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(self.text, pos, "operator or end of input")
        return node

    def expr(self) -> ExprAst:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = _OPERATORS[self.advance()[1]]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> ExprAst:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = _OPERATORS[self.advance()[1]]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> ExprAst:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Unary("neg", self.unary())
        if kind == "op" and val == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> ExprAst:
        base = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.advance()
            # exponent may itself carry a sign: 2^-1
            return Binary("pow", base, self.unary())
        return base

    def atom(self) -> ExprAst:
        kind, val, pos = self.advance()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(val, pos)
            if val not in self.allowed:
                raise UnknownVariableError(val, self.allowed, pos)
            return Var(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(self.text, pos, "number, name or '('")

    def call(self, name: str, pos: int) -> ExprAst:
        if name not in UNARY_FUNCS and name not in BINARY_FUNCS:
            raise UnknownFunctionError(name, pos)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == "," and self.peek()[0] == "op":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        arity = 1 if name in UNARY_FUNCS else 2
        if len(args) != arity:
            raise ArityError(name, arity, len(args), pos)
        if arity == 1:
            return Unary(name, args[0])
        return Binary(name, args[0], args[1])


def parse_expr(text: str, vars: Iterable[str] = ()) -> ExprAst:
    """Parse ``text`` into an expression tree.

    Every free variable must appear in ``vars``; anything followed by ``(``
    is looked up as a builtin function instead.
    """
    if not text or not text.strip():
        raise ExprSyntaxError(text or "", 0, "non-empty expression")
    return _Parser(text, list(vars)).parse()


def free_vars(ast: ExprAst) -> set[str]:
    if isinstance(ast, Var):
        return {ast.name}
    if isinstance(ast, Const):
        return set()
    if isinstance(ast, Unary):
        return free_vars(ast.arg)
    return free_vars(ast.left) | free_vars(ast.right)


def count_internal(ast: ExprAst) -> int:
    if isinstance(ast, (Const, Var)):
        return 0
    if isinstance(ast, Unary):
        return 1 + count_internal(ast.arg)
    return 1 + count_internal(ast.left) + count_internal(ast.right)


def expand_sat(ast: ExprAst) -> ExprAst:
    """Rewrite every ``sat(e)`` as ``min(1, max(-1, e))``."""
    if isinstance(ast, (Const, Var)):
        return ast
    if isinstance(ast, Unary):
        arg = expand_sat(ast.arg)
        if ast.op == "sat":
            return Binary("min", Const(1.0), Binary("max", Unary("neg", Const(1.0)), arg))
        return Unary(ast.op, arg)
    return Binary(ast.op, expand_sat(ast.left), expand_sat(ast.right))


def _sat(x: float) -> float:
    return min(1.0, max(-1.0, x))


def _ln(x: float) -> float:
    if x <= 0.0:
        raise ExprEvalError(f"ln of non-positive value {x!r}")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise ExprEvalError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise ExprEvalError("division by zero")
    return a / b


def _pow(a: float, b: float) -> float:
    try:
        r = a**b
    except (OverflowError, ZeroDivisionError) as exc:
        raise ExprEvalError(f"{a!r}^{b!r}: {exc}") from None
    if isinstance(r, complex):
        raise ExprEvalError(f"{a!r}^{b!r} is not real")
    return r


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        raise ExprEvalError(f"exp overflow at {x!r}") from None


_UNARY_IMPL: dict[str, Callable[[float], float]] = {
    "neg": lambda x: -x,
    "abs": abs,
    "sin": math.sin,
    "cos": math.cos,
    "exp": _exp,
    "ln": _ln,
    "sqrt": _sqrt,
    "sat": _sat,
}

_BINARY_IMPL: dict[str, Callable[[float, float], float]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": _div,
    "pow": _pow,
    "min": min,
    "max": max,
}


def _walk(ast: ExprAst, env: Mapping[str, float]) -> float:
    if isinstance(ast, Const):
        return ast.value
    if isinstance(ast, Var):
        try:
            return float(env[ast.name])
        except KeyError:
            raise ExprEvalError(f"missing binding for variable {ast.name!r}") from None
    if isinstance(ast, Unary):
        return _UNARY_IMPL[ast.op](_walk(ast.arg, env))
    return _BINARY_IMPL[ast.op](_walk(ast.left, env), _walk(ast.right, env))


def eval_expr(ast: ExprAst, bindings: Mapping[str, float]) -> float:
    """Evaluate ``ast`` in IEEE double precision.

    Raises
    ------
    ExprEvalError
        On a missing binding, a domain error (``ln`` of a non-positive value,
        division by zero, ...) or any non-finite result.
    """
    value = _walk(ast, bindings)
    if not math.isfinite(value):
        raise ExprEvalError(f"non-finite result {value!r}")
    return value


_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def to_string(ast: ExprAst) -> str:
    """Render ``ast`` back to source text that reparses to the same tree."""
    return _show(ast)


def _show(ast: ExprAst) -> str:
    if isinstance(ast, Const):
        if ast.value < 0 or not math.isfinite(ast.value):
            # only reachable for programmatically built trees
            return f"({ast.value!r})"
        return repr(ast.value)
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Unary):
        if ast.op == "neg":
            inner = _show(ast.arg)
            if _prec(ast.arg) < _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{ast.op}({_show(ast.arg)})"
    if ast.op in BINARY_FUNCS:
        return f"{ast.op}({_show(ast.left)}, {_show(ast.right)})"
    p = _PREC[ast.op]
    left, right = _show(ast.left), _show(ast.right)
    if ast.op == "pow":
        # base must be an atom; exponent is parsed at unary level
        if _prec(ast.left) <= p:
            left = f"({left})"
        if _prec(ast.right) < _PREC["neg"]:
            right = f"({right})"
    else:
        if _prec(ast.left) < p:
            left = f"({left})"
        # left associativity: equal precedence on the right needs parentheses
        if _prec(ast.right) <= p:
            right = f"({right})"
    return f"{left} {_SYMBOLS[ast.op]} {right}"


def _prec(ast: ExprAst) -> int:
    if isinstance(ast, Unary):
        return _PREC["neg"] if ast.op == "neg" else 5
    if isinstance(ast, Binary):
        return _PREC.get(ast.op, 5)
    return 5


def _emit(ast: ExprAst, names: Mapping[str, str]) -> str:
    if isinstance(ast, Const):
        return repr(ast.value)
    if isinstance(ast, Var):
        return names[ast.name]
    if isinstance(ast, Unary):
        arg = _emit(ast.arg, names)
        if ast.op == "neg":
            return f"(-{arg})"
        if ast.op == "abs":
            return f"abs({arg})"
        return f"_{ast.op}({arg})"
    a, b = _emit(ast.left, names), _emit(ast.right, names)
    if ast.op in ("add", "sub", "mul"):
        return f"({a} {_SYMBOLS[ast.op]} {b})"
    if ast.op in BINARY_FUNCS:
        return f"{ast.op}({a}, {b})"
    return f"_{ast.op}({a}, {b})"


_COMPILE_ENV = {
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": _exp,
    "_ln": _ln,
    "_sqrt": _sqrt,
    "_sat": _sat,
    "_div": _div,
    "_pow": _pow,
    "_isfinite": math.isfinite,
    "_ExprEvalError": ExprEvalError,
}


def compile_exprs(asts: Sequence[ExprAst], vars: Sequence[str]) -> Callable[..., tuple[float, ...]]:
    """Turn several trees into one positional function returning a tuple.

    The generated function takes the variables in the order of ``vars`` and
    applies the same domain checks as :func:`eval_expr`.
    """
    names = {v: f"a{i}" for i, v in enumerate(vars)}
    if not asts:
        return lambda *args: ()
    for ast in asts:
        missing = free_vars(ast) - set(names)
        if missing:
            raise ExprEvalError(f"missing binding for variable(s) {sorted(missing)}")
    params = ", ".join(names[v] for v in vars)
    body = ", ".join(_emit(a, names) for a in asts)
    src = (
        f"def _f({params}):\n"
        f"    r = ({body}{',' if len(asts) == 1 else ''})\n"
        f"    for x in r:\n"
        f"        if not _isfinite(x):\n"
        f"            raise _ExprEvalError('non-finite result ' + repr(x))\n"
        f"    return r\n"
    )
    env = dict(_COMPILE_ENV)
    exec(compile(src, "<expr>", "exec"), env)
    return env["_f"]
