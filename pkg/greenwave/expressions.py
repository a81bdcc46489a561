"""
Greenwave Expression Parser
Parses config expression strings into numpy-evaluable trees with symbolic
differentiation
"""

import math
import re
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Union

import numpy as np

VARIABLES = ("x", "t", "u", "ux", "ut")
CONSTANTS = {"pi": math.pi}
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}

TOKEN_PATTERN = re.compile(
    r"\s*(?:(?P<number>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


class ExpressionError(ValueError):
    """Raised for malformed expressions"""


@dataclass(frozen=True)
class Number:
    value: float

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Unary:
    operand: "Node"

    def __str__(self):
        return f"(-{self.operand})"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"

    def __str__(self):
        return f"{self.func}({self.arg})"


Node = Union[Number, Variable, Unary, Binary, Call]


def tokenize(text: str) -> List[str]:
    """Split an expression into number, name and operator tokens"""
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        match = TOKEN_PATTERN.match(text, pos)
        if not match or match.end() == pos:
            raise ExpressionError(
                f"Unexpected character '{text[pos:].strip()[:1]}' "
                f"at position {pos}"
            )
        tokens.append(match.group(match.lastgroup))
        pos = match.end()
    return tokens


class ExpressionParser:
    """
    Recursive-descent parser for the grammar

        expr    := term (('+' | '-') term)*
        term    := unary (('*' | '/') unary)*
        unary   := ('-' | '+') unary | power
        power   := primary ('^' unary)?
        primary := number | name | func '(' expr ')' | '(' expr ')'
    """

    def __init__(self):
        self.tokens: List[str] = []
        self.pos = 0

    def parse(self, text: str) -> Node:
        if not text or not text.strip():
            raise ExpressionError("Empty expression")
        self.tokens = tokenize(text)
        self.pos = 0
        node = self._parse_expr()
        if self.pos != len(self.tokens):
            raise ExpressionError(
                f"Unexpected token '{self.tokens[self.pos]}' in '{text}'"
            )
        return node

    def _peek(self) -> Optional[str]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _take(self) -> str:
        token = self._peek()
        if token is None:
            raise ExpressionError("Unexpected end of expression")
        self.pos += 1
        return token

    def _expect(self, token: str):
        found = self._take()
        if found != token:
            raise ExpressionError(f"Expected '{token}', found '{found}'")

    def _parse_expr(self) -> Node:
        node = self._parse_term()
        while self._peek() in ("+", "-"):
            op = self._take()
            node = Binary(op, node, self._parse_term())
        return node

    def _parse_term(self) -> Node:
        node = self._parse_unary()
        while self._peek() in ("*", "/"):
            op = self._take()
            node = Binary(op, node, self._parse_unary())
        return node

    def _parse_unary(self) -> Node:
        if self._peek() == "-":
            self._take()
            return Unary(self._parse_unary())
        if self._peek() == "+":
            self._take()
            return self._parse_unary()
        return self._parse_power()

    def _parse_power(self) -> Node:
        base = self._parse_primary()
        if self._peek() == "^":
            self._take()
            # right associative: 2^3^2 = 2^(3^2)
            return Binary("^", base, self._parse_unary())
        return base

    def _parse_primary(self) -> Node:
        token = self._take()
        if token == "(":
            node = self._parse_expr()
            self._expect(")")
            return node
        if token[0].isdigit() or token[0] == ".":
            return Number(float(token))
        if token in FUNCTIONS:
            self._expect("(")
            arg = self._parse_expr()
            self._expect(")")
            return Call(token, arg)
        if token in CONSTANTS:
            return Number(CONSTANTS[token])
        if token in VARIABLES:
            return Variable(token)
        raise ExpressionError(f"Unknown name '{token}'")


def _is_number(node: Node, value: Optional[float] = None) -> bool:
    return isinstance(node, Number) and (value is None or node.value == value)


def _add(left: Node, right: Node) -> Node:
    if _is_number(left, 0.0):
        return right
    if _is_number(right, 0.0):
        return left
    return Binary("+", left, right)


def _sub(left: Node, right: Node) -> Node:
    if _is_number(right, 0.0):
        return left
    if _is_number(left, 0.0):
        return _neg(right)
    return Binary("-", left, right)


def _mul(left: Node, right: Node) -> Node:
    if _is_number(left, 0.0) or _is_number(right, 0.0):
        return Number(0.0)
    if _is_number(left, 1.0):
        return right
    if _is_number(right, 1.0):
        return left
    return Binary("*", left, right)


def _div(left: Node, right: Node) -> Node:
    if _is_number(left, 0.0):
        return Number(0.0)
    if _is_number(right, 1.0):
        return left
    return Binary("/", left, right)


def _neg(node: Node) -> Node:
    if isinstance(node, Number):
        return Number(-node.value)
    if isinstance(node, Unary):
        return node.operand
    return Unary(node)


def free_variables(node: Node) -> FrozenSet[str]:
    if isinstance(node, Variable):
        return frozenset([node.name])
    if isinstance(node, Unary):
        return free_variables(node.operand)
    if isinstance(node, Binary):
        return free_variables(node.left) | free_variables(node.right)
    if isinstance(node, Call):
        return free_variables(node.arg)
    return frozenset()


def differentiate(node: Node, var: str) -> Node:
    """Symbolic d(node)/d(var)"""
    if isinstance(node, Number):
        return Number(0.0)
    if isinstance(node, Variable):
        return Number(1.0 if node.name == var else 0.0)
    if isinstance(node, Unary):
        return _neg(differentiate(node.operand, var))
    if isinstance(node, Call):
        inner = differentiate(node.arg, var)
        if node.func == "sin":
            outer = Call("cos", node.arg)
        elif node.func == "cos":
            outer = _neg(Call("sin", node.arg))
        else:
            outer = node
        return _mul(outer, inner)

    left, right = node.left, node.right
    d_left = differentiate(left, var)
    d_right = differentiate(right, var)
    if node.op == "+":
        return _add(d_left, d_right)
    if node.op == "-":
        return _sub(d_left, d_right)
    if node.op == "*":
        return _add(_mul(d_left, right), _mul(left, d_right))
    if node.op == "/":
        numerator = _sub(_mul(d_left, right), _mul(left, d_right))
        return _div(numerator, Binary("^", right, Number(2.0)))
    # power rule, exponent must not depend on var
    if var in free_variables(right):
        raise ExpressionError(
            f"Cannot differentiate '{node}' : exponent depends on '{var}'"
        )
    reduced = _sub(right, Number(1.0))
    if isinstance(reduced, Binary) and all(
        _is_number(n) for n in (reduced.left, reduced.right)
    ):
        reduced = Number(reduced.left.value - reduced.right.value)
    return _mul(_mul(right, Binary("^", left, reduced)), d_left)


def _evaluate(node: Node, env: Dict[str, np.ndarray]):
    if isinstance(node, Number):
        return node.value
    if isinstance(node, Variable):
        if node.name not in env:
            raise ExpressionError(f"No value bound for variable '{node.name}'")
        return env[node.name]
    if isinstance(node, Unary):
        return -_evaluate(node.operand, env)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_evaluate(node.arg, env))
    left = _evaluate(node.left, env)
    right = _evaluate(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        return left / right
    return np.power(left, right)


class Expression:
    """A parsed expression bound to its source text"""

    def __init__(self, text: str, node: Optional[Node] = None):
        self.text = text
        if node is None:
            node = ExpressionParser().parse(text)
        self.node = node
        self.variables = free_variables(self.node)

    def evaluate(self, **values) -> Union[float, np.ndarray]:
        """Evaluate with numpy broadcasting over the bound variables"""
        env = {
            name: np.asarray(value, dtype=float)
            for name, value in values.items()
        }
        with np.errstate(all="ignore"):
            return _evaluate(self.node, env)

    __call__ = evaluate

    def derivative(self, var: str) -> "Expression":
        if var not in VARIABLES:
            raise ExpressionError(f"Unknown variable '{var}'")
        node = differentiate(self.node, var)
        return Expression(str(node), node)

    def depends_on(self, *names: str) -> bool:
        return any(name in self.variables for name in names)

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse_expression(
    text: Union[str, float, int], allowed: Optional[tuple] = None
) -> Expression:
    """
    Parse text (numbers are accepted as constant expressions) and reject
    variables outside `allowed`
    """
    if isinstance(text, bool):
        raise ExpressionError("Boolean is not an expression")
    if isinstance(text, (int, float)):
        text = repr(float(text))
    if not isinstance(text, str):
        raise ExpressionError(f"Expected expression string, got {text!r}")
    expr = Expression(text)
    if allowed is not None:
        extra = sorted(expr.variables - set(allowed))
        if extra:
            raise ExpressionError(
                f"Variables {extra} are not allowed here "
                f"(allowed: {', '.join(allowed)})"
            )
    return expr
