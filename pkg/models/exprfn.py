"""
exprfn.py: Parses, evaluates and differentiates infection-rate expressions f(R).

Grammar (whitespace insignificant, '^' right-associative):

    expr    := term (('+'|'-') term)*
    term    := factor (('*'|'/') factor)*
    factor  := unary ('^' factor)?
    unary   := '-'? primary
    primary := number | 'R' | 'k' | 'pi' | func '(' expr ')' | '(' expr ')'
    func    := sin | cos | exp | log | sqrt | tanh
"""
import math
import re
import logging
from dataclasses import dataclass
import numpy as np
from models import dual
from models.dual import DualValue
from helpers.errors import ExprSyntaxError, ExprDomainError, UnknownIdentifierError, ValidationError


class ExprAst:
    """Base class of expression nodes. Nodes are immutable and compare structurally."""

    precedence = 5

    def dual(self, r, k):
        """Evaluate this node as a dual number; r is DualValue.variable(R)."""
        raise NotImplementedError

    def __str__(self):
        return pretty(self)


@dataclass(frozen=True)
class Num(ExprAst):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"Number literals must be finite and non-negative, got {self.value}")

    def dual(self, r, k):
        return DualValue.constant(self.value)


@dataclass(frozen=True)
class Var(ExprAst):
    """The recovered fraction R."""

    def dual(self, r, k):
        return r


@dataclass(frozen=True)
class Param(ExprAst):
    """The model parameter k, bound at evaluation time."""

    def dual(self, r, k):
        return DualValue.constant(k)


@dataclass(frozen=True)
class Pi(ExprAst):

    def dual(self, r, k):
        return DualValue.constant(math.pi)


@dataclass(frozen=True)
class Neg(ExprAst):
    operand: ExprAst
    precedence = 4

    def dual(self, r, k):
        return -self.operand.dual(r, k)


@dataclass(frozen=True)
class BinOp(ExprAst):
    left: ExprAst
    right: ExprAst
    symbol = '?'

    def apply(self, a, b):
        raise NotImplementedError

    def dual(self, r, k):
        a = self.left.dual(r, k)
        b = self.right.dual(r, k)
        try:
            return self.apply(a, b)
        except ExprDomainError as e:
            if e.node is None:
                raise ExprDomainError(str(e), node=self) from None
            raise


@dataclass(frozen=True)
class Add(BinOp):
    symbol = '+'
    precedence = 1

    def apply(self, a, b):
        return a + b


@dataclass(frozen=True)
class Sub(BinOp):
    symbol = '-'
    precedence = 1

    def apply(self, a, b):
        return a - b


@dataclass(frozen=True)
class Mul(BinOp):
    symbol = '*'
    precedence = 2

    def apply(self, a, b):
        return a * b


@dataclass(frozen=True)
class Div(BinOp):
    symbol = '/'
    precedence = 2

    def apply(self, a, b):
        return a / b


@dataclass(frozen=True)
class Pow(BinOp):
    symbol = '^'
    precedence = 3

    def apply(self, a, b):
        return a ** b


@dataclass(frozen=True)
class Call(ExprAst):
    func: str
    arg: ExprAst

    def __post_init__(self):
        if self.func not in dual.FUNCTIONS:
            raise ValueError(f"Unknown function {self.func}")

    def dual(self, r, k):
        a = self.arg.dual(r, k)
        try:
            return dual.FUNCTIONS[self.func](a)
        except ExprDomainError as e:
            if e.node is None:
                raise ExprDomainError(str(e), node=self) from None
            raise


BINARY_NODES = {'+': Add, '-': Sub, '*': Mul, '/': Div}

# (minimum precedence of the left operand, minimum precedence of the right operand)
_OPERAND_PRECEDENCE = {1: (1, 2), 2: (2, 3), 3: (4, 3)}


def pretty(node):
    """
    Render an AST as text that parses back to the same tree.

    Args:
        node (ExprAst): The tree to render.

    Returns:
        str: Expression text with the minimum parentheses the grammar needs.
    """
    def wrap(child, minimum):
        text = pretty(child)
        return f"({text})" if child.precedence < minimum else text

    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return 'R'
    if isinstance(node, Param):
        return 'k'
    if isinstance(node, Pi):
        return 'pi'
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    if isinstance(node, Neg):
        return f"-{wrap(node.operand, 5)}"
    if isinstance(node, BinOp):
        left_min, right_min = _OPERAND_PRECEDENCE[node.precedence]
        spacer = '' if isinstance(node, Pow) else ' '
        return f"{wrap(node.left, left_min)}{spacer}{node.symbol}{spacer}{wrap(node.right, right_min)}"
    raise TypeError(f"Not an expression node: {node!r}")


@dataclass(frozen=True)
class Token:
    kind: str  # 'number', 'ident', 'op' or 'end'
    text: str
    offset: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)

_PRIMARY_START = {'number', 'R', 'k', 'pi', '(', 'function'}


def tokenize(text):
    """
    Split expression text into tokens with byte offsets.

    Raises:
        ExprSyntaxError: On a character that starts no token.
    """
    tokens = []
    position = 0
    byte_offset = 0
    while position < len(text):
        match = _TOKEN_RE.match(text, position)
        if match is None:
            raise ExprSyntaxError(f"Unexpected character {text[position]!r}", byte_offset, _PRIMARY_START | {'+', '-', '*', '/', '^', ')'})
        lexeme = match.group()
        if match.lastgroup != 'ws':
            tokens.append(Token(match.lastgroup, lexeme, byte_offset))
        position = match.end()
        byte_offset += len(lexeme.encode('utf-8'))
    tokens.append(Token('end', '', byte_offset))
    return tokens


class Parser:
    """Recursive-descent parser over the token list, one method per grammar rule."""

    def __init__(self, text):
        self.tokens = tokenize(text)
        self.index = 0

    @property
    def current(self):
        return self.tokens[self.index]

    def advance(self):
        token = self.current
        self.index += 1
        return token

    def at_op(self, *symbols):
        return self.current.kind == 'op' and self.current.text in symbols

    def expect_op(self, symbol):
        if not self.at_op(symbol):
            raise ExprSyntaxError(f"Expected '{symbol}'", self.current.offset, {symbol})
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.current.kind != 'end':
            raise ExprSyntaxError(f"Unexpected {self.current.text!r}", self.current.offset, {'+', '-', '*', '/', '^', 'end of input'})
        return node

    def expr(self):
        node = self.term()
        while self.at_op('+', '-'):
            symbol = self.advance().text
            node = BINARY_NODES[symbol](node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.at_op('*', '/'):
            symbol = self.advance().text
            node = BINARY_NODES[symbol](node, self.factor())
        return node

    def factor(self):
        base = self.unary()
        if self.at_op('^'):
            self.advance()
            return Pow(base, self.factor())
        return base

    def unary(self):
        if self.at_op('-'):
            self.advance()
            return Neg(self.primary())
        return self.primary()

    def primary(self):
        token = self.current
        if token.kind == 'number':
            self.advance()
            value = float(token.text)
            if not math.isfinite(value):
                raise ExprSyntaxError("Number literal out of range", token.offset, {'number'})
            return Num(value)
        if token.kind == 'ident':
            self.advance()
            if token.text == 'R':
                return Var()
            if token.text == 'k':
                return Param()
            if token.text == 'pi':
                return Pi()
            if token.text in dual.FUNCTIONS:
                self.expect_op('(')
                arg = self.expr()
                self.expect_op(')')
                return Call(token.text, arg)
            raise UnknownIdentifierError(token.text, token.offset)
        if self.at_op('('):
            self.advance()
            node = self.expr()
            self.expect_op(')')
            return node
        found = 'end of input' if token.kind == 'end' else repr(token.text)
        raise ExprSyntaxError(f"Unexpected {found}", token.offset, _PRIMARY_START)


def parse_expr(text):
    """
    Parse an infection-rate expression.

    Args:
        text (str): Expression over R with optional parameter symbol k.

    Returns:
        ExprAst: The parsed tree.

    Raises:
        ExprSyntaxError: Malformed input, with byte offset and expected tokens.
        UnknownIdentifierError: An identifier outside R, k, pi and the function set.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("Empty expression", 0, _PRIMARY_START)
    return Parser(text).parse()


def eval_dual(ast, r, k):
    """
    Evaluate f and df/dR at r by forward-mode differentiation.

    Args:
        ast (ExprAst): Parsed expression.
        r (float | ndarray): Recovered fraction(s).
        k (float): Model parameter bound to the symbol k.

    Returns:
        DualValue: (f(r), df/dR(r)), arrays when r is an array.

    Raises:
        ExprDomainError: When an elementary function leaves its domain.
    """
    if isinstance(r, np.ndarray):
        r = r.astype(float)
    else:
        r = float(r)
        if not math.isfinite(r):
            raise ValidationError(f"R must be finite, got {r}")
    if not math.isfinite(k):
        raise ValidationError(f"k must be finite, got {k}")
    with np.errstate(all='ignore'):
        result = ast.dual(DualValue.variable(r), float(k))
    if isinstance(r, np.ndarray):
        # constant subtrees stay scalar; callers get full-shape arrays
        return DualValue(
            np.broadcast_to(result.value, r.shape).astype(float),
            np.broadcast_to(result.deriv, r.shape).astype(float),
        )
    return DualValue(float(result.value), float(result.deriv))


class InfectionRate:
    """An evaluable, differentiable f(R) on [0,1]."""

    kind = 'abstract'

    def evaluate(self, r, k):
        """Return DualValue (f(r), f'(r)) for scalar or array r."""
        raise NotImplementedError

    def describe(self):
        """JSON-ready description used to echo the model in reports."""
        raise NotImplementedError

    def value(self, r, k):
        return self.evaluate(r, k).value


class ExpressionRate(InfectionRate):
    """Infection rate backed by a parsed expression."""

    kind = 'expr'

    def __init__(self, ast, text=None, description=None):
        self.ast = ast
        self.text = text if text is not None else pretty(ast)
        self.description = description

    @classmethod
    def from_text(cls, text, description=None):
        return cls(parse_expr(text), text, description)

    def evaluate(self, r, k):
        return eval_dual(self.ast, r, k)

    def describe(self):
        if self.description is not None:
            return dict(self.description)
        return {'kind': 'expr', 'text': self.text}

    def __repr__(self):
        return f"ExpressionRate({self.text!r})"


@dataclass(frozen=True)
class PositivityResult:
    """
    Outcome of the sampled positivity check.

    Attributes:
        positive (bool): Every grid value was > 0.
        witness (float | None): Grid point with the smallest value when the check fails.
        min_value (float): Smallest sampled value.
        argmin (float): Where the smallest value occurs.
        grid_points (int): Number of samples on [0, 1].
        heuristic (bool): Always True; sampling cannot prove positivity.
    """

    positive: bool
    witness: object
    min_value: float
    argmin: float
    grid_points: int
    heuristic: bool = True

    def __bool__(self):
        return self.positive


def check_positive(source, k, grid_points):
    """
    Check f > 0 on a uniform grid over [0, 1].

    Args:
        source (ExprAst | InfectionRate): The function to check.
        k (float): Parameter value.
        grid_points (int): Number of samples, at least 2.

    Returns:
        PositivityResult: Verdict plus the minimizing grid point.
    """
    if grid_points < 2:
        raise ValidationError(f"grid_points must be at least 2, got {grid_points}")
    rate = source if isinstance(source, InfectionRate) else ExpressionRate(source)
    grid = np.linspace(0.0, 1.0, grid_points)
    values = rate.evaluate(grid, k).value
    index = int(np.argmin(values))
    min_value = float(values[index])
    positive = bool(min_value > 0)
    if not positive:
        logging.warning(f"f is not positive on [0,1]: f({grid[index]}) = {min_value}")
    return PositivityResult(
        positive=positive,
        witness=None if positive else float(grid[index]),
        min_value=min_value,
        argmin=float(grid[index]),
        grid_points=grid_points,
    )
