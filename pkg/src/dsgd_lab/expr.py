"""Expression calculus: AST, concrete syntax, standard semantics, static analyses.

The language is deliberately tiny: real-valued expressions over latent
variables z1..zn built from registered smooth primitives, plus if-statements
``if G { A } else { B }`` that take the A branch when G evaluates negative
and the B branch otherwise (ties go to B).  Everything downstream --
smoothing, differentiation, estimators -- consumes this AST.
"""
from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from typing import Callable, Iterator, Union

import numpy as np


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    """Latent variable z<index>, 1-based."""
    index: int


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Prim:
    """Application of a registered primitive to argument expressions."""
    name: str
    args: tuple


@dataclass(frozen=True)
class If:
    """Branch on the sign of ``guard``: negative -> then, otherwise -> orelse."""
    guard: "Expr"
    then: "Expr"
    orelse: "Expr"


@dataclass(frozen=True)
class Aux:
    """Reference to a named auxiliary binding inside a lowered program."""
    name: str


Expr = Union[Var, Const, Prim, If, Aux]


class DslSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} (at offset {pos})")
        self.pos = pos


class UnknownPrimitive(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unknown primitive {self.name!r}"


class ArityMismatch(ValueError):
    pass


class DomainError(ValueError):
    def __init__(self, prim: str, args: tuple):
        super().__init__(f"{prim} evaluated outside its domain at args {args}")
        self.prim = prim
        self.arg_values = args


class SelfTestFailure(AssertionError):
    pass


# --------------------------------------------------------------------------
# Primitive registry
# --------------------------------------------------------------------------
#
# Each primitive carries its value function, one partial-derivative function
# per argument, an optional domain predicate, and a flag saying whether the
# function is nonzero almost everywhere (used by the guard-safety check).
# All functions are numpy-vectorised; scalar evaluation feeds them floats.

@dataclass(frozen=True)
class PrimDef:
    name: str
    arity: int
    fn: Callable
    partials: tuple
    ae_nonzero: bool = False
    domain: Callable | None = None          # args -> bool (all inside domain)
    point_sampler: Callable | None = None   # maps std-normal draws into domain


class PrimitiveRegistry:
    def __init__(self):
        self._defs: dict[str, PrimDef] = {}

    def register(self, pdef: PrimDef) -> None:
        if pdef.arity != len(pdef.partials):
            raise ArityMismatch(
                f"{pdef.name}: {pdef.arity} args but {len(pdef.partials)} partials")
        self._defs[pdef.name] = pdef

    def lookup(self, name: str) -> PrimDef:
        pdef = self._defs.get(name)
        if pdef is None and name.startswith("affine_"):
            pdef = self._register_affine(name)
        if pdef is None:
            raise UnknownPrimitive(name)
        return pdef

    def __contains__(self, name: str) -> bool:
        try:
            self.lookup(name)
            return True
        except UnknownPrimitive:
            return False

    def names(self) -> list[str]:
        return sorted(self._defs)

    def copy(self) -> "PrimitiveRegistry":
        reg = PrimitiveRegistry()
        reg._defs = dict(self._defs)
        return reg

    def _register_affine(self, name: str) -> PrimDef | None:
        # Names of the form affine_<a>_<b> denote x -> a*x + b and are
        # materialised on first lookup.  <a>, <b> are float literals.
        parts = name.split("_")
        if len(parts) != 3:
            return None
        try:
            a, b = float(parts[1]), float(parts[2])
        except ValueError:
            return None
        pdef = PrimDef(name, 1,
                       fn=lambda x, a=a, b=b: a * x + b,
                       partials=(lambda x, a=a: np.full_like(np.asarray(x, float), a),),
                       ae_nonzero=(a != 0.0))
        self.register(pdef)
        return pdef


def affine_name(a: float, b: float) -> str:
    return f"affine_{a!r}_{b!r}"


def _ones_like(x):
    return np.ones_like(np.asarray(x, float))


def default_registry() -> PrimitiveRegistry:
    reg = PrimitiveRegistry()
    r = reg.register
    r(PrimDef("add", 2, lambda x, y: x + y,
              (lambda x, y: _ones_like(x), lambda x, y: _ones_like(y)),
              ae_nonzero=True))
    r(PrimDef("sub", 2, lambda x, y: x - y,
              (lambda x, y: _ones_like(x), lambda x, y: -_ones_like(y)),
              ae_nonzero=True))
    r(PrimDef("mul", 2, lambda x, y: x * y,
              (lambda x, y: np.asarray(y, float) + 0.0,
               lambda x, y: np.asarray(x, float) + 0.0),
              ae_nonzero=True))
    r(PrimDef("neg", 1, lambda x: -x, (lambda x: -_ones_like(x),),
              ae_nonzero=True))
    r(PrimDef("sq", 1, lambda x: x * x, (lambda x: 2.0 * np.asarray(x, float),),
              ae_nonzero=True))
    r(PrimDef("id", 1, lambda x: np.asarray(x, float) + 0.0,
              (lambda x: _ones_like(x),), ae_nonzero=True))
    r(PrimDef("exp", 1, np.exp, (np.exp,), ae_nonzero=True))
    r(PrimDef("log", 1, np.log, (lambda x: 1.0 / np.asarray(x, float),),
              ae_nonzero=True,
              domain=lambda x: np.all(np.asarray(x) > 0.0),
              point_sampler=lambda u: (np.exp(u[0]),)))
    r(PrimDef("logistic_sigmoid", 1, lambda x: _sigmoid(np.asarray(x, float)),
              (lambda x: _sigmoid(np.asarray(x, float))
               * (1.0 - _sigmoid(np.asarray(x, float))),),
              ae_nonzero=True))
    r(PrimDef("normal_logpdf", 3, _normal_logpdf,
              (_normal_logpdf_dx, _normal_logpdf_dmu, _normal_logpdf_dsigma),
              ae_nonzero=True,
              domain=lambda x, mu, sigma: np.all(np.asarray(sigma) > 0.0),
              point_sampler=lambda u: (u[0], u[1], np.exp(0.5 * u[2]) + 0.05)))
    return reg


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


_LOG_2PI = math.log(2.0 * math.pi)


def _normal_logpdf(x, mu, sigma):
    t = (x - mu) / sigma
    return -np.log(sigma) - 0.5 * _LOG_2PI - 0.5 * t * t


def _normal_logpdf_dx(x, mu, sigma):
    return -(x - mu) / (sigma * sigma)


def _normal_logpdf_dmu(x, mu, sigma):
    return (x - mu) / (sigma * sigma)


def _normal_logpdf_dsigma(x, mu, sigma):
    t = (x - mu) / sigma
    return (t * t - 1.0) / sigma


def register_affine_sum(reg: PrimitiveRegistry, name: str, weights, bias: float) -> str:
    """Register ``name(x1..xk) = bias + sum_i weights[i] * x_i``.

    The workhorse for model-specific guard atoms: affine in its arguments,
    hence almost-everywhere nonzero whenever some weight is.
    """
    w = tuple(float(v) for v in weights)

    def fn(*xs, _w=w, _b=bias):
        acc = np.asarray(xs[0], float) * _w[0]
        for wi, xi in zip(_w[1:], xs[1:]):
            acc = acc + wi * xi
        return acc + _b

    partials = tuple(
        (lambda *xs, _wi=wi: np.full_like(np.asarray(xs[0], float), _wi))
        for wi in w)
    reg.register(PrimDef(name, len(w), fn, partials,
                         ae_nonzero=any(wi != 0.0 for wi in w)))
    return name


# --------------------------------------------------------------------------
# Concrete syntax
# --------------------------------------------------------------------------
#
#   expr    := term (('+' | '-') term)*
#   term    := atom ('*' atom)*
#   atom    := var | const | prim | ifexpr | '(' expr ')'
#   var     := 'z' digits
#   const   := signed decimal literal
#   prim    := ident '(' expr (',' expr)* ')'
#   ifexpr  := 'if' expr '{' expr '}' 'else' '{' expr '}'
#
# Infix +, -, * are sugar for add/sub/mul.  The canonical printer emits
# prefix form only, so parse(print(e)) == e without precedence games.

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>-?\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[(){},+\-*])
""", re.VERBOSE)

_AFFINE_TAIL_RE = re.compile(r"[0-9._eE+\-]*")

_VAR_RE = re.compile(r"z([1-9]\d*)$")

_RESERVED = {"if", "else", "sig"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        val = m.group()
        end = m.end()
        if kind == "ident" and (val == "affine" or val.startswith("affine")):
            # extend over the numeric tail: affine_<a>_<b> may contain
            # '.', '-', '+', exponents
            m2 = _AFFINE_TAIL_RE.match(text, end)
            if m2 and m2.group():
                val += m2.group()
                end = m2.end()
        if kind != "ws":
            toks.append((kind, val, pos))
        pos = end
    toks.append(("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, registry: PrimitiveRegistry):
        self.toks = _tokenize(text)
        self.i = 0
        self.reg = registry

    def peek(self):
        return self.toks[self.i]

    def advance(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, val: str):
        kind, v, pos = self.advance()
        if v != val:
            raise DslSyntaxError(f"expected {val!r}, found {v or 'end of input'!r}", pos)

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            rhs = self.parse_term()
            node = Prim("add" if op == "+" else "sub", (node, rhs))
        return node

    def parse_term(self) -> Expr:
        node = self.parse_atom()
        while self.peek()[1] == "*":
            self.advance()
            rhs = self.parse_atom()
            node = Prim("mul", (node, rhs))
        return node

    def parse_atom(self) -> Expr:
        kind, val, pos = self.peek()
        if val == "(":
            self.advance()
            node = self.parse_expr()
            self.expect(")")
            return node
        if val == "-" or kind == "num":
            # unary minus binds to a numeric literal only; for expressions
            # use neg(...)
            if val == "-":
                self.advance()
                kind2, val2, pos2 = self.advance()
                if kind2 != "num":
                    raise DslSyntaxError("expected numeric literal after '-'", pos2)
                return Const(-float(val2))
            self.advance()
            return Const(float(val))
        if val == "if":
            return self.parse_if()
        if kind == "ident":
            self.advance()
            m = _VAR_RE.match(val)
            if m and self.peek()[1] != "(":
                return Var(int(m.group(1)))
            if val in _RESERVED:
                raise DslSyntaxError(f"reserved word {val!r} cannot start an atom", pos)
            if self.peek()[1] != "(":
                raise DslSyntaxError(f"expected '(' after primitive {val!r}", pos)
            pdef = self.reg.lookup(val)   # raises UnknownPrimitive
            self.advance()
            args = []
            if self.peek()[1] != ")":
                args.append(self.parse_expr())
                while self.peek()[1] == ",":
                    self.advance()
                    args.append(self.parse_expr())
            self.expect(")")
            if len(args) != pdef.arity:
                raise ArityMismatch(
                    f"{val} expects {pdef.arity} args, got {len(args)}")
            return Prim(val, tuple(args))
        raise DslSyntaxError(f"unexpected token {val or 'end of input'!r}", pos)

    def parse_if(self) -> If:
        self.expect("if")
        guard = self.parse_expr()
        self.expect("{")
        then = self.parse_expr()
        self.expect("}")
        self.expect("else")
        self.expect("{")
        orelse = self.parse_expr()
        self.expect("}")
        return If(guard, then, orelse)


def parse(text: str, registry: PrimitiveRegistry | None = None) -> Expr:
    """Parse concrete syntax into an AST, checking primitive names/arities."""
    reg = registry if registry is not None else default_registry()
    p = _Parser(text, reg)
    node = p.parse_expr()
    kind, val, pos = p.peek()
    if kind != "eof":
        raise DslSyntaxError(f"trailing input {val!r}", pos)
    return node


def print_expr(e: Expr) -> str:
    """Canonical prefix form; parse(print_expr(e)) reproduces e exactly."""
    match e:
        case Var(i):
            return f"z{i}"
        case Const(v):
            return repr(float(v))
        case Prim(name, args):
            return f"{name}({', '.join(print_expr(a) for a in args)})"
        case If(g, a, b):
            return (f"if {print_expr(g)} {{ {print_expr(a)} }} "
                    f"else {{ {print_expr(b)} }}")
        case Aux(name):
            return name
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# Standard semantics (scalar, lazy branches)
# --------------------------------------------------------------------------

def eval_expr(e: Expr, x, reg: PrimitiveRegistry | None = None,
              aux_env: dict | None = None) -> float:
    """Evaluate under the standard if-semantics at latent point x.

    x is indexable by 0-based coordinate (x[j-1] backs zj).  Only the taken
    branch of each if is evaluated.  Raises DomainError when a primitive is
    applied outside its domain.
    """
    reg = reg if reg is not None else default_registry()

    def go(node) -> float:
        match node:
            case Var(i):
                return float(x[i - 1])
            case Const(v):
                return float(v)
            case Prim(name, args):
                pdef = reg.lookup(name)
                vals = tuple(go(a) for a in args)
                if pdef.domain is not None and not pdef.domain(*vals):
                    raise DomainError(name, vals)
                out = float(pdef.fn(*vals))
                if math.isnan(out):
                    raise DomainError(name, vals)
                return out
            case If(g, a, b):
                return go(a) if go(g) < 0.0 else go(b)
            case Aux(name):
                if aux_env is None or name not in aux_env:
                    raise KeyError(f"unbound auxiliary {name!r}")
                return float(aux_env[name])
        raise TypeError(f"not an expression node: {node!r}")

    return go(e)


# --------------------------------------------------------------------------
# Static analyses
# --------------------------------------------------------------------------

def children(e: Expr) -> tuple:
    match e:
        case Var() | Const() | Aux():
            return ()
        case Prim(_, args):
            return args
        case If(g, a, b):
            return (g, a, b)
    raise TypeError(f"not an expression node: {e!r}")


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(children(node))


def node_count(e: Expr) -> int:
    return sum(1 for _ in walk(e))


def count_ifs(e: Expr) -> int:
    return sum(1 for n in walk(e) if isinstance(n, If))


def free_vars(e: Expr) -> set[int]:
    return {n.index for n in walk(e) if isinstance(n, Var)}


def nesting_depth(e: Expr) -> int:
    """Depth of guard nesting: how many if-guards enclose the deepest guard.

    Branch positions do not add depth; guard positions add one level.
    Determines the exponent in the eta^(-depth) gradient-variance bound.
    """
    match e:
        case Var() | Const() | Aux():
            return 0
        case Prim(_, args):
            return max((nesting_depth(a) for a in args), default=0)
        case If(g, a, b):
            return max(nesting_depth(g) + 1, nesting_depth(a), nesting_depth(b))
    raise TypeError(f"not an expression node: {e!r}")


@dataclass(frozen=True)
class SafeReport:
    is_safe: bool
    violations: tuple  # of (path, reason) pairs


def check_safe(e: Expr, reg: PrimitiveRegistry | None = None) -> SafeReport:
    """Conservative syntactic check that every guard avoids flat regions.

    Guards must be built from guard atoms -- a single primitive flagged
    almost-everywhere nonzero, applied to pairwise-distinct bare variables --
    closed under guard-of-guard nesting.  A bare variable guard counts as the
    identity atom.  Expressions with no if-statements pass trivially.
    """
    reg = reg if reg is not None else default_registry()
    violations: list[tuple[str, str]] = []

    def check_guard(node, path: str) -> None:
        match node:
            case Var():
                return
            case Const(v):
                violations.append((path, f"guard is constant {v!r}"))
            case Prim(name, args):
                try:
                    pdef = reg.lookup(name)
                except UnknownPrimitive:
                    violations.append((path, f"unknown primitive {name!r}"))
                    return
                if not pdef.ae_nonzero:
                    violations.append(
                        (path, f"primitive {name!r} not flagged a.e.-nonzero"))
                idxs = []
                for k, a in enumerate(args):
                    if not isinstance(a, Var):
                        violations.append(
                            (f"{path}.args[{k}]",
                             "guard atom argument must be a bare variable"))
                    else:
                        idxs.append(a.index)
                if len(idxs) != len(set(idxs)):
                    violations.append((path, "repeated variable in guard atom"))
            case If(g, a, b):
                check_guard(g, f"{path}.guard")
                check_guard(a, f"{path}.then")
                check_guard(b, f"{path}.orelse")
            case Aux():
                violations.append((path, "auxiliary reference in guard"))

    def check_expr(node, path: str) -> None:
        match node:
            case Var() | Const() | Aux():
                return
            case Prim(_, args):
                for k, a in enumerate(args):
                    check_expr(a, f"{path}.args[{k}]")
            case If(g, a, b):
                check_guard(g, f"{path}.guard")
                check_expr(a, f"{path}.then")
                check_expr(b, f"{path}.orelse")

    check_expr(e, "root")
    return SafeReport(not violations, tuple(violations))


# --------------------------------------------------------------------------
# Registry self-test
# --------------------------------------------------------------------------

def registry_selftest(reg: PrimitiveRegistry | None = None,
                      trials: int = 200, seed: int = 0,
                      tol: float = 1e-5) -> dict[str, float]:
    """Check every registered partial against central finite differences.

    Returns max relative error per primitive; raises SelfTestFailure if any
    exceeds tol.  Domain-constrained primitives sample through their
    point_sampler so probes stay inside the domain.
    """
    reg = reg if reg is not None else default_registry()
    rng = random.Random(seed)
    worst: dict[str, float] = {}
    h = 1e-6
    for name in reg.names():
        pdef = reg.lookup(name)
        errs = []
        for _ in range(trials):
            u = [rng.gauss(0.0, 1.0) for _ in range(pdef.arity)]
            args = list(pdef.point_sampler(u)) if pdef.point_sampler else u
            args = [float(a) for a in args]
            for j in range(pdef.arity):
                hi = list(args)
                lo = list(args)
                hi[j] += h
                lo[j] -= h
                if pdef.domain is not None and not (
                        pdef.domain(*hi) and pdef.domain(*lo)):
                    continue
                fd = (float(pdef.fn(*hi)) - float(pdef.fn(*lo))) / (2.0 * h)
                an = float(pdef.partials[j](*args))
                errs.append(abs(fd - an) / max(1.0, abs(an)))
        worst[name] = max(errs) if errs else 0.0
        if worst[name] > tol:
            raise SelfTestFailure(
                f"partial check failed for {name}: rel err {worst[name]:.2e}")
    return worst
