"""Sigmoid smoothing of branching expressions.

An if-statement branches on the sign of its guard; smoothing replaces the
hard branch with a logistic mixture at temperature eta:

    [[if G { A } else { B }]]_eta = sigma_eta(-G) * A + sigma_eta(G) * B

where sigma_eta(x) = sigma(x / eta).  As eta -> 0 the mixture sharpens back
to the standard semantics.  The guard is evaluated once per if-statement and
both mixture weights are derived from that single value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import (Aux, Const, Expr, If, Prim, PrimitiveRegistry, Var,
                   DomainError, default_registry, print_expr)

#: floor applied by schedules before eta reaches evaluation
ETA_FLOOR = 1e-8

#: reserved name for the smoothing weight function in lowered programs
SIG = "sig"


def sigma(x, eta: float, sharpness: float = 1.0):
    """Logistic weight sigma(sharpness * x / eta), numerically stable.

    Computed via exp(-|t|) in both tails so it never overflows; satisfies
    sigma(x) + sigma(-x) == 1 to one ulp.
    """
    if eta <= 0.0:
        raise ValueError(f"eta must be positive, got {eta}")
    t = sharpness * np.asarray(x, dtype=float) / eta
    e = np.exp(-np.abs(t))
    return np.where(t >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigma_prime(x, eta: float, sharpness: float = 1.0):
    """Derivative of sigma(.,eta) in x: bounded by sharpness / (4 * eta)."""
    s = sigma(x, eta, sharpness)
    return sharpness * s * (1.0 - s) / eta


def eval_smoothed(e: Expr, x, eta: float,
                  reg: PrimitiveRegistry | None = None,
                  sharpness: float = 1.0,
                  aux_env: dict | None = None) -> float:
    """Evaluate under the eta-smoothed semantics (both branches contribute)."""
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
                gv = go(g)
                s_plus = float(sigma(gv, eta, sharpness))
                return (1.0 - s_plus) * go(a) + s_plus * go(b)
            case Aux(name):
                if aux_env is None or name not in aux_env:
                    raise KeyError(f"unbound auxiliary {name!r}")
                return float(aux_env[name])
        raise TypeError(f"not an expression node: {node!r}")

    return go(e)


# --------------------------------------------------------------------------
# Explicit lowering: if-statements -> sig-mixtures with shared guard bindings
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothProgram:
    """Branch-free program: guard bindings g1.. evaluated in order, then body.

    The body (and later bindings) reference guards through Aux nodes and
    apply the reserved unary ``sig`` whose meaning is sigma(., eta) fixed at
    evaluation time.
    """
    bindings: tuple   # of (name, Expr) pairs, evaluation order
    body: Expr


def smooth_transform(e: Expr) -> SmoothProgram:
    """Lower every if-statement to its sigmoid-mixture form.

    Each guard is hoisted into a binding so its value is computed once and
    shared between the two mixture weights.
    """
    bindings: list[tuple[str, Expr]] = []

    def lower(node: Expr) -> Expr:
        match node:
            case Var() | Const() | Aux():
                return node
            case Prim(name, args):
                return Prim(name, tuple(lower(a) for a in args))
            case If(g, a, b):
                lowered_guard = lower(g)   # first: inner guards bind earlier
                gname = f"g{len(bindings) + 1}"
                bindings.append((gname, lowered_guard))
                ref = Aux(gname)
                w_then = Prim(SIG, (Prim("neg", (ref,)),))
                w_else = Prim(SIG, (ref,))
                return Prim("add", (Prim("mul", (w_then, lower(a))),
                                    Prim("mul", (w_else, lower(b)))))
        raise TypeError(f"not an expression node: {node!r}")

    body = lower(e)
    return SmoothProgram(tuple(bindings), body)


def print_program(prog: SmoothProgram) -> str:
    lines = [f"{name} = {print_expr(ex)}" for name, ex in prog.bindings]
    lines.append(print_expr(prog.body))
    return "\n".join(lines)


def eval_program(prog: SmoothProgram, x, eta: float,
                 reg: PrimitiveRegistry | None = None,
                 sharpness: float = 1.0) -> float:
    """Evaluate a lowered program; agrees with eval_smoothed on the source."""
    reg = reg if reg is not None else default_registry()

    env: dict[str, float] = {}

    def go(node) -> float:
        match node:
            case Var(i):
                return float(x[i - 1])
            case Const(v):
                return float(v)
            case Prim(name, args) if name == SIG:
                return float(sigma(go(args[0]), eta, sharpness))
            case Prim(name, args):
                pdef = reg.lookup(name)
                vals = tuple(go(a) for a in args)
                if pdef.domain is not None and not pdef.domain(*vals):
                    raise DomainError(name, vals)
                return float(pdef.fn(*vals))
            case If(g, a, b):
                # lowered programs are branch-free, but stay total anyway
                gv = go(g)
                s_plus = float(sigma(gv, eta, sharpness))
                return (1.0 - s_plus) * go(a) + s_plus * go(b)
            case Aux(name):
                return env[name]
        raise TypeError(f"not an expression node: {node!r}")

    for name, ex in prog.bindings:
        env[name] = go(ex)
    return go(prog.body)
