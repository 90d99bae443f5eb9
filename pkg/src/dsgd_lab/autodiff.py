"""Reverse-mode differentiation of expressions over batches of draws.

A forward interpreter walks the AST once per batch, building a tape of
local partial derivatives; a reverse sweep then accumulates adjoints.  Two
interpretations are supported:

* ``standard`` -- hard branching.  The guard contributes exactly zero
  gradient (there is no tape edge into it), matching the almost-everywhere
  derivative of the step function.
* ``smoothed`` -- both branches contribute through the logistic mixture
  weights; the guard receives the weight-derivative term
  sigma'_eta(g) * (orelse - then).

Values and adjoints are numpy arrays over the batch, so the per-node python
overhead is paid once per batch rather than once per sample.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import Aux, Const, Expr, If, Prim, PrimitiveRegistry, Var, default_registry
from .smoothing import sigma


class NonFiniteGradient(RuntimeError):
    def __init__(self, msg: str, where: str = ""):
        super().__init__(msg if not where else f"{msg} ({where})")
        self.where = where


@dataclass(frozen=True)
class Gradient:
    value: float
    wrt_theta: np.ndarray


class Tape:
    """Linear record of (value, incoming edges) suitable for one backward pass."""

    def __init__(self):
        self.values: list = []
        self.edges: list = []   # edges[i]: tuple of (input_id, partial) pairs

    def push(self, value, edges=()) -> int:
        self.values.append(value)
        self.edges.append(tuple(edges))
        return len(self.values) - 1

    def backward(self, out_id: int, batch: int) -> list:
        """Adjoints of every node w.r.t. node out_id (seeded with ones)."""
        adj = [None] * len(self.values)
        adj[out_id] = np.ones(batch)
        for i in range(out_id, -1, -1):
            a = adj[i]
            if a is None:
                continue
            for j, partial in self.edges[i]:
                contrib = a * partial
                # lanes with zero adjoint must stay exactly zero even if the
                # local partial is inf/nan (untaken branches, overflow lanes)
                contrib = np.where(a == 0.0, 0.0, contrib)
                adj[j] = contrib if adj[j] is None else adj[j] + contrib
        return adj


def _forward(e: Expr, leaf_ids: dict, tape: Tape | None, values_only: bool,
             reg: PrimitiveRegistry, mode: str, eta, sharpness: float):
    """Interpret e over the batch; returns (value, node_id-or-None).

    A None node id marks a constant-folded literal with no adjoint.  Shared
    subtrees (same object) are interpreted once via an id-memo.
    """
    memo: dict[int, tuple] = {}

    def go(node):
        key = id(node)
        if key in memo:
            return memo[key]
        match node:
            case Var(i):
                out = leaf_ids[i]
            case Const(v):
                out = (float(v), None)
            case Prim(name, args):
                pdef = reg.lookup(name)
                ins = [go(a) for a in args]
                vals = [v for v, _ in ins]
                val = pdef.fn(*vals)
                if values_only or all(nid is None for _, nid in ins):
                    out = (val, None)     # literal lane: nothing to adjoint
                else:
                    out = (val, _push_prim(tape, pdef, vals, ins, val))
            case If(g, a, b):
                gv, gid = go(g)
                av, aid = go(a)
                bv, bid = go(b)
                if mode == "standard":
                    mask = np.asarray(gv) < 0.0
                    val = np.where(mask, av, bv)
                    if values_only or (aid is None and bid is None):
                        out = (val, None)
                    else:
                        edges = []
                        w = mask.astype(float)
                        if aid is not None:
                            edges.append((aid, w))
                        if bid is not None:
                            edges.append((bid, 1.0 - w))
                        # no edge into the guard: its adjoint is exactly zero
                        out = (val, tape.push(val, edges))
                else:
                    s_plus = sigma(gv, eta, sharpness)
                    s_minus = 1.0 - s_plus
                    val = s_minus * av + s_plus * bv
                    if values_only or (gid is None and aid is None and bid is None):
                        out = (val, None)
                    else:
                        edges = []
                        if aid is not None:
                            edges.append((aid, s_minus))
                        if bid is not None:
                            edges.append((bid, s_plus))
                        if gid is not None:
                            sp = sharpness * s_plus * s_minus / eta
                            edges.append((gid, sp * (np.asarray(bv) - av)))
                        out = (val, tape.push(val, edges))
            case Aux(name):
                raise KeyError(f"unbound auxiliary {name!r} in differentiable "
                               "evaluation")
            case _:
                raise TypeError(f"not an expression node: {node!r}")
        memo[key] = out
        return out

    return go(e)


def _push_prim(tape: Tape, pdef, vals, ins, val) -> int:
    edges = []
    for k, (_, nid) in enumerate(ins):
        if nid is not None:
            edges.append((nid, pdef.partials[k](*vals)))
    return tape.push(val, edges)


def expr_grad_block(e: Expr, x_block, n: int,
                    reg: PrimitiveRegistry | None = None,
                    mode: str = "standard", eta: float | None = None,
                    sharpness: float = 1.0):
    """Values and d/dx over a batch of latent points; grads shape (B, n)."""
    reg = reg if reg is not None else default_registry()
    if mode not in ("standard", "smoothed"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "smoothed" and (eta is None or eta <= 0.0):
        raise ValueError("smoothed mode needs a positive eta")
    x_block = np.atleast_2d(np.asarray(x_block, dtype=float))
    batch = x_block.shape[0]
    tape = Tape()
    leaf_ids = {j + 1: (x_block[:, j], tape.push(x_block[:, j]))
                for j in range(n)}
    with np.errstate(all="ignore"):
        val, out_id = _forward(e, leaf_ids, tape, False, reg, mode, eta, sharpness)
        vals = np.broadcast_to(np.asarray(val, dtype=float), (batch,)).copy()
        grads = np.zeros((batch, n))
        if out_id is not None:
            adj = tape.backward(out_id, batch)
            for j in range(n):
                a = adj[leaf_ids[j + 1][1]]
                if a is not None:
                    grads[:, j] = a
    return vals, grads


def expr_value_block(e: Expr, x_block, n: int,
                     reg: PrimitiveRegistry | None = None,
                     mode: str = "standard", eta: float | None = None,
                     sharpness: float = 1.0) -> np.ndarray:
    """Batched evaluation without derivative bookkeeping."""
    reg = reg if reg is not None else default_registry()
    x_block = np.atleast_2d(np.asarray(x_block, dtype=float))
    batch = x_block.shape[0]
    leaf_ids = {j + 1: (x_block[:, j], None) for j in range(n)}
    with np.errstate(all="ignore"):
        val, _ = _forward(e, leaf_ids, None, True, reg, mode, eta, sharpness)
    return np.broadcast_to(np.asarray(val, dtype=float), (batch,)).copy()


# --------------------------------------------------------------------------
# Composite objective: expression after the parameter transform
# --------------------------------------------------------------------------

def value_and_grad_block(model, theta, s_block, mode: str,
                         eta: float | None = None, sharpness: float = 1.0):
    """Pathwise values and theta-gradients on a block of base draws.

    Chains d(expr)/dx through dx/dtheta of the model transform.  Raises
    NonFiniteGradient if any lane produces a non-finite value or gradient.
    """
    theta = np.asarray(theta, dtype=float)
    s_block = np.atleast_2d(np.asarray(s_block, dtype=float))
    x_block = model.transform.apply(theta, s_block)
    vals, dx = expr_grad_block(model.expr, x_block, model.n, model.registry,
                               mode, eta, sharpness)
    grads = np.zeros((s_block.shape[0], model.m))
    for j, ti, coeff in model.transform.theta_rows(theta, s_block):
        grads[:, ti] += dx[:, j] * coeff
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(grads))):
        raise NonFiniteGradient(
            "non-finite value or gradient in batch",
            where=f"model={getattr(model, 'name', '?')} mode={mode} eta={eta}")
    return vals, grads


def value_block(model, theta, s_block) -> np.ndarray:
    """Standard-semantics objective values on a block of base draws."""
    theta = np.asarray(theta, dtype=float)
    s_block = np.atleast_2d(np.asarray(s_block, dtype=float))
    x_block = model.transform.apply(theta, s_block)
    return expr_value_block(model.expr, x_block, model.n, model.registry)


def grad_smoothed(model, theta, s, eta: float, sharpness: float = 1.0) -> Gradient:
    """Unbiased pathwise gradient of the eta-smoothed objective at one draw."""
    vals, grads = value_and_grad_block(model, theta, np.atleast_2d(s),
                                       "smoothed", eta, sharpness)
    return Gradient(float(vals[0]), grads[0])


def grad_reparam_biased(model, theta, s) -> Gradient:
    """Pathwise gradient that differentiates straight through hard branches.

    Biased whenever a guard's sign depends on theta: the branch-switch
    contribution is silently dropped (guard adjoint is exactly zero).
    """
    vals, grads = value_and_grad_block(model, theta, np.atleast_2d(s), "standard")
    return Gradient(float(vals[0]), grads[0])


def finite_diff(model, theta, s, eta: float | None = None,
                h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the composite objective in theta."""
    theta = np.asarray(theta, dtype=float)
    s_block = np.atleast_2d(s)

    def f(t):
        x = model.transform.apply(t, s_block)
        if eta is None:
            v = expr_value_block(model.expr, x, model.n, model.registry)
        else:
            v = expr_value_block(model.expr, x, model.n, model.registry,
                                 "smoothed", eta)
        return float(v[0])

    out = np.zeros_like(theta)
    for i in range(theta.size):
        hi = theta.copy()
        lo = theta.copy()
        hi[i] += h
        lo[i] -= h
        out[i] = (f(hi) - f(lo)) / (2.0 * h)
    return out
