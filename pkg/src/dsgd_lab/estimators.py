"""Gradient-estimator family and Monte-Carlo aggregation.

Four estimators of d/dtheta E[F(phi_theta(s))]:

* ``reparam``          -- pathwise through hard branches; biased when a guard
                          sign depends on theta.
* ``smoothed:eta=...`` -- pathwise through the eta-smoothed semantics;
                          unbiased for the smoothed objective.
* ``score``            -- value times d log q_theta; unbiased, no baseline,
                          closed form for location-scale Gaussian transforms.
* ``boundary-oracle``  -- reparam plus the exact jump correction, available
                          for one-dimensional models with a single affine
                          guard; unbiased for the original objective.

Aggregation is deterministic for a fixed seed regardless of worker count:
samples are drawn by counter, partial sums are computed per fixed-size block,
and blocks are combined in a fixed-shape pairwise tree.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .autodiff import Gradient, value_and_grad_block, value_block
from .expr import If, Prim, eval_expr, walk
from .stochastics import StdNormal, sample_block

__all__ = [
    "Reparam", "Smoothed", "Score", "BoundaryOracle", "EstimatorKind",
    "parse_estimator", "format_estimator", "NotEligible", "GradStats",
    "sample_gradient", "gradient_block", "boundary_term", "estimate",
    "elbo_estimate", "elbo_stats", "resolve_workers",
]


@dataclass(frozen=True)
class Reparam:
    pass


@dataclass(frozen=True)
class Smoothed:
    eta: float

    def __post_init__(self):
        if self.eta <= 0.0:
            raise ValueError(f"smoothing accuracy must be positive, got {self.eta}")


@dataclass(frozen=True)
class Score:
    pass


@dataclass(frozen=True)
class BoundaryOracle:
    pass


EstimatorKind = Reparam | Smoothed | Score | BoundaryOracle


class NotEligible(ValueError):
    pass


def parse_estimator(text: str) -> EstimatorKind:
    """Parse a CLI/config estimator string.

    Accepted: "reparam", "score", "boundary-oracle", "smoothed:eta=<float>".
    """
    t = text.strip()
    if t == "reparam":
        return Reparam()
    if t == "score":
        return Score()
    if t == "boundary-oracle":
        return BoundaryOracle()
    if t.startswith("smoothed:"):
        body = t[len("smoothed:"):]
        if not body.startswith("eta="):
            raise ValueError(f"bad smoothed spec {text!r}, want smoothed:eta=<float>")
        try:
            eta = float(body[4:])
        except ValueError:
            raise ValueError(f"bad eta in {text!r}") from None
        return Smoothed(eta)
    raise ValueError(f"unknown estimator {text!r}")


def format_estimator(kind: EstimatorKind) -> str:
    match kind:
        case Reparam():
            return "reparam"
        case Smoothed(eta):
            return f"smoothed:eta={eta:g}"
        case Score():
            return "score"
        case BoundaryOracle():
            return "boundary-oracle"
    raise TypeError(f"not an estimator kind: {kind!r}")


@dataclass(frozen=True)
class GradStats:
    mean: np.ndarray
    var_avg: float    # average of per-component sample variances
    var_norm: float   # sample variance of the gradient L2 norm
    n_samples: int
    wall_seconds: float


# --------------------------------------------------------------------------
# Per-sample gradients
# --------------------------------------------------------------------------

def gradient_block(kind: EstimatorKind, model, theta, rng, indices,
                   sharpness: float = 1.0):
    """(values, gradients) for the draws at the given sample indices."""
    s = sample_block(model.base, rng, indices)
    match kind:
        case Reparam():
            return value_and_grad_block(model, theta, s, "standard")
        case Smoothed(eta):
            return value_and_grad_block(model, theta, s, "smoothed", eta,
                                        sharpness)
        case Score():
            if not isinstance(model.base, StdNormal):
                raise NotEligible(
                    "score estimator needs a standard-normal base "
                    f"(model {model.name!r} has {type(model.base).__name__})")
            vals = value_block(model, theta, s)
            rows = model.transform.score_rows(theta, s, model.m)
            return vals, vals[:, None] * rows
        case BoundaryOracle():
            vals, grads = value_and_grad_block(model, theta, s, "standard")
            return vals, grads + boundary_term(model, theta)[None, :]
    raise TypeError(f"not an estimator kind: {kind!r}")


def sample_gradient(kind: EstimatorKind, model, theta, rng,
                    index: int) -> Gradient:
    """One draw of the chosen estimator."""
    vals, grads = gradient_block(kind, model, theta, rng, [index])
    return Gradient(float(vals[0]), grads[0])


def _force_branch(e, target: If, which: str):
    """Copy of e with the given if-node replaced by one of its branches."""
    if e is target:
        return e.then if which == "then" else e.orelse
    match e:
        case If(g, a, b):
            return If(_force_branch(g, target, which),
                      _force_branch(a, target, which),
                      _force_branch(b, target, which))
        case Prim(name, args):
            return Prim(name, tuple(_force_branch(a, target, which)
                                    for a in args))
        case _:
            return e


def boundary_term(model, theta) -> np.ndarray:
    """Exact jump correction for a single affine guard in one dimension.

    For guard a*x + b with root x0 = -b/a, branch values g (taken below the
    root crossing, in guard sign order) and h (above), and x = mu + sigma*s:

        correction_i = (v(x0+) - v(x0-)) * q_theta(x0) * d phi/d theta_i (s0)

    where q_theta is the pushforward density and s0 = (x0 - mu)/sigma.  This
    is the derivative of the jump's contribution to the expectation; adding
    it to the reparameterisation gradient restores unbiasedness.
    """
    if not getattr(model, "boundary_eligible", False):
        raise NotEligible(f"model {model.name!r} is not boundary-eligible")
    theta = np.asarray(theta, dtype=float)
    ifs = [nd for nd in walk(model.expr) if isinstance(nd, If)]
    if model.n != 1 or len(ifs) != 1:
        raise NotEligible("boundary oracle needs n=1 and exactly one if")
    the_if = ifs[0]

    def guard_at(x):
        return eval_expr(the_if.guard, [x], model.registry)

    g0, g1, g2 = guard_at(0.0), guard_at(1.0), guard_at(2.0)
    a, b = g1 - g0, g0
    if abs(g2 - (2 * a + b)) > 1e-9 * max(1.0, abs(g2)) or a == 0.0:
        raise NotEligible("guard is not affine with nonzero slope")
    x0 = -b / a

    lo = eval_expr(_force_branch(model.expr, the_if, "then"), [x0], model.registry)
    hi = eval_expr(_force_branch(model.expr, the_if, "orelse"), [x0], model.registry)
    if a < 0.0:
        lo, hi = hi, lo      # above the root the guard is negative: then-side
    jump = hi - lo

    mu, sg = model.transform._mu_sigma(theta)
    if not isinstance(model.base, StdNormal):
        raise NotEligible("boundary oracle needs a standard-normal base")
    s0 = (x0 - mu[0]) / sg[0]
    q_x0 = math.exp(-0.5 * s0 * s0) / math.sqrt(2.0 * math.pi) / sg[0]

    out = np.zeros(model.m)
    for _, ti, coeff in model.transform.theta_rows(theta, np.array([[s0]])):
        out[ti] += jump * q_x0 * float(coeff[0])
    return out


# --------------------------------------------------------------------------
# Monte-Carlo aggregation
# --------------------------------------------------------------------------

_BLOCK = 4096


def resolve_workers(requested=None) -> int:
    """DSGD_LAB_WORKERS beats the explicit request; default 1."""
    env = os.environ.get("DSGD_LAB_WORKERS")
    if env is not None:
        w = int(env)
        if w < 1:
            raise ValueError(f"DSGD_LAB_WORKERS must be >= 1, got {env}")
        return w
    return int(requested) if requested else 1


def _block_partials(kind, model, theta, rng, lo, hi, offset, sharpness):
    idx = np.arange(lo, hi) + offset
    vals, grads = gradient_block(kind, model, theta, rng, idx, sharpness)
    norms = np.sqrt(np.sum(grads * grads, axis=1))
    return (hi - lo,
            grads.sum(axis=0), (grads * grads).sum(axis=0),
            norms.sum(), (norms * norms).sum(),
            vals.sum())


def _tree_reduce(parts):
    # fixed-shape pairwise reduction: the result depends only on the block
    # partition, never on which worker computed what
    while len(parts) > 1:
        nxt = []
        for i in range(0, len(parts) - 1, 2):
            a, b = parts[i], parts[i + 1]
            nxt.append(tuple(x + y for x, y in zip(a, b)))
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def _aggregate(kind, model, theta, n_samples, rng, workers, index_offset,
               sharpness):
    bounds = [(lo, min(lo + _BLOCK, n_samples))
              for lo in range(0, n_samples, _BLOCK)]
    w = resolve_workers(workers)
    if w > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=w) as pool:
            parts = list(pool.map(
                lambda ab: _block_partials(kind, model, theta, rng,
                                           ab[0], ab[1], index_offset,
                                           sharpness), bounds))
    else:
        parts = [_block_partials(kind, model, theta, rng, lo, hi,
                                 index_offset, sharpness)
                 for lo, hi in bounds]
    return _tree_reduce(parts)


def estimate(kind: EstimatorKind, model, theta, n_samples: int, rng,
             workers=None, index_offset: int = 0,
             sharpness: float = 1.0) -> GradStats:
    """Mean and variance diagnostics over n_samples estimator draws.

    Draws live at sample indices index_offset .. index_offset+n-1 of the
    given stream, so disjoint offsets give disjoint randomness.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    t0 = time.perf_counter()
    n, s1, s2, ns1, ns2, _ = _aggregate(kind, model, theta, n_samples, rng,
                                        workers, index_offset, sharpness)
    mean = s1 / n
    if n >= 2:
        comp_var = np.maximum(s2 - n * mean * mean, 0.0) / (n - 1)
        var_avg = float(np.mean(comp_var))
        nmean = ns1 / n
        var_norm = float(max(ns2 - n * nmean * nmean, 0.0) / (n - 1))
    else:
        var_avg = var_norm = 0.0
    return GradStats(mean, var_avg, var_norm, n, time.perf_counter() - t0)


def elbo_stats(model, theta, n_samples: int, rng, workers=None,
               index_offset: int = 0):
    """(mean, standard error) of the objective value under hard semantics.

    Includes the model's deterministic entropy-style bonus when the model
    declares one (it shifts the mean, not the spread).
    """
    bounds = [(lo, min(lo + _BLOCK, n_samples))
              for lo in range(0, n_samples, _BLOCK)]

    def block(ab):
        idx = np.arange(ab[0], ab[1]) + index_offset
        s = sample_block(model.base, rng, idx)
        v = value_block(model, theta, s)
        return (ab[1] - ab[0], v.sum(), (v * v).sum())

    w = resolve_workers(workers)
    if w > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=w) as pool:
            parts = list(pool.map(block, bounds))
    else:
        parts = [block(ab) for ab in bounds]
    n, s1, s2 = _tree_reduce(parts)
    mean = s1 / n
    bonus, _ = model.entropy_bonus(theta)
    if n >= 2:
        var = max(s2 - n * mean * mean, 0.0) / (n - 1)
        se = math.sqrt(var / n)
    else:
        se = 0.0
    return float(mean + bonus), se


def elbo_estimate(model, theta, n_samples: int, rng) -> float:
    """Monte-Carlo mean of the model objective at theta."""
    return elbo_stats(model, theta, n_samples, rng)[0]
