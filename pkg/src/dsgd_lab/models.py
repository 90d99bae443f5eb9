"""Built-in benchmark models and closed-form oracles.

Each model packages an objective expression (log-joint of a small
probabilistic program, ELBO sign convention: larger is better), a
reparameterisation transform for the variational parameters, a base
distribution, and a feasible parameter box.  Desk-scale defaults keep
optimisation runs cheap; full-scale constructions are available for
metadata checks.

Observation data for the textmsg and temperature models is synthetic,
generated once from the documented ground-truth settings with a fixed seed
and shipped as CSV files under ``dsgd_lab/data``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.special import roots_hermite, roots_legendre

from .expr import (Const, Expr, If, Prim, PrimitiveRegistry, Var, affine_name,
                   check_safe, count_ifs, default_registry, free_vars,
                   nesting_depth, parse, register_affine_sum, walk, SafeReport)
from .stochastics import (Fixed, LocationScale, ParamBox, StdNormal, Transform,
                          TransformViolation, validate_transform)

__all__ = [
    "ModelSpec", "make_model", "step_expr", "example11_expr",
    "nested_guard_expr", "model_example11", "model_two_level",
    "model_random_walk", "model_temperature_lite", "model_cheating_lite",
    "model_textmsg", "model_xornet_lite", "MODELS", "get_model",
    "list_models", "oracle_true_gradient_example11",
    "oracle_stationary_example11", "oracle_smoothed_gradient_example11",
    "oracle_smoothed_gradient_example11_gh", "load_textmsg_counts",
    "load_temperature_obs",
]


@dataclass(frozen=True)
class ModelSpec:
    name: str
    expr: Expr
    transform: Transform
    base: object
    box: ParamBox
    n: int
    m: int
    ell: int
    if_count: int
    boundary_eligible: bool
    safe: SafeReport
    registry: PrimitiveRegistry
    direction: str = "max"
    include_entropy: bool = False
    theta_init: tuple = ()
    notes: str = ""

    def entropy_bonus(self, theta):
        """Deterministic objective bonus: sum of log scale(theta) and grad.

        For variational models the objective is E[log joint] plus the
        entropy of q up to an additive constant, which for location-scale
        families is the sum of log scales.
        """
        if not self.include_entropy:
            return 0.0, np.zeros(self.m)
        return self.transform.log_sigma_sum_and_grad(theta, self.m)


def _validate_prims(e: Expr, reg: PrimitiveRegistry) -> None:
    for node in walk(e):
        if isinstance(node, Prim):
            pdef = reg.lookup(node.name)   # raises UnknownPrimitive
            if len(node.args) != pdef.arity:
                raise ValueError(
                    f"{node.name} expects {pdef.arity} args, got {len(node.args)}")


def make_model(name: str, expr_: Expr, transform: Transform, base, box: ParamBox,
               *, registry: PrimitiveRegistry | None = None,
               direction: str = "max", include_entropy: bool = False,
               theta_init=None, boundary_eligible: bool = False,
               notes: str = "") -> ModelSpec:
    """Assemble and validate a ModelSpec (the only constructor)."""
    reg = registry if registry is not None else default_registry()
    n = transform.n
    if base.n != n:
        raise ValueError(f"base dimension {base.n} != transform dimension {n}")
    fv = free_vars(expr_)
    if fv and (min(fv) < 1 or max(fv) > n):
        raise ValueError(f"expression uses variables {sorted(fv)} outside 1..{n}")
    _validate_prims(expr_, reg)
    check = validate_transform(transform, box)
    if not check.ok:
        raise TransformViolation("; ".join(check.issues))
    ell = nesting_depth(expr_)
    ifs = count_ifs(expr_)
    if boundary_eligible and (n != 1 or ifs != 1):
        raise ValueError("boundary eligibility needs n=1 and a single if")
    if direction not in ("max", "min"):
        raise ValueError(f"direction must be max or min, got {direction!r}")
    m = box.m
    if theta_init is None:
        theta_init = tuple(0.0 for _ in range(m))
    theta_init = tuple(float(v) for v in theta_init)
    if len(theta_init) != m:
        raise ValueError("theta_init length != parameter dimension")
    if np.any(np.asarray(theta_init) < box.lower) or \
       np.any(np.asarray(theta_init) > box.upper):
        raise ValueError("theta_init outside the box")
    return ModelSpec(name, expr_, transform, base, box, n, m, ell, ifs,
                     boundary_eligible, check_safe(expr_, reg), reg,
                     direction, include_entropy, theta_init, notes)


# --------------------------------------------------------------------------
# Expression fixtures
# --------------------------------------------------------------------------

def step_expr() -> Expr:
    """Bare step function: 0 below zero, 1 at and above."""
    return parse("if z1 { 0.0 } else { 1.0 }")


def example11_expr() -> Expr:
    """-0.5*z^2 plus a unit step at zero."""
    return parse("add(mul(-0.5, sq(z1)), if z1 { 0.0 } else { 1.0 })")


def nested_guard_expr() -> Expr:
    """Depth-2 fixture: the outer guard contains two if-statements."""
    return parse("if sub(add(if z1 { 0.0 } else { 1.0 },"
                 " if z2 { 0.0 } else { 1.0 }), 1.0)"
                 " { 0.0 } else { 1.0 }")


def _sum_exprs(terms) -> Expr:
    """Balanced add-tree (keeps recursion depth logarithmic)."""
    terms = list(terms)
    if not terms:
        return Const(0.0)
    while len(terms) > 1:
        nxt = [Prim("add", (terms[i], terms[i + 1]))
               for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            nxt.append(terms[-1])
        terms = nxt
    return terms[0]


def _normal_term(x: Expr, mu: float, sd: float) -> Expr:
    return Prim("normal_logpdf", (x, Const(mu), Const(sd)))


def _abs_expr(v: Var) -> Expr:
    return If(v, Prim("neg", (v,)), v)


# --------------------------------------------------------------------------
# Example 1.1 and its oracles
# --------------------------------------------------------------------------

def model_example11() -> ModelSpec:
    """One latent, one step discontinuity, translation transform x = s + theta."""
    transform = Transform((LocationScale(("theta", 0), ("const", 1.0)),))
    return make_model("example11", example11_expr(), transform, StdNormal(1),
                      ParamBox((-3.0,), (3.0,)), boundary_eligible=True,
                      theta_init=(0.0,),
                      notes="closed-form gradient -theta + npdf(-theta)")


def oracle_true_gradient_example11(theta: float) -> float:
    """d/dtheta E[-0.5 x^2 + step(x)] at x = s + theta: -theta + npdf(-theta)."""
    return -theta + math.exp(-0.5 * theta * theta) / math.sqrt(2.0 * math.pi)


def oracle_stationary_example11() -> float:
    """Root of the true gradient on [0,1] by bisection to 1e-10."""
    lo, hi = 0.0, 1.0
    flo = oracle_true_gradient_example11(lo)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        fmid = oracle_true_gradient_example11(mid)
        if fmid == 0.0:
            return mid
        if (flo > 0.0) == (fmid > 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_GL_CACHE: dict = {}
_GH_CACHE: dict = {}


def oracle_smoothed_gradient_example11(theta: float, eta: float,
                                       nodes: int = 200) -> float:
    """Quadrature of the smoothed gradient -theta + E[sigma'_eta(s + theta)].

    Substituting u = sigma_eta(s + theta) turns the expectation into
    integral_0^1 npdf(eta * logit(u) - theta) du, which Gauss-Legendre
    resolves uniformly in eta (error < 1e-6 down to eta = 1e-4, where the
    direct Gauss-Hermite form of the integrand degenerates).
    """
    if nodes not in _GL_CACHE:
        x, w = roots_legendre(nodes)
        _GL_CACHE[nodes] = (0.5 * (x + 1.0), 0.5 * w)
    u, w = _GL_CACHE[nodes]
    s = eta * np.log(u / (1.0 - u)) - theta
    dens = np.exp(-0.5 * s * s) / math.sqrt(2.0 * math.pi)
    return -theta + float(np.sum(w * dens))


def oracle_smoothed_gradient_example11_gh(theta: float, eta: float,
                                          nodes: int = 200) -> float:
    """Same quantity by Gauss-Hermite in s; reliable for eta >= 0.2 only.

    Kept as an independent cross-check of the substitution route on the
    eta range where the sigma'_eta factor is still resolvable on Hermite
    abscissae.
    """
    if nodes not in _GH_CACHE:
        x, w = roots_hermite(nodes)
        _GH_CACHE[nodes] = (x, w)
    x, w = _GH_CACHE[nodes]
    s = math.sqrt(2.0) * x          # integrate against exp(-x^2)
    t = (s + theta) / eta
    sig = np.where(t >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(t))),
                   np.exp(-np.abs(t)) / (1.0 + np.exp(-np.abs(t))))
    integrand = sig * (1.0 - sig) / eta
    return -theta + float(np.sum(w * integrand) / math.sqrt(math.pi))


# --------------------------------------------------------------------------
# Depth-2 benchmark
# --------------------------------------------------------------------------

def model_two_level() -> ModelSpec:
    """Two latents whose step indicators feed a second-level guard.

    Objective P(step(x1) + step(x2) >= 1)-style; the guard-in-guard
    structure realises nesting depth 2, so the smoothed-gradient variance
    scales up to eta^-2.
    """
    transform = Transform((LocationScale(("theta", 0), ("const", 1.0)),
                           LocationScale(("theta", 1), ("const", 1.0))))
    return make_model("two-level", nested_guard_expr(), transform,
                      StdNormal(2), ParamBox((-3.0, -3.0), (3.0, 3.0)),
                      theta_init=(0.0, 0.0))


# --------------------------------------------------------------------------
# Random walk
# --------------------------------------------------------------------------

#: observed total walked distance (generated: start 0.8, unit-normal steps,
#: destination 2.0, walk stops on crossing; see data generation notes)
RANDOM_WALK_OBSERVED = 5.4928
RANDOM_WALK_DESTINATION = 2.0


def model_random_walk(steps: int = 16) -> ModelSpec:
    """Bounded walk: accumulate |step| until the position crosses the goal.

    Latents: z1 the start position (inferred), z2..z_steps the step draws.
    Step i is walked iff the signed position before it is short of the
    destination -- an affine guard over distinct latents, so every guard is
    safe and depth stays 1 (the |step| ifs sit in branch position).  A
    terminal shortfall penalty (continuous at the crossing) accounts for
    walks that never arrive.  if_count = 2*steps - 1.
    """
    if steps < 2:
        raise ValueError("need at least 2 steps")
    n = steps
    reg = default_registry()
    d = RANDOM_WALK_DESTINATION

    def pos_guard(k: int) -> str:
        # z1 + ... + zk - destination
        return register_affine_sum(reg, f"walkpos{k}", [1.0] * k, -d)

    walked = []
    for i in range(2, n + 1):
        g = Prim(pos_guard(i - 1), tuple(Var(j) for j in range(1, i)))
        walked.append(If(g, _abs_expr(Var(i)), Const(0.0)))
    total = _sum_exprs(walked)

    g_final = Prim(pos_guard(n), tuple(Var(j) for j in range(1, n + 1)))
    shortfall = If(g_final,
                   Prim("mul", (Const(0.5),
                                Prim(pos_guard(n),
                                     tuple(Var(j) for j in range(1, n + 1))))),
                   Const(0.0))

    objective = _sum_exprs([
        _normal_term(Var(1), 0.0, 1.5),                    # start prior
        Prim("normal_logpdf", (Const(RANDOM_WALK_OBSERVED), total, Const(0.5))),
        shortfall,
    ])

    coords = [LocationScale(("theta", 0), ("exp", 1))] + \
             [Fixed() for _ in range(n - 1)]
    box = ParamBox((-4.0, -4.0), (4.0, 1.5))
    return make_model("random-walk", objective, Transform(tuple(coords)),
                      StdNormal(n), box, registry=reg, include_entropy=True,
                      theta_init=(0.0, -0.5),
                      notes=f"steps={steps}; observed distance "
                            f"{RANDOM_WALK_OBSERVED} toward {d}")


# --------------------------------------------------------------------------
# Thermostat
# --------------------------------------------------------------------------

_TEMP = dict(c=0.15, phi=0.9, sd_in=0.35, sd_obs=0.25,
             low=-0.5, high=0.8, h_full=0.6, h_half=0.3)


#: temperature_obs.csv was generated once (seed 20240615) from exactly the
#: _TEMP dynamics above: 40 steps of the AR(1) ambient, heater applied by
#: band, observation noise sd 0.25.
def load_temperature_obs() -> np.ndarray:
    with resources.files("dsgd_lab.data").joinpath(
            "temperature_obs.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["y"]) for r in rows])


def model_temperature_lite(horizon: int = 20) -> ModelSpec:
    """Room-temperature controller with a two-threshold heater.

    Ambient follows a mean-reverting AR(1) driven by standard-normal
    innovations z1..z_{h+1} (z1 scales the initial state), so the ambient at
    any step is affine over distinct latents and both heater guards are
    safe.  Heat: full below `low`, half below `high`, off above.  Each step
    contributes two ifs and one observation term; the observed series is
    ambient + heat + noise.
    """
    p = _TEMP
    y = load_temperature_obs()
    if not 1 <= horizon <= len(y):
        raise ValueError(f"horizon must be in 1..{len(y)}")
    n = horizon + 1
    reg = default_registry()

    terms = [_normal_term(Var(j), 0.0, 1.0) for j in range(1, n + 1)]
    for t in range(1, horizon + 1):
        # ambient_t = c + phi^t * z1 + sd_in * sum_j phi^(t-j) z_{j+1}
        w = [p["phi"] ** t] + [p["sd_in"] * p["phi"] ** (t - j)
                               for j in range(1, t + 1)]
        zs = tuple(Var(j) for j in range(1, t + 2))
        lo_name = register_affine_sum(reg, f"amblo{t}", w, p["c"] - p["low"])
        hi_name = register_affine_sum(reg, f"ambhi{t}", w, p["c"] - p["high"])
        val_name = register_affine_sum(reg, f"amb{t}", w, p["c"])
        heat = If(Prim(lo_name, zs), Const(p["h_full"]),
                  If(Prim(hi_name, zs), Const(p["h_half"]), Const(0.0)))
        room = Prim("add", (Prim(val_name, zs), heat))
        terms.append(Prim("normal_logpdf",
                          (Const(float(y[t - 1])), room, Const(p["sd_obs"]))))

    coords = tuple(LocationScale(("theta", j), ("exp", n + j))
                   for j in range(n))
    box = ParamBox(tuple([-5.0] * n + [-4.0] * n),
                   tuple([5.0] * n + [1.0] * n))
    theta_init = tuple([0.0] * n + [-1.0] * n)
    return make_model("temperature-lite", _sum_exprs(terms),
                      Transform(coords), StdNormal(n), box, registry=reg,
                      include_entropy=True, theta_init=theta_init,
                      notes=f"horizon={horizon}; band [{p['low']}, {p['high']}]")


# --------------------------------------------------------------------------
# Cheating survey
# --------------------------------------------------------------------------

def model_cheating_lite(students: int = 30) -> ModelSpec:
    """Randomised-response survey: two coin flips per student.

    First coin (z_{2i}) picks truthful answering, second (z_{2i+1}) picks
    the forced answer; the truthful branch answers with the cohort cheating
    rate sigmoid(z1).  The expected yes-count is matched to the observed
    count through a Gaussian likelihood at binomial scale.
    """
    if students < 1:
        raise ValueError("need at least one student")
    n = 1 + 2 * students
    yes_obs = round(0.4 * students)          # shipped observed rate 0.4
    sd_bin = math.sqrt(0.25 * students)

    rate = Prim("logistic_sigmoid", (Var(1),))
    answers = []
    for i in range(students):
        c1 = Var(2 + 2 * i)
        c2 = Var(3 + 2 * i)
        answers.append(If(c1, rate, If(c2, Const(1.0), Const(0.0))))
    total_yes = _sum_exprs(answers)

    objective = _sum_exprs([
        _normal_term(Var(1), 0.0, 1.0),
        Prim("normal_logpdf", (Const(float(yes_obs)), total_yes,
                               Const(sd_bin))),
    ])
    coords = [LocationScale(("theta", 0), ("exp", 1))] + \
             [Fixed() for _ in range(n - 1)]
    box = ParamBox((-4.0, -4.0), (4.0, 1.5))
    return make_model("cheating-lite", objective, Transform(tuple(coords)),
                      StdNormal(n), box, include_entropy=True,
                      theta_init=(0.0, -0.5),
                      notes=f"students={students}; observed yes={yes_obs}")


# --------------------------------------------------------------------------
# Text-message changepoint
# --------------------------------------------------------------------------

#: textmsg_counts.csv was generated once (seed 20240615) from a Poisson
#: changepoint: rate 1.8 before day 22.4, rate 4.2 after.
def load_textmsg_counts() -> np.ndarray:
    with resources.files("dsgd_lab.data").joinpath(
            "textmsg_counts.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    return np.array([int(r["count"]) for r in rows])


def model_textmsg(days: int = 37) -> ModelSpec:
    """Poisson changepoint on daily message counts.

    Latents: z1, z2 the log-rates, z3 the changepoint day.  Each day
    branches on the affine guard day - z3 and contributes the Poisson
    log-likelihood (up to a theta-free constant) at the selected rate.
    """
    counts = load_textmsg_counts()
    if not 1 <= days <= len(counts):
        raise ValueError(f"days must be in 1..{len(counts)}")

    def day_term(i: int) -> Expr:
        guard = Prim(affine_name(-1.0, float(i)), (Var(3),))
        early = Prim("sub", (Prim("mul", (Const(float(counts[i - 1])), Var(1))),
                             Prim("exp", (Var(1),))))
        late = Prim("sub", (Prim("mul", (Const(float(counts[i - 1])), Var(2))),
                            Prim("exp", (Var(2),))))
        return If(guard, early, late)

    terms = [_normal_term(Var(1), 1.0, 1.5),
             _normal_term(Var(2), 1.0, 1.5),
             _normal_term(Var(3), 19.0, 10.0)]
    terms += [day_term(i) for i in range(1, days + 1)]

    coords = tuple(LocationScale(("theta", j), ("exp", 3 + j))
                   for j in range(3))
    box = ParamBox((-3.0, -3.0, 1.0, -4.0, -4.0, -4.0),
                   (5.0, 5.0, 37.0, 1.5, 1.5, 2.5))
    return make_model("textmsg", _sum_exprs(terms), Transform(coords),
                      StdNormal(3), box, include_entropy=True,
                      theta_init=(1.0, 1.0, 19.0, -0.5, -0.5, 1.0),
                      notes=f"days={days}")


# --------------------------------------------------------------------------
# XOR step network
# --------------------------------------------------------------------------

_XOR_CASES = ((0.0, 0.0, 0), (0.0, 1.0, 1), (1.0, 0.0, 1), (1.0, 1.0, 0))


def model_xornet_lite() -> ModelSpec:
    """2-2-1 step-activation network classifying XOR, weights inferred.

    Latents: z1..z3 and z4..z6 the two hidden units' (w1, w2, bias), z7..z9
    the output unit's.  Hidden activations are step functions of affine
    pre-activations; the output guard contains the hidden ifs and the
    correctness guard contains the output if, giving nesting depth 3.
    """
    reg = default_registry()
    lp_ok, lp_bad = math.log(0.9), math.log(0.1)
    terms = [_normal_term(Var(j), 0.0, 1.5) for j in range(1, 10)]
    for e, (x1, x2, label) in enumerate(_XOR_CASES):
        hidden = []
        for u in range(2):
            name = register_affine_sum(reg, f"pre{e}u{u}", [x1, x2, 1.0], 0.0)
            zs = (Var(3 * u + 1), Var(3 * u + 2), Var(3 * u + 3))
            hidden.append(If(Prim(name, zs), Const(0.0), Const(1.0)))
        out_pre = Prim("add", (Prim("add", (Prim("mul", (Var(7), hidden[0])),
                                            Prim("mul", (Var(8), hidden[1])))),
                               Var(9)))
        out = If(out_pre, Const(0.0), Const(1.0))
        want_one = Prim("sub", (Const(0.5), out))
        want_zero = Prim("sub", (out, Const(0.5)))
        guard = want_one if label == 1 else want_zero
        terms.append(If(guard, Const(lp_ok), Const(lp_bad)))

    coords = tuple(LocationScale(("theta", j), ("exp", 9 + j))
                   for j in range(9))
    box = ParamBox(tuple([-6.0] * 9 + [-5.0] * 9),
                   tuple([6.0] * 9 + [1.0] * 9))
    theta_init = tuple([0.0] * 9 + [-1.0] * 9)
    return make_model("xornet-lite", _sum_exprs(terms), Transform(coords),
                      StdNormal(9), box, registry=reg, include_entropy=True,
                      theta_init=theta_init,
                      notes="4 XOR examples, step activations")


# --------------------------------------------------------------------------
# Lookup
# --------------------------------------------------------------------------

MODELS = {
    "example11": model_example11,
    "two-level": model_two_level,
    "random-walk": model_random_walk,
    "temperature-lite": model_temperature_lite,
    "cheating-lite": model_cheating_lite,
    "textmsg": model_textmsg,
    "xornet-lite": model_xornet_lite,
}


def get_model(name: str, **kwargs) -> ModelSpec:
    try:
        ctor = MODELS[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; known: {', '.join(sorted(MODELS))}") \
            from None
    return ctor(**kwargs)


def list_models() -> list[ModelSpec]:
    return [ctor() for ctor in MODELS.values()]
