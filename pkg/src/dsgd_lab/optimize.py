"""Step-size/accuracy schedules, compatibility calculus, optimisers, driver.

The driver anneals the smoothing accuracy: iteration k differentiates the
eta_k-smoothed objective, with eta_k -> 0 on a schedule compatible with the
step sizes gamma_k.  For power-law pairs gamma_k = gamma0 * k^-a,
eta_k = eta0 * k^-rho and guard-nesting depth ell, the summability condition
"sum gamma = inf, sum gamma^2 * eta^-ell < inf" reduces to

    a <= 1  and  2a - rho*ell > 1,

with a relaxed variant (the ratio of the two partial sums tending to zero)
that additionally admits a < 1 with rho*ell < a or 2a - rho*ell = 1.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .autodiff import NonFiniteGradient
from .estimators import (EstimatorKind, Smoothed, estimate, elbo_stats,
                         format_estimator, gradient_block, parse_estimator)
from .smoothing import ETA_FLOOR
from .stochastics import ParamBox, RngStream

__all__ = [
    "InvalidExponent", "ScheduleSpec", "make_schedule", "eta_from_anchor",
    "theorem_schedule", "eta_at", "gamma_at", "CompatibilityReport",
    "check_compatibility", "ParamBox", "project", "AdamState", "adam_update",
    "dsgd_step", "Checkpoint", "Trajectory", "run", "trajectory_to_csv",
]


class InvalidExponent(ValueError):
    pass


_GAMMA_EXPONENTS = {"constant": 0.0, "harmonic": 1.0}


@dataclass(frozen=True)
class ScheduleSpec:
    """Step sizes gamma0 * k^-gamma_exp and accuracies eta0 * k^-eta_exp.

    gamma_kind "constant" and "harmonic" pin the exponent to 0 and 1;
    "powerlaw" takes an arbitrary exponent (e.g. 0.5 for 1/sqrt(k)).
    eta_kind "fixed" holds eta at eta0.  Accuracies are floored at eta_floor.
    """
    gamma_kind: str = "harmonic"
    gamma0: float = 1.0
    gamma_exp: float = 1.0
    eta_kind: str = "powerlaw"
    eta0: float = 1.0
    eta_exp: float = 0.5
    eta_floor: float = ETA_FLOOR

    def __post_init__(self):
        if self.gamma_kind not in ("constant", "harmonic", "powerlaw"):
            raise ValueError(f"unknown gamma kind {self.gamma_kind!r}")
        if self.eta_kind not in ("fixed", "powerlaw"):
            raise ValueError(f"unknown eta kind {self.eta_kind!r}")
        if self.gamma0 <= 0.0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if self.eta0 <= 0.0:
            raise ValueError(f"eta0 must be positive, got {self.eta0}")
        want = _GAMMA_EXPONENTS.get(self.gamma_kind)
        if want is not None and self.gamma_exp != want:
            raise ValueError(
                f"{self.gamma_kind} gamma implies exponent {want}, "
                f"got {self.gamma_exp}")
        if self.gamma_exp < 0.0:
            raise InvalidExponent(f"gamma exponent must be >= 0, got {self.gamma_exp}")
        if self.eta_kind == "powerlaw" and self.eta_exp <= 0.0:
            raise InvalidExponent(f"eta exponent must be > 0, got {self.eta_exp}")
        if self.eta_floor <= 0.0:
            raise ValueError("eta_floor must be positive")


def make_schedule(gamma_kind: str = "harmonic", gamma0: float = 1.0,
                  gamma_exp: float | None = None,
                  eta_kind: str = "powerlaw", eta0: float = 1.0,
                  eta_exp: float = 0.5,
                  eta_floor: float = ETA_FLOOR) -> ScheduleSpec:
    if gamma_exp is None:
        gamma_exp = _GAMMA_EXPONENTS.get(gamma_kind)
        if gamma_exp is None:
            raise ValueError("powerlaw gamma needs an explicit gamma_exp")
    return ScheduleSpec(gamma_kind, gamma0, gamma_exp,
                        eta_kind, eta0, eta_exp, eta_floor)


def eta_from_anchor(value: float, k_anchor: int, rho: float = 0.5) -> float:
    """eta0 such that eta0 * k_anchor^-rho == value."""
    if value <= 0.0 or k_anchor < 1:
        raise ValueError("anchor needs value > 0 and k >= 1")
    return value * k_anchor ** rho


def theorem_schedule(ell: int, eps: float | None = None, gamma0: float = 1.0,
                     eta0: float = 1.0) -> ScheduleSpec:
    """Harmonic steps with eta exponent rho = 1/ell - eps (default eps 0.1/ell).

    Any such pair satisfies the summability condition: 2*1 - rho*ell
    = 1 + eps*ell > 1.
    """
    if ell < 1:
        raise InvalidExponent(f"depth must be >= 1, got {ell}")
    if eps is None:
        eps = 0.1 / ell
    if not 0.0 < eps < 1.0 / ell:
        raise InvalidExponent(
            f"need 0 < eps < 1/ell = {1.0 / ell:.6g}, got {eps}")
    return make_schedule("harmonic", gamma0, eta_kind="powerlaw",
                         eta0=eta0, eta_exp=1.0 / ell - eps)


def eta_at(spec: ScheduleSpec, k: int, ell: int | None = None) -> float:
    """Accuracy at iteration k >= 1 (the ell argument is informational)."""
    if k < 1:
        raise ValueError(f"iteration must be >= 1, got {k}")
    if spec.eta_kind == "fixed":
        return max(spec.eta0, spec.eta_floor)
    return max(spec.eta0 * float(k) ** -spec.eta_exp, spec.eta_floor)


def gamma_at(spec: ScheduleSpec, k: int) -> float:
    if k < 1:
        raise ValueError(f"iteration must be >= 1, got {k}")
    return spec.gamma0 * float(k) ** -spec.gamma_exp


@dataclass(frozen=True)
class CompatibilityReport:
    gamma_exp: float
    eta_exp: float
    ell: int
    steps_diverge: bool       # sum gamma_k = infinity
    strict: bool              # sum gamma^2 eta^-ell < infinity
    relaxed: bool             # ratio of partial sums -> 0
    verdict: str              # compatible | compatible-relaxed | incompatible
    ratio_trace: tuple        # ((K, S2/S1), ...) over decades of K
    trace_decreasing: bool    # ratio non-increasing over the last decades


def check_compatibility(spec: ScheduleSpec, ell: int,
                        horizon: int = 10 ** 6) -> CompatibilityReport:
    """Closed-form verdict for power-law pairs plus a numeric partial-sum trace.

    S1(K) = sum_{k<=K} gamma_k and S2(K) = sum_{k<=K} gamma_k^2 * eta_k^-ell
    (the schedule's variance proxy).  The strict condition needs S1 -> inf
    and S2 bounded; the relaxed one only S2/S1 -> 0.
    """
    if ell < 1:
        raise InvalidExponent(f"depth must be >= 1, got {ell}")
    a = spec.gamma_exp
    b = spec.eta_exp if spec.eta_kind == "powerlaw" else 0.0
    diverges = a <= 1.0
    strict = diverges and (2.0 * a - b * ell > 1.0)
    boundary = abs(2.0 * a - b * ell - 1.0) < 1e-12
    relaxed = strict or (a < 1.0 and (b * ell < a or boundary))
    verdict = ("compatible" if strict
               else "compatible-relaxed" if relaxed
               else "incompatible")

    decades = [10 ** d for d in range(1, 1 + int(math.log10(max(horizon, 10))))]
    trace = []
    s1 = s2 = 0.0
    prev = 0
    for K in decades:
        k = np.arange(prev + 1, K + 1, dtype=float)
        g = spec.gamma0 * k ** -a
        if spec.eta_kind == "fixed":
            eta = np.maximum(spec.eta0, spec.eta_floor)
        else:
            eta = np.maximum(spec.eta0 * k ** -b, spec.eta_floor)
        s1 += float(g.sum())
        s2 += float((g * g * eta ** -float(ell)).sum())
        trace.append((K, s2 / s1))
        prev = K
    tail = [r for _, r in trace[-3:]]
    decreasing = all(y <= x * (1.0 + 1e-9) for x, y in zip(tail, tail[1:]))
    return CompatibilityReport(a, b, ell, diverges, strict, relaxed, verdict,
                               tuple(trace), decreasing)


# --------------------------------------------------------------------------
# Optimisers
# --------------------------------------------------------------------------

def project(theta, box: ParamBox) -> np.ndarray:
    return np.clip(np.asarray(theta, dtype=float), box.lower, box.upper)


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_update(state: AdamState, grad, alpha: float = 0.001,
                beta1: float = 0.9, beta2: float = 0.999,
                eps: float = 1e-8):
    """One Adam step on a descent gradient; returns (state', step-to-subtract)."""
    g = np.asarray(grad, dtype=float)
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    step = alpha * mhat / (np.sqrt(vhat) + eps)
    return AdamState(m, v, t), step


# --------------------------------------------------------------------------
# Driver
# --------------------------------------------------------------------------

def _objective_gradient(model, theta, kind, mc_samples, rng, base_index,
                        sharpness):
    idx = np.arange(mc_samples) + base_index
    try:
        _, grads = gradient_block(kind, model, theta, rng, idx, sharpness)
    except NonFiniteGradient:
        raise
    g = grads.mean(axis=0)
    _, bonus_grad = model.entropy_bonus(theta)
    return g + bonus_grad


def dsgd_step(model, theta, k: int, sched: ScheduleSpec, opt_state,
              mc_samples: int, rng: RngStream, optimizer: str = "sgd",
              alpha: float = 0.001):
    """One annealed iteration: estimate at eta_k, update, project.

    opt_state None selects plain SGD with step gamma_at(k); an AdamState
    selects Adam with step size alpha.  Ascends or descends per the model's
    declared direction.
    """
    theta = np.asarray(theta, dtype=float)
    eta_k = eta_at(sched, k)
    obj_grad = _objective_gradient(model, theta, Smoothed(eta_k), mc_samples,
                                   rng, (k - 1) * mc_samples, 1.0)
    descent = -obj_grad if model.direction == "max" else obj_grad
    if optimizer == "adam":
        if opt_state is None:
            opt_state = AdamState(np.zeros(model.m), np.zeros(model.m))
        opt_state, step = adam_update(opt_state, descent, alpha)
    elif optimizer == "sgd":
        step = gamma_at(sched, k) * descent
    else:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    return project(theta - step, model.box), opt_state


@dataclass(frozen=True)
class Checkpoint:
    k: int
    theta: tuple
    eta: float          # accuracy in force at this point; nan if unsmoothed
    elbo_mean: float
    elbo_se: float
    var_avg: float
    var_norm: float
    clamp_events: int   # cumulative count of projected coordinates
    wall_seconds: float


@dataclass(frozen=True)
class Trajectory:
    model_name: str
    estimator: str
    seed: int
    m: int
    iterations: int
    checkpoints: tuple
    final_theta: tuple
    wall_seconds: float


def run(model, sched: ScheduleSpec, estimator="dsgd",
        iterations: int = 10000, mc_samples: int = 16,
        optimizer: str = "adam", alpha: float = 0.001,
        diag_interval: int = 100, diag_samples: int = 1000,
        seed: int = 0, workers=None, sharpness: float = 1.0,
        theta0=None) -> Trajectory:
    """Full optimisation loop with periodic diagnostics.

    estimator "dsgd" anneals a smoothed estimator along the schedule; a
    fixed EstimatorKind (or its string form) is used as-is every iteration.
    Three RNG streams keep optimisation draws, diagnostic gradients, and
    diagnostic objective values disjoint, so changing the checkpoint cadence
    never perturbs the optimisation path.
    """
    if iterations < 0 or mc_samples < 1 or diag_interval < 1 or diag_samples < 2:
        raise ValueError("bad loop parameters")
    annealed = isinstance(estimator, str) and estimator == "dsgd"
    if not annealed:
        kind_fixed = (parse_estimator(estimator) if isinstance(estimator, str)
                      else estimator)
        desc = format_estimator(kind_fixed)
    else:
        kind_fixed = None
        desc = "dsgd"

    theta = (np.array(model.theta_init, dtype=float) if theta0 is None
             else np.asarray(theta0, dtype=float))
    theta = project(theta, model.box)
    opt_rng = RngStream(seed, 0)
    diag_rng = RngStream(seed, 1)
    elbo_rng = RngStream(seed, 2)
    opt_state = (AdamState(np.zeros(model.m), np.zeros(model.m))
                 if optimizer == "adam" else None)
    if optimizer not in ("adam", "sgd"):
        raise ValueError(f"unknown optimizer {optimizer!r}")

    t0 = time.perf_counter()
    clamps = 0
    checkpoints = []

    def kind_at(k: int) -> EstimatorKind:
        if annealed:
            return Smoothed(eta_at(sched, max(k, 1)))
        return kind_fixed

    def take_checkpoint(k: int):
        ordinal = len(checkpoints)
        kind = kind_at(k)
        try:
            stats = estimate(kind, model, theta, diag_samples, diag_rng,
                             workers=workers,
                             index_offset=ordinal * diag_samples,
                             sharpness=sharpness)
            mean, se = elbo_stats(model, theta, diag_samples, elbo_rng,
                                  workers=workers,
                                  index_offset=ordinal * diag_samples)
        except NonFiniteGradient as exc:
            raise NonFiniteGradient(str(exc),
                                    where=f"iteration {k}") from exc
        eta = kind.eta if isinstance(kind, Smoothed) else math.nan
        checkpoints.append(Checkpoint(
            k, tuple(float(v) for v in theta), eta, mean, se,
            stats.var_avg, stats.var_norm, clamps,
            time.perf_counter() - t0))

    take_checkpoint(0)
    for k in range(1, iterations + 1):
        kind = kind_at(k)
        try:
            obj_grad = _objective_gradient(model, theta, kind, mc_samples,
                                           opt_rng, (k - 1) * mc_samples,
                                           sharpness)
        except NonFiniteGradient as exc:
            raise NonFiniteGradient(str(exc), where=f"iteration {k}") from exc
        descent = -obj_grad if model.direction == "max" else obj_grad
        if opt_state is not None:
            opt_state, step = adam_update(opt_state, descent, alpha)
        else:
            step = gamma_at(sched, k) * descent
        proposed = theta - step
        theta = project(proposed, model.box)
        clamps += int(np.sum(proposed != theta))
        if k % diag_interval == 0:
            take_checkpoint(k)

    return Trajectory(model.name, desc, seed, model.m, iterations,
                      tuple(checkpoints), tuple(float(v) for v in theta),
                      time.perf_counter() - t0)


def trajectory_to_csv(traj: Trajectory, fh) -> None:
    """CSV rows per checkpoint: k, theta_0.., eta_k, elbo stats, variances.

    Floats are written with shortest round-trip repr; comma-delimited,
    newline line endings.
    """
    cols = (["k"] + [f"theta_{i}" for i in range(traj.m)]
            + ["eta_k", "elbo_mean", "elbo_se", "var_avg", "var_norm",
               "clamp_events", "wall_seconds"])
    fh.write(",".join(cols) + "\n")
    for c in traj.checkpoints:
        row = ([str(c.k)] + [repr(float(v)) for v in c.theta]
               + [repr(float(c.eta)), repr(float(c.elbo_mean)),
                  repr(float(c.elbo_se)), repr(float(c.var_avg)),
                  repr(float(c.var_norm)), str(c.clamp_events),
                  repr(float(c.wall_seconds))])
        fh.write(",".join(row) + "\n")
