"""Command-line front end: run, bench, grad-check, compare, list-models,
check-schedule.

Output conventions: CSV uses "," delimiter, "." decimal point, "\\n" line
endings; bench reports are JSON.  When an --output path is given, a PNG
figure is rendered next to it by default (--no-figures turns this off);
without --output, results go to stdout and no figure is drawn.  Every error
exits nonzero with a single line "error: ..." on stderr (exit 2 for
configuration problems, 3 for a non-finite gradient, 1 for a failed
grad-check).

MODEL CONFIG GRAMMAR (INI form; a .json file with the same sections as
top-level keys is accepted as an alternative):

    [model]
    name = my-model
    n = 2                       ; latent dimension
    expr = add(sq(z1), if z2 { 0.0 } else { 1.0 })
    direction = max             ; optional, max|min
    entropy = false             ; optional, add sum-log-scale bonus

    [base]
    kind = stdnormal            ; stdnormal|halfnormal|exponential|logistic
    ; halfnormal: sigma=, exponential: rate=, logistic: mu= s=

    [transform]                 ; one line per latent coordinate
    z1 = locscale mu=theta:0 sigma=exp:1
    z2 = fixed
    ; mu sources:    theta:<i> | const:<v>
    ; sigma sources: exp:<i> | softplus:<i> | linear:<i> | const:<v>

    [box]                       ; bounds on theta, comma-separated
    lower = -3, -4
    upper = 3, 1.5

    [init]                      ; optional
    theta = 0, -1
"""
from __future__ import annotations

import configparser
import json
import os
import sys
import time

import click
import numpy as np

from .autodiff import NonFiniteGradient, finite_diff, value_and_grad_block
from .estimators import (NotEligible, estimate, format_estimator,
                         gradient_block, parse_estimator)
from .expr import DslSyntaxError, UnknownPrimitive, parse
from .models import MODELS, get_model, make_model
from .optimize import (check_compatibility, eta_from_anchor, make_schedule,
                       run, trajectory_to_csv)
from .stochastics import (Exponential, Fixed, HalfNormal, LocationScale,
                          Logistic, RngStream, ParamBox, StdNormal, Transform,
                          TransformViolation, sample_block)
from .figures import (render_bench_figure, render_compare_figure,
                      render_run_figure)


class CliError(Exception):
    """Configuration-level failure; carries the process exit code."""

    def __init__(self, msg, exit_code=2):
        super().__init__(msg)
        self.exit_code = exit_code


# --------------------------------------------------------------------------
# Model loading
# --------------------------------------------------------------------------

_BASES = {"stdnormal", "halfnormal", "exponential", "logistic"}


def _parse_source(text, allowed, what):
    kind, sep, val = text.strip().partition(":")
    if not sep or kind not in allowed:
        raise CliError(f"transform: bad {what} source {text!r} "
                       f"(expected one of {', '.join(sorted(allowed))})")
    try:
        return (kind, float(val)) if kind == "const" else (kind, int(val))
    except ValueError:
        raise CliError(f"transform: bad {what} argument in {text!r}") from None


def _parse_coord(text):
    words = text.strip().split()
    if words == ["fixed"]:
        return Fixed()
    if not words or words[0] != "locscale":
        raise CliError(f"transform: expected 'fixed' or 'locscale ...', got {text!r}")
    kv = {}
    for w in words[1:]:
        key, sep, val = w.partition("=")
        if not sep or key not in ("mu", "sigma"):
            raise CliError(f"transform: bad locscale field {w!r}")
        kv[key] = val
    if set(kv) != {"mu", "sigma"}:
        raise CliError("transform: locscale needs both mu= and sigma=")
    mu = _parse_source(kv["mu"], ("theta", "const"), "mu")
    sigma = _parse_source(kv["sigma"], ("exp", "softplus", "linear", "const"),
                          "sigma")
    return LocationScale(mu, sigma)


def _parse_floats(text, field):
    try:
        if isinstance(text, (list, tuple)):
            return tuple(float(v) for v in text)
        return tuple(float(v) for v in str(text).split(","))
    except (TypeError, ValueError):
        raise CliError(f"{field}: expected comma-separated floats, "
                       f"got {text!r}") from None


def _make_base(kind, n, params):
    if kind == "stdnormal":
        return StdNormal(n)
    if kind == "halfnormal":
        return HalfNormal(n, float(params.get("sigma", 1.0)))
    if kind == "exponential":
        return Exponential(n, float(params.get("rate", 1.0)))
    if kind == "logistic":
        return Logistic(n, float(params.get("mu", 0.0)),
                        float(params.get("s", 1.0)))
    raise CliError(f"base: unknown kind {kind!r} "
                   f"(expected one of {', '.join(sorted(_BASES))})")


def _model_from_sections(sections, origin):
    for sec in ("model", "base", "transform", "box"):
        if sec not in sections:
            raise CliError(f"{origin}: missing [{sec}] section")
    msec = sections["model"]
    try:
        n = int(msec["n"])
        expr_text = msec["expr"]
        name = msec.get("name", origin)
    except KeyError as exc:
        raise CliError(f"{origin}: [model] needs {exc.args[0]}") from None
    try:
        expression = parse(expr_text)
    except (DslSyntaxError, UnknownPrimitive) as exc:
        raise CliError(f"{origin}: expr: {exc}") from None

    bsec = dict(sections["base"])
    base = _make_base(str(bsec.pop("kind", "stdnormal")).lower(), n, bsec)

    tsec = sections["transform"]
    coords = []
    for j in range(1, n + 1):
        key = f"z{j}"
        if key not in tsec:
            raise CliError(f"{origin}: transform: missing {key}")
        coords.append(_parse_coord(str(tsec[key])))

    box_sec = sections["box"]
    if "lower" not in box_sec or "upper" not in box_sec:
        raise CliError(f"{origin}: box needs lower and upper")
    box = ParamBox(_parse_floats(box_sec["lower"], "box.lower"),
                   _parse_floats(box_sec["upper"], "box.upper"))

    theta_init = None
    if "init" in sections and "theta" in sections["init"]:
        theta_init = _parse_floats(sections["init"]["theta"], "init.theta")

    direction = str(msec.get("direction", "max"))
    entropy = str(msec.get("entropy", "false")).lower() in ("1", "true", "yes")
    try:
        return make_model(name, expression, Transform(tuple(coords)), base,
                          box, direction=direction, include_entropy=entropy,
                          theta_init=theta_init)
    except (ValueError, TransformViolation) as exc:
        raise CliError(f"{origin}: {exc}") from None


def _load_model(spec):
    if spec in MODELS:
        return get_model(spec)
    if os.path.exists(spec):
        if spec.endswith(".json"):
            with open(spec) as fh:
                try:
                    data = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise CliError(f"{spec}: invalid JSON: {exc}") from None
            if not isinstance(data, dict):
                raise CliError(f"{spec}: top level must be an object")
            return _model_from_sections(data, spec)
        cp = configparser.ConfigParser()
        try:
            cp.read(spec)
        except configparser.Error as exc:
            raise CliError(f"{spec}: {exc}") from None
        return _model_from_sections({s: dict(cp[s]) for s in cp.sections()},
                                    spec)
    raise CliError(f"unknown model {spec!r}; known: {', '.join(sorted(MODELS))} "
                   f"(or a path to a config file)")


# --------------------------------------------------------------------------
# Shared option plumbing
# --------------------------------------------------------------------------

def _parse_anchor(text):
    value, sep, k = text.partition("@")
    if not sep:
        raise CliError(f"--eta-anchor: expected VALUE@K, got {text!r}")
    try:
        value, k = float(value), int(k)
    except ValueError:
        raise CliError(f"--eta-anchor: expected VALUE@K, got {text!r}") from None
    if value <= 0.0 or k < 1:
        raise CliError("--eta-anchor: need VALUE > 0 and K >= 1")
    return value, k


def _build_schedule(estimator, eta0, eta_anchor, eta_exp, gamma0, gamma_exp,
                    allow_unused_eta=False):
    annealed = estimator == "dsgd"
    if annealed:
        if (eta0 is None) == (eta_anchor is None):
            raise CliError(
                "schedule: give exactly one of --eta0 and --eta-anchor")
    elif (eta0 is not None or eta_anchor is not None) and not allow_unused_eta:
        raise CliError("schedule: --eta0/--eta-anchor only apply to "
                       "--estimator dsgd")
    if eta_exp <= 0.0:
        raise CliError(f"--eta-exp must be positive, got {eta_exp}")
    if gamma0 <= 0.0:
        raise CliError(f"--gamma0 must be positive, got {gamma0}")
    if eta_anchor is not None:
        value, k = _parse_anchor(eta_anchor)
        resolved = eta_from_anchor(value, k, eta_exp)
    elif eta0 is not None:
        if eta0 <= 0.0:
            raise CliError(f"--eta0 must be positive, got {eta0}")
        resolved = eta0
    else:
        resolved = 1.0                     # unused by fixed estimators
    if gamma_exp is None:
        return make_schedule("harmonic", gamma0, eta0=resolved,
                             eta_exp=eta_exp)
    if gamma_exp < 0.0:
        raise CliError(f"--gamma-exp must be >= 0, got {gamma_exp}")
    return make_schedule("powerlaw", gamma0, gamma_exp, eta0=resolved,
                         eta_exp=eta_exp)


def _check_estimator(text):
    if text == "dsgd":
        return text
    try:
        parse_estimator(text)
    except ValueError as exc:
        raise CliError(f"--estimator: {exc}") from None
    return text


def _check_counts(**counts):
    for field, (value, floor) in counts.items():
        if value < floor:
            raise CliError(f"--{field} must be >= {floor}, got {value}")


def _theta_or_init(model, text, flag):
    if text is None:
        return np.array(model.theta_init)
    theta = np.array(_parse_floats(text, flag))
    if theta.size != model.m:
        raise CliError(f"{flag}: expected {model.m} values, got {theta.size}")
    return theta


def _figure_path(output):
    stem, _ = os.path.splitext(output)
    return stem + ".png"


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

@click.group(help=__doc__)
def cli():
    pass


@cli.command("run", help="Optimise a model and write a per-checkpoint CSV.")
@click.option("--model", "model_spec", required=True,
              help="Built-in model name or config file path.")
@click.option("--estimator", default="dsgd", show_default=True,
              help="dsgd | reparam | score | boundary-oracle | smoothed:eta=X")
@click.option("--optimizer", type=click.Choice(["adam", "sgd"]),
              default="adam", show_default=True)
@click.option("--alpha", default=0.001, show_default=True,
              help="Adam step size.")
@click.option("--gamma0", default=1.0, show_default=True,
              help="SGD base step size.")
@click.option("--gamma-exp", type=float, default=None,
              help="SGD step decay exponent (default: harmonic, 1).")
@click.option("--eta0", type=float, default=None,
              help="Accuracy schedule scale (dsgd only).")
@click.option("--eta-anchor", default=None, metavar="VALUE@K",
              help="Pin eta_K = VALUE instead of giving --eta0 (dsgd only).")
@click.option("--eta-exp", default=0.5, show_default=True,
              help="Accuracy decay exponent rho.")
@click.option("--iters", default=10000, show_default=True)
@click.option("--mc", default=16, show_default=True,
              help="Monte Carlo samples per gradient step.")
@click.option("--diag-interval", default=100, show_default=True)
@click.option("--diag-samples", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--workers", type=int, default=None,
              help="Estimator worker threads (DSGD_LAB_WORKERS overrides).")
@click.option("--theta0", default=None, help="Comma-separated start point.")
@click.option("--output", type=click.Path(dir_okay=False), default=None,
              help="CSV path (default: stdout).")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render a PNG next to --output.")
def cmd_run(model_spec, estimator, optimizer, alpha, gamma0, gamma_exp,
            eta0, eta_anchor, eta_exp, iters, mc, diag_interval,
            diag_samples, seed, workers, theta0, output, figures):
    if iters < 0:
        raise CliError(f"--iters must be >= 0, got {iters}")
    _check_counts(mc=(mc, 1), **{"diag-interval": (diag_interval, 1),
                                 "diag-samples": (diag_samples, 2)})
    if alpha <= 0.0:
        raise CliError(f"--alpha must be positive, got {alpha}")
    estimator = _check_estimator(estimator)
    model = _load_model(model_spec)
    sched = _build_schedule(estimator, eta0, eta_anchor, eta_exp,
                            gamma0, gamma_exp)
    theta_start = _theta_or_init(model, theta0, "--theta0")

    traj = run(model, sched, estimator=estimator, iterations=iters,
               mc_samples=mc, optimizer=optimizer, alpha=alpha,
               diag_interval=diag_interval, diag_samples=diag_samples,
               seed=seed, workers=workers, theta0=theta_start)

    if output is None:
        trajectory_to_csv(traj, sys.stdout)
        return
    with open(output, "w", newline="") as fh:
        trajectory_to_csv(traj, fh)
    click.echo(f"wrote {output}", err=True)
    if figures:
        fig = render_run_figure(traj, _figure_path(output))
        click.echo(f"wrote {fig}", err=True)


def _bench_one(kind, model, theta, budget, seed, diag_samples, workers):
    """Draws completed in the budget plus variance diagnostics."""
    warm_rng = RngStream(seed, 7)
    timed_rng = RngStream(seed, 8)
    chunk = 32
    stop = time.monotonic() + 0.1 * budget
    drawn = 0
    while time.monotonic() < stop:
        gradient_block(kind, model, theta, warm_rng,
                       np.arange(drawn, drawn + chunk))
        drawn += chunk
    completed = 0
    stop = time.monotonic() + budget
    while time.monotonic() < stop:
        gradient_block(kind, model, theta, timed_rng,
                       np.arange(completed, completed + chunk))
        completed += chunk
    if completed == 0:
        raise CliError(f"budget too small: {format_estimator(kind)} finished "
                       f"no draws")
    stats = estimate(kind, model, theta, diag_samples, RngStream(seed, 9),
                     workers=workers)
    return completed, stats


@cli.command("bench", help="Benchmark estimator cost and variance; "
                           "emits a JSON ratio table against score.")
@click.option("--model", "model_spec", required=True)
@click.option("--estimator", "estimators", multiple=True,
              help="Repeatable. score is appended when missing (it is the "
                   "ratio denominator). Default: reparam, smoothed:eta=0.1.")
@click.option("--budget", type=float, required=True,
              help="Seconds of timed sampling per estimator.")
@click.option("--theta", default=None, help="Comma-separated eval point "
                                            "(default: model start).")
@click.option("--diag-samples", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--workers", type=int, default=None)
@click.option("--output", type=click.Path(dir_okay=False), default=None,
              help="JSON path (default: stdout).")
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_bench(model_spec, estimators, budget, theta, diag_samples, seed,
              workers, output, figures):
    if budget <= 0.0:
        raise CliError(f"--budget must be positive, got {budget}")
    _check_counts(**{"diag-samples": (diag_samples, 2)})
    model = _load_model(model_spec)
    names = list(estimators) or ["reparam", "smoothed:eta=0.1"]
    if not any(n.strip() == "score" for n in names):
        names.append("score")
    try:
        kinds = [parse_estimator(n) for n in names]
    except ValueError as exc:
        raise CliError(f"--estimator: {exc}") from None
    point = _theta_or_init(model, theta, "--theta")

    rows = []
    for kind in kinds:
        try:
            completed, stats = _bench_one(kind, model, point, budget, seed,
                                          diag_samples, workers)
        except NotEligible as exc:
            raise CliError(
                f"{format_estimator(kind)} not applicable to "
                f"{model.name}: {exc}") from None
        cost = 1.0 / completed
        rows.append({
            "estimator": format_estimator(kind),
            "iterations": completed,
            "cost": cost,
            "var_avg": stats.var_avg,
            "var_norm": stats.var_norm,
            "wnv_avg": cost * stats.var_avg,
            "wnv_norm": cost * stats.var_norm,
        })

    score_row = next(r for r in rows if r["estimator"] == "score")
    for r in rows:
        r["cost_ratio"] = r["cost"] / score_row["cost"]
        r["var_avg_ratio"] = r["var_avg"] / score_row["var_avg"]
        r["var_norm_ratio"] = r["var_norm"] / score_row["var_norm"]
        r["wnv_avg_ratio"] = r["wnv_avg"] / score_row["wnv_avg"]
        r["wnv_norm_ratio"] = r["wnv_norm"] / score_row["wnv_norm"]

    report = {
        "model": model.name,
        "theta": [float(v) for v in point],
        "budget_seconds": budget,
        "diag_samples": diag_samples,
        "seed": seed,
        "rows": rows,
    }
    text = json.dumps(report, indent=2)
    if output is None:
        click.echo(text)
        return
    with open(output, "w") as fh:
        fh.write(text + "\n")
    click.echo(f"wrote {output}", err=True)
    if figures:
        fig = render_bench_figure(rows, _figure_path(output),
                                  title=f"{model.name}: work-normalised "
                                        f"variance vs score")
        click.echo(f"wrote {fig}", err=True)


@cli.command("grad-check",
             help="Compare tape gradients against finite differences.")
@click.option("--model", "model_spec", required=True)
@click.option("--eta", type=float, default=None,
              help="Check smoothed semantics at this accuracy "
                   "(default: hard semantics).")
@click.option("--points", default=20, show_default=True)
@click.option("--theta", default=None, help="Comma-separated eval point.")
@click.option("--seed", default=0, show_default=True)
@click.option("--tol", default=1e-5, show_default=True)
def cmd_grad_check(model_spec, eta, points, theta, seed, tol):
    _check_counts(points=(points, 1))
    if eta is not None and eta <= 0.0:
        raise CliError(f"--eta must be positive, got {eta}")
    model = _load_model(model_spec)
    point = _theta_or_init(model, theta, "--theta")
    rng = RngStream(seed, 0)
    s_block = sample_block(model.base, rng, np.arange(points))
    mode = "standard" if eta is None else "smoothed"
    _, grads = value_and_grad_block(model, point, s_block, mode, eta)
    worst = 0.0
    for i in range(points):
        fd = finite_diff(model, point, s_block[i], eta=eta)
        err = np.abs(grads[i] - fd) / np.maximum(
            1.0, np.maximum(np.abs(grads[i]), np.abs(fd)))
        worst = max(worst, float(err.max()) if err.size else 0.0)
    semantics = "hard" if eta is None else f"eta={eta}"
    click.echo(f"model={model.name} semantics={semantics} points={points}")
    click.echo(f"max_relative_error={worst:.6e}")
    if worst > tol:
        raise CliError(f"max relative error {worst:.3e} exceeds {tol:.1e}",
                       exit_code=1)
    click.echo("ok")


@cli.command("compare",
             help="Run estimators across seeds; summarise final objectives.")
@click.option("--model", "model_spec", required=True)
@click.option("--estimator", "estimators", multiple=True, required=True,
              help="Repeatable.")
@click.option("--seeds", default="0,1,2", show_default=True,
              help="Comma-separated seed list.")
@click.option("--optimizer", type=click.Choice(["adam", "sgd"]),
              default="adam", show_default=True)
@click.option("--alpha", default=0.001, show_default=True)
@click.option("--gamma0", default=1.0, show_default=True)
@click.option("--gamma-exp", type=float, default=None)
@click.option("--eta0", type=float, default=None)
@click.option("--eta-anchor", default=None, metavar="VALUE@K")
@click.option("--eta-exp", default=0.5, show_default=True)
@click.option("--iters", default=10000, show_default=True)
@click.option("--mc", default=16, show_default=True)
@click.option("--diag-interval", default=100, show_default=True)
@click.option("--diag-samples", default=1000, show_default=True)
@click.option("--workers", type=int, default=None)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_compare(model_spec, estimators, seeds, optimizer, alpha, gamma0,
                gamma_exp, eta0, eta_anchor, eta_exp, iters, mc,
                diag_interval, diag_samples, workers, output, figures):
    if iters < 0:
        raise CliError(f"--iters must be >= 0, got {iters}")
    _check_counts(mc=(mc, 1), **{"diag-interval": (diag_interval, 1),
                                 "diag-samples": (diag_samples, 2)})
    try:
        seed_list = [int(v) for v in seeds.split(",")]
    except ValueError:
        raise CliError(f"--seeds: expected comma-separated ints, "
                       f"got {seeds!r}") from None
    if not seed_list:
        raise CliError("--seeds: need at least one seed")
    model = _load_model(model_spec)
    names = [_check_estimator(n) for n in estimators]

    rows = []
    for name in names:
        sched = _build_schedule(name, eta0, eta_anchor, eta_exp,
                                gamma0, gamma_exp, allow_unused_eta=True)
        finals, thetas = [], []
        for seed in seed_list:
            traj = run(model, sched, estimator=name, iterations=iters,
                       mc_samples=mc, optimizer=optimizer, alpha=alpha,
                       diag_interval=diag_interval,
                       diag_samples=diag_samples, seed=seed,
                       workers=workers)
            finals.append(traj.checkpoints[-1].elbo_mean)
            thetas.append(traj.final_theta)
        finals = np.array(finals)
        sd = float(finals.std(ddof=1)) if len(finals) > 1 else 0.0
        rows.append({
            "estimator": name,
            "n_seeds": len(seed_list),
            "elbo_mean": float(finals.mean()),
            "elbo_sd": sd,
            "theta_mean": np.mean(np.array(thetas), axis=0),
        })

    cols = (["estimator", "n_seeds", "elbo_mean", "elbo_sd"]
            + [f"theta_{i}" for i in range(model.m)])
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(
            [r["estimator"], str(r["n_seeds"]), repr(r["elbo_mean"]),
             repr(r["elbo_sd"])] + [repr(float(v)) for v in r["theta_mean"]]))
    text = "\n".join(lines) + "\n"
    if output is None:
        click.echo(text, nl=False)
        return
    with open(output, "w", newline="") as fh:
        fh.write(text)
    click.echo(f"wrote {output}", err=True)
    if figures:
        fig = render_compare_figure(rows, _figure_path(output),
                                    title=f"{model.name}: final objective "
                                          f"by estimator")
        click.echo(f"wrote {fig}", err=True)


@cli.command("list-models", help="List built-in models and their metadata.")
def cmd_list_models():
    click.echo(f"{'name':<18} {'n':>4} {'m':>4} {'depth':>5} {'ifs':>4} "
               f"{'safe':<5} boundary")
    for name in sorted(MODELS):
        m = get_model(name)
        click.echo(f"{name:<18} {m.n:>4} {m.m:>4} {m.ell:>5} "
                   f"{m.if_count:>4} {str(m.safe.is_safe):<5} "
                   f"{m.boundary_eligible}")


@cli.command("check-schedule",
             help="Decide step-size/accuracy schedule compatibility.")
@click.option("--gamma0", default=1.0, show_default=True)
@click.option("--gamma-exp", default=1.0, show_default=True,
              help="Step decay exponent a in gamma0 * k^-a.")
@click.option("--eta0", default=1.0, show_default=True)
@click.option("--eta-exp", type=float, default=0.5, show_default=True,
              help="Accuracy decay exponent rho in eta0 * k^-rho.")
@click.option("--eta-fixed", is_flag=True,
              help="Hold eta at eta0 (rho = 0).")
@click.option("--ell", type=int, required=True,
              help="Guard nesting depth of the target expression class.")
@click.option("--horizon", default=1e6, show_default=True,
              help="Numeric partial-sum trace horizon.")
def cmd_check_schedule(gamma0, gamma_exp, eta0, eta_exp, eta_fixed, ell,
                       horizon):
    if ell < 1:
        raise CliError(f"--ell must be >= 1, got {ell}")
    if horizon < 10:
        raise CliError(f"--horizon must be >= 10, got {horizon}")
    try:
        if eta_fixed:
            sched = make_schedule("powerlaw", gamma0, gamma_exp,
                                  eta_kind="fixed", eta0=eta0)
        else:
            sched = make_schedule("powerlaw", gamma0, gamma_exp,
                                  eta0=eta0, eta_exp=eta_exp)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    rep = check_compatibility(sched, ell, horizon=int(horizon))
    click.echo(f"gamma_exp={rep.gamma_exp}")
    click.echo(f"eta_exp={rep.eta_exp}")
    click.echo(f"ell={rep.ell}")
    click.echo(f"steps_diverge={rep.steps_diverge}")
    click.echo(f"strict={rep.strict}")
    click.echo(f"relaxed={rep.relaxed}")
    click.echo(f"trace_decreasing={rep.trace_decreasing}")
    click.echo(f"verdict={rep.verdict}")


# --------------------------------------------------------------------------
# Entry point: normalise every failure to "error: ..." on stderr
# --------------------------------------------------------------------------

def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(2)
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(2)
    except CliError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    except NonFiniteGradient as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    except NotEligible as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
