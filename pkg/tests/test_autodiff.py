"""Tape-based batched differentiation of expressions and composites."""

import math

import numpy as np
import pytest

from dsgd_lab.autodiff import (
    NonFiniteGradient,
    expr_grad_block,
    expr_value_block,
    finite_diff,
    grad_reparam_biased,
    grad_smoothed,
    value_and_grad_block,
    value_block,
)
from dsgd_lab.expr import Aux, Prim, PrimDef, Var, default_registry, parse
from dsgd_lab.models import (
    make_model,
    model_example11,
    model_two_level,
    example11_expr,
    step_expr,
)
from dsgd_lab.smoothing import eval_smoothed, sigma_prime
from dsgd_lab.stochastics import (
    LocationScale,
    ParamBox,
    RngStream,
    StdNormal,
    Transform,
    sample_block,
)


def test_values_match_scalar_eval():
    from dsgd_lab.expr import eval_expr

    e = example11_expr()
    xs = np.linspace(-2, 2, 17).reshape(-1, 1)
    vals = expr_value_block(e, xs, 1)
    for x, v in zip(xs, vals):
        assert v == pytest.approx(eval_expr(e, x))


def test_smoothed_values_match_scalar_eval():
    e = example11_expr()
    xs = np.linspace(-2, 2, 17).reshape(-1, 1)
    vals = expr_value_block(e, xs, 1, mode="smoothed", eta=0.3)
    for x, v in zip(xs, vals):
        assert v == pytest.approx(eval_smoothed(e, x, 0.3))


def test_standard_gradient_ignores_guard():
    # hard semantics: branch switch contributes nothing, only the taken
    # branch's own derivative flows
    e = example11_expr()
    xs = np.array([[-1.5], [-0.1], [0.0], [0.4], [2.0]])
    _, grads = expr_grad_block(e, xs, 1)
    assert np.allclose(grads[:, 0], -xs[:, 0])


def test_guard_only_dependence_gives_zero_standard_gradient():
    e = parse("if z1 { 2.0 } else { 3.0 }")
    xs = np.array([[-1.0], [1.0]])
    vals, grads = expr_grad_block(e, xs, 1)
    assert np.array_equal(vals, [2.0, 3.0])
    assert np.array_equal(grads, [[0.0], [0.0]])


def test_smoothed_gradient_has_guard_term():
    # d/dz sigma_eta(z) on the step function
    eta = 0.25
    xs = np.array([[-0.7], [0.0], [0.3]])
    _, grads = expr_grad_block(step_expr(), xs, 1, mode="smoothed", eta=eta)
    assert np.allclose(grads[:, 0], sigma_prime(xs[:, 0], eta))


def test_smoothed_gradient_matches_finite_differences():
    e = example11_expr()
    h = 1e-6
    for z in (-1.1, -0.3, 0.0, 0.6, 1.7):
        _, grads = expr_grad_block(e, [[z]], 1, mode="smoothed", eta=0.4)
        fd = (eval_smoothed(e, [z + h], 0.4)
              - eval_smoothed(e, [z - h], 0.4)) / (2 * h)
        assert grads[0, 0] == pytest.approx(fd, abs=1e-6)


def test_mode_validation():
    with pytest.raises(ValueError, match="unknown mode"):
        expr_grad_block(step_expr(), [[0.0]], 1, mode="soft")
    with pytest.raises(ValueError, match="positive eta"):
        expr_grad_block(step_expr(), [[0.0]], 1, mode="smoothed")
    with pytest.raises(ValueError, match="positive eta"):
        expr_grad_block(step_expr(), [[0.0]], 1, mode="smoothed", eta=-1.0)


def test_untaken_branch_poison_is_masked():
    # log is evaluated over the whole batch; lanes that take the other
    # branch may hold nan/inf values and infinite partials, but they must
    # not leak into either values or gradients
    e = parse("if neg(z1) { log(z1) } else { 1.0 }")
    xs = np.array([[-1.0], [0.0], [2.0]])
    vals, grads = expr_grad_block(e, xs, 1)
    assert np.allclose(vals, [1.0, 1.0, math.log(2.0)])
    assert np.allclose(grads[:, 0], [0.0, 0.0, 0.5])
    assert np.all(np.isfinite(grads))


def test_constant_subtrees_fold():
    e = parse("add(mul(2.0, 3.0), z1)")
    vals, grads = expr_grad_block(e, [[1.0]], 1)
    assert vals[0] == 7.0
    assert grads[0, 0] == 1.0


def test_constant_expression_has_zero_gradient():
    e = parse("if 1.0 { 2.0 } else { 3.0 }")
    vals, grads = expr_grad_block(e, [[5.0]], 1, mode="smoothed", eta=0.5)
    assert np.all(grads == 0.0)


def test_shared_subtree_evaluated_once():
    calls = []
    reg = default_registry()
    reg.register(PrimDef("probe", 1, lambda x: calls.append(1) or x,
                         (lambda x: np.ones_like(np.asarray(x, float)),),
                         ae_nonzero=True))
    shared = Prim("probe", (Var(1),))
    e = Prim("add", (shared, shared))
    vals, grads = expr_grad_block(e, [[3.0]], 1, reg=reg)
    assert len(calls) == 1
    assert vals[0] == 6.0
    assert grads[0, 0] == 2.0


def test_aux_rejected():
    with pytest.raises(KeyError, match="unbound auxiliary"):
        expr_grad_block(Aux("g1"), [[0.0]], 1)


# -----------------------------------------------------------------------
# composite objective (transform chained in)
# -----------------------------------------------------------------------

def test_composite_matches_finite_diff_smoothed():
    model = model_example11()
    theta = np.array([0.4])
    s = sample_block(StdNormal(1), RngStream(21, 0), range(8))
    vals, grads = value_and_grad_block(model, theta, s, "smoothed", 0.3)
    for b in range(8):
        fd = finite_diff(model, theta, s[b], eta=0.3)
        assert grads[b] == pytest.approx(fd, abs=1e-5)


def test_composite_matches_finite_diff_standard():
    model = model_example11()
    theta = np.array([0.4])
    # keep probes away from the kink so central differences are valid
    s = np.array([[-2.0], [-1.0], [0.5], [1.5]])
    vals, grads = value_and_grad_block(model, theta, s, "standard")
    for b in range(4):
        fd = finite_diff(model, theta, s[b])
        assert grads[b] == pytest.approx(fd, abs=1e-5)


def test_composite_multivariate():
    model = model_two_level()
    theta = np.array([0.2, -0.3])
    s = sample_block(StdNormal(2), RngStream(22, 0), range(6))
    _, grads = value_and_grad_block(model, theta, s, "smoothed", 0.5)
    for b in range(6):
        fd = finite_diff(model, theta, s[b], eta=0.5)
        assert grads[b] == pytest.approx(fd, abs=1e-5)


def test_value_block_uses_standard_semantics():
    model = model_example11()
    theta = np.array([0.0])
    s = np.array([[-1.0], [1.0]])
    vals = value_block(model, theta, s)
    assert vals[0] == pytest.approx(-0.5)        # z<0: no bump
    assert vals[1] == pytest.approx(-0.5 + 1.0)  # z>=0: bump


def test_single_draw_wrappers():
    model = model_example11()
    theta = [0.3]
    s = np.array([0.9])
    x = 0.3 + 0.9
    g_hard = grad_reparam_biased(model, theta, s)
    assert g_hard.wrt_theta[0] == pytest.approx(-x)
    g_soft = grad_smoothed(model, theta, s, eta=0.2)
    assert g_soft.wrt_theta[0] == pytest.approx(-x + sigma_prime(x, 0.2))
    assert g_soft.value == pytest.approx(eval_smoothed(model.expr, [x], 0.2))


def test_sharpness_forwarded():
    model = model_example11()
    theta = [0.3]
    s = np.array([0.9])
    a = grad_smoothed(model, theta, s, eta=0.4, sharpness=2.0)
    b = grad_smoothed(model, theta, s, eta=0.2)
    assert a.wrt_theta[0] == pytest.approx(b.wrt_theta[0])


def test_nonfinite_gradient_raises():
    trap = make_model(
        "trap", parse("log(z1)"),
        Transform((LocationScale(("theta", 0), ("const", 1.0)),)),
        StdNormal(1), ParamBox((-5.0,), (5.0,)))
    s = sample_block(StdNormal(1), RngStream(23, 0), range(64))
    assert np.any(s < 0.0)
    with pytest.raises(NonFiniteGradient) as exc:
        value_and_grad_block(trap, [0.0], s, "standard")
    assert "mode=standard" in str(exc.value)


def test_finite_diff_step_size_override():
    model = model_example11()
    g1 = finite_diff(model, [0.4], [0.7], eta=0.3, h=1e-5)
    g2 = finite_diff(model, [0.4], [0.7], eta=0.3, h=1e-7)
    assert g1[0] == pytest.approx(g2[0], abs=1e-4)
