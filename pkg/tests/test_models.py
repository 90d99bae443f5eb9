"""Model registry: metadata, construction checks, closed-form oracles."""

import math

import numpy as np
import pytest

from dsgd_lab.expr import parse
from dsgd_lab.models import (
    MODELS,
    get_model,
    list_models,
    load_temperature_obs,
    load_textmsg_counts,
    make_model,
    model_cheating_lite,
    model_example11,
    model_random_walk,
    model_temperature_lite,
    model_two_level,
    model_textmsg,
    model_xornet_lite,
    oracle_smoothed_gradient_example11,
    oracle_smoothed_gradient_example11_gh,
    oracle_stationary_example11,
    oracle_true_gradient_example11,
)
from dsgd_lab.stochastics import (
    Fixed,
    LocationScale,
    ParamBox,
    StdNormal,
    Transform,
    TransformViolation,
)


# -----------------------------------------------------------------------
# registry
# -----------------------------------------------------------------------

def test_known_model_names():
    assert set(MODELS) == {"example11", "two-level", "random-walk",
                           "temperature-lite", "cheating-lite", "textmsg",
                           "xornet-lite"}


def test_get_model_unknown():
    with pytest.raises(KeyError, match="unknown model 'nope'"):
        get_model("nope")


def test_list_models_builds_everything():
    specs = list_models()
    assert len(specs) == len(MODELS)
    for spec in specs:
        assert spec.m == spec.box.m
        assert spec.base.n == spec.n
        assert len(spec.theta_init) == spec.m


# -----------------------------------------------------------------------
# per-model metadata
# -----------------------------------------------------------------------

def test_example11_metadata():
    m = model_example11()
    assert (m.n, m.m, m.ell, m.if_count) == (1, 1, 1, 1)
    assert m.boundary_eligible
    assert m.safe.is_safe


def test_two_level_metadata():
    m = model_two_level()
    assert (m.n, m.m) == (2, 2)
    assert m.ell == 2
    assert m.if_count == 3
    assert not m.boundary_eligible


def test_random_walk_metadata():
    m = model_random_walk(16)
    assert (m.n, m.if_count) == (16, 31)
    assert m.include_entropy
    assert m.safe.is_safe
    small = model_random_walk(8)
    assert (small.n, small.if_count) == (8, 15)


def test_temperature_metadata():
    m = model_temperature_lite(20)
    assert (m.n, m.if_count) == (21, 40)
    assert m.m == 2 * 21  # location and log-scale for every coordinate
    assert m.safe.is_safe
    full = model_temperature_lite(40)
    assert (full.n, full.if_count) == (41, 80)


def test_cheating_metadata():
    m = model_cheating_lite(30)
    assert m.n == 61
    assert m.if_count == 60
    full = model_cheating_lite(150)
    assert full.if_count == 300


def test_textmsg_metadata():
    m = model_textmsg()
    assert m.n == 3
    assert m.if_count == 37
    assert m.m == 6


def test_xornet_metadata():
    m = model_xornet_lite()
    assert m.n == 9
    assert m.ell == 3
    assert m.if_count == 4 * 2 + 4 + 4  # hidden units + outputs + losses


def test_all_models_have_positive_depth():
    for spec in list_models():
        assert spec.ell >= 1
        assert spec.if_count >= 1


# -----------------------------------------------------------------------
# construction validation
# -----------------------------------------------------------------------

def _plain_transform():
    return Transform((LocationScale(("theta", 0), ("const", 1.0)),))


def test_make_model_base_dimension_mismatch():
    with pytest.raises(ValueError, match="base dimension"):
        make_model("bad", parse("z1"), _plain_transform(), StdNormal(2),
                   ParamBox((-1.0,), (1.0,)))


def test_make_model_free_vars_out_of_range():
    with pytest.raises(ValueError, match="outside 1..1"):
        make_model("bad", parse("add(z1, z2)"), _plain_transform(),
                   StdNormal(1), ParamBox((-1.0,), (1.0,)))


def test_make_model_transform_violation():
    t = Transform((LocationScale(("theta", 0), ("linear", 0)),))
    with pytest.raises(TransformViolation, match="infimum"):
        make_model("bad", parse("z1"), t, StdNormal(1),
                   ParamBox((-1.0,), (1.0,)))


def test_make_model_theta_init_checked():
    with pytest.raises(ValueError, match="outside the box"):
        make_model("bad", parse("z1"), _plain_transform(), StdNormal(1),
                   ParamBox((-1.0,), (1.0,)), theta_init=(2.0,))
    with pytest.raises(ValueError, match="length"):
        make_model("bad", parse("z1"), _plain_transform(), StdNormal(1),
                   ParamBox((-1.0,), (1.0,)), theta_init=(0.0, 0.0))


def test_make_model_boundary_eligibility_guarded():
    two_ifs = parse("add(if z1 { 0.0 } else { 1.0 }, "
                    "if z1 { 0.0 } else { 1.0 })")
    with pytest.raises(ValueError, match="single if"):
        make_model("bad", two_ifs, _plain_transform(), StdNormal(1),
                   ParamBox((-1.0,), (1.0,)), boundary_eligible=True)


def test_make_model_direction_checked():
    with pytest.raises(ValueError, match="direction"):
        make_model("bad", parse("z1"), _plain_transform(), StdNormal(1),
                   ParamBox((-1.0,), (1.0,)), direction="sideways")


def test_make_model_unknown_primitive():
    from dsgd_lab.expr import Prim, UnknownPrimitive, Var

    with pytest.raises(UnknownPrimitive):
        make_model("bad", Prim("mystery", (Var(1),)), _plain_transform(),
                   StdNormal(1), ParamBox((-1.0,), (1.0,)))


def test_default_theta_init_is_zero():
    spec = make_model("ok", parse("z1"), _plain_transform(), StdNormal(1),
                      ParamBox((-1.0,), (1.0,)))
    assert spec.theta_init == (0.0,)


def test_entropy_bonus_off_by_default():
    spec = model_example11()
    bonus, grad = spec.entropy_bonus([0.3])
    assert bonus == 0.0
    assert np.array_equal(grad, np.zeros(1))


def test_entropy_bonus_on_learned_scales():
    spec = model_random_walk(4)
    theta = np.asarray(spec.theta_init, dtype=float)
    bonus, grad = spec.entropy_bonus(theta)
    want, want_grad = spec.transform.log_sigma_sum_and_grad(theta, spec.m)
    assert bonus == want
    assert np.array_equal(grad, want_grad)


# -----------------------------------------------------------------------
# closed-form oracles
# -----------------------------------------------------------------------

def test_true_gradient_values():
    # -theta + N(-theta; 0, 1), evaluated by hand at two points
    assert oracle_true_gradient_example11(0.0) == pytest.approx(
        0.3989422804014327, abs=1e-15)
    assert oracle_true_gradient_example11(1.0) == pytest.approx(
        -1.0 + math.exp(-0.5) / math.sqrt(2 * math.pi), abs=1e-15)


def test_stationary_point():
    root = oracle_stationary_example11()
    assert root == pytest.approx(0.37223889803561866, abs=1e-12)
    assert oracle_true_gradient_example11(root) == pytest.approx(0.0,
                                                                 abs=1e-12)


def test_smoothed_gradient_approaches_true():
    for theta in (-0.5, 0.0, 0.8):
        true = oracle_true_gradient_example11(theta)
        errs = [abs(oracle_smoothed_gradient_example11(theta, eta) - true)
                for eta in (0.4, 0.1, 0.025)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 5e-3


def test_quadrature_routes_agree():
    # two independent quadratures of the same integral (different variable
    # substitutions); the second loses accuracy below eta ~ 0.2, so compare
    # where both are reliable
    for theta in (-0.7, 0.0, 0.5, 1.2):
        for eta in (0.4, 0.6, 0.9):
            a = oracle_smoothed_gradient_example11(theta, eta)
            b = oracle_smoothed_gradient_example11_gh(theta, eta)
            assert a == pytest.approx(b, abs=1e-8)


# -----------------------------------------------------------------------
# bundled observation data
# -----------------------------------------------------------------------

def test_textmsg_counts():
    y = load_textmsg_counts()
    assert y.shape == (37,)
    assert np.all(y >= 0)
    assert y.dtype.kind in "iu" or np.all(y == np.round(y))


def test_temperature_obs():
    y = load_temperature_obs()
    assert y.shape == (40,)
    assert np.all(np.isfinite(y))


def test_temperature_horizon_bounded_by_data():
    with pytest.raises(ValueError):
        model_temperature_lite(41)
