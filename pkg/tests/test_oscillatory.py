"""Quadrature engine: applies, adjoints, pairings and tail convergence."""

import math

import numpy as np
import pytest

from _references import fourier_pair_value
from stochfio.jets import VarLayout, builtin_map
from stochfio.oscillatory import (
    FioOperator,
    PointDistribution,
    QuadratureConfig,
    ToleranceError,
    convergence_study,
    oscillatory_integral,
    pair_distribution,
)
from stochfio.symbol_spaces import Amplitude, PhaseFunction

XS = np.array([-0.8, -0.3, 0.0, 0.4, 0.9])


def translation_phase():
    return PhaseFunction(builtin_map("linear_phase", n=1))


def unit_amplitude():
    return Amplitude(builtin_map("constant", value=1.0, layout=VarLayout(1, 1, 1)))


def gaussian(center=0.0, width=1.0, block="y"):
    return builtin_map("gaussian_bump", block=block, center=center, width=width)


def build_identity(extra_decay=0, config=None):
    return FioOperator.build(translation_phase(), unit_amplitude(),
                             extra_decay=extra_decay, config=config)


# ---------------------------------------------------------------------------
# absolutely convergent reference: the Fourier pair integral


def test_oscillatory_integral_fourier_pair():
    # integral of exp(-i y xi) exp(-y^2) dy dxi = 2 pi (plain dxi measure)
    phase = PhaseFunction(builtin_map("scaled", factor=-1.0,
                                      inner=builtin_map("product", factors=[
                                          builtin_map("coordinate", block="y", index=0),
                                          builtin_map("coordinate", block="xi", index=0),
                                      ])))
    val = oscillatory_integral(phase, Amplitude(gaussian()))
    assert val == pytest.approx(2.0 * math.pi, abs=1e-7)


def test_oscillatory_integral_reports_unreachable_tolerance():
    phase = PhaseFunction(builtin_map("scaled", factor=-1.0,
                                      inner=builtin_map("product", factors=[
                                          builtin_map("coordinate", block="y", index=0),
                                          builtin_map("coordinate", block="xi", index=0),
                                      ])))
    config = QuadratureConfig(xi_radius=5.0, abs_tol=1e-14, max_refinements=0)
    with pytest.raises(ToleranceError) as err:
        oscillatory_integral(phase, Amplitude(gaussian()), config=config)
    assert err.value.achieved > 1e-14


# ---------------------------------------------------------------------------
# identity operator


def test_identity_operator_reproduces_gaussians():
    op = build_identity()
    for u, exact in [
        (gaussian(), lambda x: np.exp(-x ** 2)),
        (gaussian(center=0.3, width=0.7),
         lambda x: np.exp(-((x - 0.3) / 0.7) ** 2)),
        (builtin_map("product", factors=[
            gaussian(width=1.2),
            builtin_map("trig_polynomial", block="y", terms=[(1.0, 2.0, 0.5)]),
        ]), lambda x: np.exp(-(x / 1.2) ** 2) * np.cos(2.0 * x + 0.5)),
    ]:
        field = op.apply(u, XS)
        assert np.max(np.abs(field.value - exact(XS))) < 1e-6


def test_identity_operator_output_jets():
    op = build_identity()
    field = op.apply(gaussian(), XS, out_order=2)
    x = XS
    g = np.exp(-x ** 2)
    assert np.max(np.abs(field.derivative((1,)) + 2 * x * g)) < 1e-5
    assert np.max(np.abs(field.derivative((2,)) - (4 * x ** 2 - 2) * g)) < 1e-4
    assert field.meta["nodes"] > 0
    assert field.meta["kappa"] == 2


def test_regularization_depth_does_not_change_the_value():
    fields = [build_identity(extra_decay=e).apply(gaussian(), XS).value
              for e in (0, 1, 2)]
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            assert np.max(np.abs(fields[i] - fields[j])) < 2e-6


def test_engine_is_deterministic_across_worker_counts():
    op = build_identity()
    one = op.apply(gaussian(), XS, workers=1)
    two = op.apply(gaussian(), XS, workers=2)
    assert np.array_equal(one.value, two.value)


def test_y_window_override_matches_default():
    op = build_identity()
    base = op.apply(gaussian(), XS)
    from stochfio.oscillatory import apply as apply_fn
    windowed = apply_fn(op, gaussian(), XS, y_window=(-8.0, 8.0))
    assert np.max(np.abs(base.value - windowed.value)) < 1e-7


# ---------------------------------------------------------------------------
# frequency-dependent amplitudes against dense Fourier quadrature


def test_bracket_amplitude_matches_fourier_reference():
    amp = Amplitude(builtin_map("bracket_power", exponent=1.0), d=1.0)
    op = FioOperator.build(translation_phase(), amp)
    field = op.apply(gaussian(), XS)
    ref = fourier_pair_value(lambda xi: np.sqrt(1.0 + xi ** 2), XS)
    assert np.max(np.abs(field.value - ref)) < 1e-6
    assert field.meta["kappa"] == 3


def test_rough_oscillating_amplitude_matches_fourier_reference():
    amp = Amplitude(builtin_map("sqrt_cos_symbol", omega=2.0), d=0.0, rho=0.5)
    op = FioOperator.build(translation_phase(), amp)
    field = op.apply(gaussian(), np.array([0.0, 0.5]))
    ref = fourier_pair_value(
        lambda xi: np.cos(2.0 * (1.0 + xi ** 2) ** 0.25), np.array([0.0, 0.5]))
    assert np.max(np.abs(field.value - ref)) < 1e-6
    assert field.meta["kappa"] == 4


# ---------------------------------------------------------------------------
# multiplication-operator amplitudes: exact closed forms


def mult_factor(center=0.4, width=1.3):
    return gaussian(center=center, width=width)


def test_y_amplitude_acts_as_multiplication():
    amp = Amplitude(mult_factor())
    op = FioOperator.build(translation_phase(), amp)
    field = op.apply(gaussian(), XS)
    exact = np.exp(-((XS - 0.4) / 1.3) ** 2) * np.exp(-XS ** 2)
    assert np.max(np.abs(field.value - exact)) < 1e-6


def test_x_amplitude_acts_as_multiplication():
    amp = Amplitude(gaussian(center=-0.2, width=0.9, block="x"))
    op = FioOperator.build(translation_phase(), amp)
    field = op.apply(gaussian(), XS)
    exact = np.exp(-((XS + 0.2) / 0.9) ** 2) * np.exp(-XS ** 2)
    assert np.max(np.abs(field.value - exact)) < 1e-6


def test_adjoint_is_the_transposed_multiplication():
    amp = Amplitude(mult_factor())
    op = FioOperator.build(translation_phase(), amp)
    ys = XS
    field = op.apply_adjoint(gaussian(center=0.1, width=1.1), ys)
    exact = np.exp(-((ys - 0.4) / 1.3) ** 2) * np.exp(-((ys - 0.1) / 1.1) ** 2)
    assert np.max(np.abs(field.value - exact)) < 1e-6


def test_adjoint_transposes_x_dependent_smoothing_amplitude():
    # For a(x, xi) = g(x) <xi>:  A u = g * (<D> u)  while  A^t v = <D>(g v).
    # Both sides are checked against dense Fourier references; the gaussian
    # product g * v is itself a gaussian, so the adjoint reference is exact.
    c1, w1 = 0.4, 1.3
    c2, w2 = 0.1, 1.1
    amp = Amplitude(builtin_map("product", factors=[
        gaussian(center=c1, width=w1, block="x"),
        builtin_map("bracket_power", exponent=1.0),
    ]), d=1.0)
    op = FioOperator.build(translation_phase(), amp)
    pts = np.array([-0.6, 0.0, 0.7])
    bracket = lambda xi: np.sqrt(1.0 + xi ** 2)

    forward = op.apply(gaussian(), pts).value
    ref_fwd = np.exp(-((pts - c1) / w1) ** 2) * fourier_pair_value(bracket, pts)
    assert np.max(np.abs(forward - ref_fwd)) < 1e-6

    adj = op.apply_adjoint(gaussian(center=c2, width=w2, block="y"), pts).value
    w_prod = 1.0 / math.sqrt(1.0 / w1 ** 2 + 1.0 / w2 ** 2)
    c_prod = w_prod ** 2 * (c1 / w1 ** 2 + c2 / w2 ** 2)
    scale = math.exp(-(c1 - c2) ** 2 / (w1 ** 2 + w2 ** 2))
    ref_adj = scale * fourier_pair_value(bracket, pts, center=c_prod,
                                         width=w_prod)
    assert np.max(np.abs(adj - ref_adj)) < 1e-6


def test_pair_distribution_closed_form():
    # A is multiplication by g(x) = exp(-((x - 0.4) / 1.3)^2), so pairing
    # 2 delta_{0.3} - delta'_{-0.4} against v reduces to point evaluations.
    amp = Amplitude(mult_factor())
    op = FioOperator.build(translation_phase(), amp)
    v = gaussian(center=0.1, width=1.1, block="y")
    dist = PointDistribution(points=(0.3, -0.4), weights=(2.0, 1.0),
                             orders=(0, 1))
    val = pair_distribution(op, dist, v)

    g = lambda y: np.exp(-((y - 0.4) / 1.3) ** 2)
    dg = lambda y: -2 * (y - 0.4) / 1.3 ** 2 * g(y)
    vv = lambda y: np.exp(-((y - 0.1) / 1.1) ** 2)
    dv = lambda y: -2 * (y - 0.1) / 1.1 ** 2 * vv(y)
    gv, dgv = g(0.3) * vv(0.3), dg(-0.4) * vv(-0.4) + g(-0.4) * dv(-0.4)
    expected = 2.0 * gv - dgv
    assert val == pytest.approx(expected, rel=1e-5)


# ---------------------------------------------------------------------------
# engine guards and plumbing


def test_engine_rejects_multidimensional_y():
    phase = PhaseFunction(builtin_map("linear_phase", n=2))
    amp = Amplitude(builtin_map("constant", value=1.0, layout=VarLayout(2, 2, 2)))
    op = FioOperator.build(phase, amp, alpha=None)
    with pytest.raises(NotImplementedError):
        op.apply(builtin_map("gaussian_bump", block="y", center=0.0, width=1.0),
                 np.zeros((1, 2)))


def test_build_rejects_degenerate_phase():
    bad = PhaseFunction(builtin_map("product", factors=[
        builtin_map("sum", terms=[
            gaussian(block="x", width=np.sqrt(0.5)),
            builtin_map("scaled", factor=-1.0,
                        inner=builtin_map("coordinate", block="y", index=0)),
        ]),
        builtin_map("coordinate", block="xi", index=0),
    ]))
    with pytest.raises(ValueError, match="nondegeneracy|membership"):
        FioOperator.build(bad, unit_amplitude(), alpha=0.25)


def test_refined_config_scales_radius_and_panels():
    config = QuadratureConfig(xi_radius=10.0, xi_panel_max_width=2.0)
    fine = config.refined(2)
    assert fine.xi_radius == pytest.approx(40.0)
    assert fine.xi_panel_max_width == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# tail convergence


def test_convergence_study_respects_guaranteed_envelope():
    report = convergence_study(translation_phase(), unit_amplitude(),
                               gaussian(), np.array([-0.3, 0.0, 0.4]),
                               m_tilde=2, radii=(4.0, 8.0, 16.0, 32.0))
    errs = np.asarray(report.errors[:-1])  # last is the self-reference zero
    assert np.all(np.diff(errs) < 0)
    assert report.bound_respected(slack=2.0)
    assert report.guaranteed_rate < 0
    assert report.fitted_rate < 0
