import math

import numpy as np
import pytest

from decaylab.errors import BudgetError, InputError
from decaylab.gn import (FamilySpec, GNRequest, classical_gn_ratio, family_scan,
                         interpolation_ratio, power_integrability_check,
                         steepness_gn_ratio)
from decaylab.radial import RadialGrid, RadialProfile, grad_l2_norm, steepness_integral
from decaylab.steepness import SteepnessFunction


def gaussian_profile(grid, width=1.0, scale=1.0):
    return RadialProfile.sample(grid, lambda r: scale * np.exp(-(r / width) ** 2))


def test_sobolev_ratio_stable_under_refinement():
    req = GNRequest(n=3, q=6.0, r=2.0, theta=0.0)
    vals = []
    for m in (2001, 4001):
        vals.append(classical_gn_ratio(gaussian_profile(RadialGrid(3, 12.0, m)), req))
    assert abs(vals[0] / vals[1] - 1.0) < 0.01


def test_classical_dilation_invariance():
    # theta is wired to the exponents, so dilations cancel exactly in the limit
    req = GNRequest(n=3, q=6.0, r=2.0, theta=0.0)
    g = RadialGrid(3, 40.0, 4001)
    r1 = classical_gn_ratio(gaussian_profile(g, 1.0), req)
    r2 = classical_gn_ratio(gaussian_profile(g, 3.0), req)
    assert abs(r2 / r1 - 1.0) < 1e-3


def test_classical_polynomial_hand_computation():
    # phi = (1 - r^2)_+ on n=1 with r=2, q=4, theta=3/4:
    # ||phi||_4^4 = 2*128/315, ||phi||_2^2 = 16/15, ||phi'||_2^2 = 8/3
    req = GNRequest(n=1, q=4.0, r=2.0, theta=0.75)
    g = RadialGrid(1, 1.0, 4001)
    p = RadialProfile.sample(g, lambda r: np.maximum(1 - r**2, 0.0))
    hand = (2 * 128 / 315) ** 0.25 / ((16 / 15) ** (0.5 * 0.75) * (8 / 3) ** (0.5 * 0.25))
    assert classical_gn_ratio(p, req) == pytest.approx(hand, abs=1e-4)


def test_classical_validates_exponent_relation():
    with pytest.raises(InputError):
        classical_gn_ratio(gaussian_profile(RadialGrid(3, 10.0, 101)),
                           GNRequest(n=3, q=6.0, r=2.0, theta=0.3))


def test_steepness_ratio_constant_branch_reduction():
    # once |grad phi|^2 passes s0 the weight freezes at L(s0)^alpha
    L = SteepnessFunction.log_type(2.0, 4.0)
    g = RadialGrid(3, 12.0, 2001)
    p = gaussian_profile(g, 1.0, 2.0)
    assert grad_l2_norm(p) ** 2 > L.s0
    req = GNRequest(n=3, q=2.0, L=L, K=1e6)
    from decaylab.radial import lq_quasinorm
    expected = (lq_quasinorm(p, 2.0) / grad_l2_norm(p)
                * L.value(L.s0) ** req.alpha)
    assert steepness_gn_ratio(p, req) == pytest.approx(expected, rel=1e-12)


def test_steepness_ratio_budget_precondition():
    L = SteepnessFunction.log_type(2.0, 4.0)
    g = RadialGrid(3, 12.0, 1001)
    p = gaussian_profile(g)
    tight = steepness_integral(p, L).value * 0.5
    with pytest.raises(BudgetError):
        steepness_gn_ratio(p, GNRequest(n=3, q=2.0, L=L, K=tight))


def test_steepness_ratio_supercritical_rejected():
    L = SteepnessFunction.log_type(2.0, 4.0)
    with pytest.raises(InputError):
        steepness_gn_ratio(gaussian_profile(RadialGrid(3, 10.0, 101)),
                           GNRequest(n=3, q=6.0, L=L, K=1e9))


def test_steepness_ratio_refinement_invariance():
    L = SteepnessFunction.log_type(2.0, 4.0)
    vals = []
    for m in (2001, 4001):
        g = RadialGrid(3, 20.0, m)
        p = gaussian_profile(g, 2.0, 0.05)
        vals.append(steepness_gn_ratio(p, GNRequest(n=3, q=2.0, L=L, K=1e9)))
    assert abs(vals[0] / vals[1] - 1.0) < 0.01


def test_alpha_monotonicity_per_sample():
    # where L < 1 at the evaluated argument, a larger exponent shrinks the ratio
    L = SteepnessFunction.log_type(2.0, 4.0)
    g = RadialGrid(3, 20.0, 2001)
    p = gaussian_profile(g, 1.0, 0.05)
    assert L.value(grad_l2_norm(p) ** 2) < 1.0
    req = GNRequest(n=3, q=2.0, L=L, K=1e9)
    r1 = steepness_gn_ratio(p, req, alpha_scale=1.0)
    r2 = steepness_gn_ratio(p, req, alpha_scale=1.25)
    assert r2 < r1


def test_interpolation_ratio_closed_form():
    # power-law gauge, phi = 1 on the unit interval ball:
    # ||phi||_1 = 2, ||phi||_2 = sqrt(2), ratio = 2/(sqrt2 (2^{-1/2} + 1))
    Lp = SteepnessFunction.power_law(1.0)
    g = RadialGrid(1, 1.0, 1001)
    p = RadialProfile.sample(g, lambda r: np.ones_like(r))
    req = GNRequest(n=1, q=1.0, q_star=2.0, L=Lp, K=10.0)
    hand = 2.0 / (math.sqrt(2.0) * (2.0 ** -0.5 + 1.0))
    assert interpolation_ratio(p, req) == pytest.approx(hand, rel=1e-12)


def test_interpolation_ratio_bounded_on_gaussians():
    # amplitude rescalings steer the norm argument through the decaying
    # branch of L; the gradient-free interpolation stays within a small band
    L = SteepnessFunction.log_type(2.0, 4.0)
    g = RadialGrid(3, 20.0, 2001)
    ratios = []
    for scale in (0.2, 0.1, 0.05, 0.025):
        p = gaussian_profile(g, 1.0, scale)
        req = GNRequest(n=3, q=1.0, q_star=2.0, L=L,
                        K=steepness_integral(p, L).value * 1.05)
        ratios.append(interpolation_ratio(p, req))
    assert max(ratios) / min(ratios) < 2.0


def test_interpolation_requires_q_below_q_star():
    Lp = SteepnessFunction.power_law(1.0)
    g = RadialGrid(1, 1.0, 101)
    p = RadialProfile.sample(g, lambda r: np.ones_like(r))
    with pytest.raises(InputError):
        interpolation_ratio(p, GNRequest(n=1, q=2.0, q_star=2.0, L=Lp, K=10.0))


def test_power_integrability_identity_and_consistency():
    L = SteepnessFunction.log_type(4.0, 4.0)
    g = RadialGrid(3, 64.0, 6401)
    p = gaussian_profile(g)
    rep = power_integrability_check(p, L, [0.5, 1.0, 2.0])
    assert not rep.base_flagged
    assert rep.consistent
    # r = 1 reproduces the plain steepness integral exactly
    assert rep.values[1] == steepness_integral(p, L).value


def test_power_integrability_flagged_family():
    # a slowly decaying profile trips the truncation flag for every exponent
    L = SteepnessFunction.log_type(1.0, 4.0)
    g = RadialGrid(3, 20.0, 1001)
    p = RadialProfile.sample(g, lambda r: np.exp(-r))
    rep = power_integrability_check(p, L, [0.5, 1.0, 2.0])
    assert rep.base_flagged
    assert all(rep.flags)
    assert rep.consistent


def test_family_singleton_matches_direct_ratio():
    L = SteepnessFunction.log_type(2.0, 4.0)
    g = RadialGrid(3, 20.0, 2001)
    fam = FamilySpec(kind="StretchedExp", c0=1.0, alpha=1.0, beta=2.0,
                     scales=[0.1], widths=[2.0])
    scan = family_scan(fam, GNRequest(n=3, q=2.0, L=L), g)
    assert len(scan.rows) == 1
    p = gaussian_profile(g, 2.0, 0.1)
    req = GNRequest(n=3, q=2.0, L=L, K=scan.K)
    assert scan.rows[0].ratio == pytest.approx(steepness_gn_ratio(p, req), rel=1e-12)


def test_family_zip_and_broadcast_validation():
    fam = FamilySpec(kind="StretchedExp", c0=1.0, alpha=1.0, beta=2.0,
                     scales=[1.0], widths=[1.0, 2.0])
    assert fam.members() == [(1.0, 1.0), (1.0, 2.0)]
    with pytest.raises(InputError):
        FamilySpec(kind="StretchedExp", c0=1.0, alpha=1.0, beta=2.0,
                   scales=[1.0, 2.0, 3.0], widths=[1.0, 2.0])
    with pytest.raises(InputError):
        FamilySpec(kind="DoubleExp", c0=1.0, alpha=1.0, beta=2.0)


def test_family_width_resolvability():
    fam = FamilySpec(kind="StretchedExp", c0=1.0, alpha=1.0, beta=2.0,
                     widths=[10.0])
    with pytest.raises(InputError):
        family_scan(fam, GNRequest(n=3, q=2.0, L=SteepnessFunction.log_type(2.0, 4.0)),
                    RadialGrid(3, 20.0, 501))


def test_double_exp_family_scan_finite():
    L = SteepnessFunction.double_log_type(2.0, math.e**3)
    fam = FamilySpec(kind="DoubleExp", c0=0.3, alpha=1.0, beta=1.0, gamma=1.0,
                     scales=[1.0], widths=[1.0, 2.0, 4.0])
    scan = family_scan(fam, GNRequest(n=3, q=2.0, L=L), RadialGrid(3, 40.0, 2001))
    assert all(np.isfinite(row.ratio) for row in scan.rows)
    assert all(row.budget_ok for row in scan.rows)
    assert scan.ratio_max / scan.ratio_min < 10.0


def test_scan_csv_and_summary():
    L = SteepnessFunction.log_type(2.0, 4.0)
    fam = FamilySpec(kind="StretchedExp", c0=1.0, alpha=1.0, beta=2.0,
                     scales=[0.1, 0.05], widths=[1.0, 2.0])
    scan = family_scan(fam, GNRequest(n=3, q=2.0, L=L), RadialGrid(3, 20.0, 1001))
    text = scan.to_csv()
    assert text.splitlines()[0] == "member_id,width,scale,grad_norm,lq_norm,budget,ratio"
    assert len(text.splitlines()) == 3
    doc = scan.summary()
    assert doc["members"] == 2
    assert doc["grad_span"] >= 1.0
