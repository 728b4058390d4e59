import math

import numpy as np
import pytest
from scipy.optimize import brentq

from fermisect import curve as fc
from fermisect.errors import (AmbiguousProjection, IndeterminateCertificate,
                              OrderError)


# ----------------------------------------------------------------------
# independent finite-difference jet oracle


def fd_graph_jets(curve, theta0, n_max, h=0.02):
    """Jets of the local graph by central finite differences with one
    Richardson level, solving theta(x) by bracketed root finding.  Fully
    independent of the library's series-composition path."""
    k0 = np.asarray(curve.positions(np.array(theta0)))
    that = np.array([-math.sin(theta0), math.cos(theta0)])
    nhat = -np.array([math.cos(theta0), math.sin(theta0)])

    def xfun(t):
        return float((curve.positions(np.array(t)) - k0) @ that)

    def yfun(x):
        t = brentq(lambda t: xfun(t) - x, theta0 - 1.2, theta0 + 1.2,
                   xtol=1e-14)
        return float((curve.positions(np.array(t)) - k0) @ nhat)

    stencils = {
        2: ([1.0, -2.0, 1.0], 1),
        3: ([-0.5, 1.0, 0.0, -1.0, 0.5], 2),
        4: ([1.0, -4.0, 6.0, -4.0, 1.0], 2),
    }
    out = []
    for n in range(2, n_max + 1):
        w, half = stencils[n]

        def deriv(step):
            vals = [yfun(m * step) for m in range(-half, half + 1)]
            return sum(c * v for c, v in zip(w, vals)) / step ** n

        d1, d2 = deriv(h), deriv(h / 2)
        out.append((4.0 * d2 - d1) / 3.0)
    return out


# ----------------------------------------------------------------------
# evaluation


def test_eval_circle(circle):
    p = fc.eval_point(circle, 0.0)
    assert np.allclose(p.position, [1.0, 0.0], atol=1e-14)
    assert p.curvature == pytest.approx(1.0)
    assert np.allclose(p.tangent, [0.0, 1.0], atol=1e-14)


def test_eval_ellipse_axis(ellipse):
    p = fc.eval_point(ellipse, 0.0)
    assert np.allclose(p.position, [2.0, 0.0], atol=1e-10)


def test_eval_perturbed(pert):
    p = fc.eval_point(pert, 0.0)
    assert np.allclose(p.position, [1.05, 0.0], atol=1e-14)
    assert p.curvature == pytest.approx(1.0 / 0.6, rel=1e-12)


def test_frame_orthonormal(pert):
    rng = np.random.default_rng(0)
    for th in rng.uniform(0, 2 * math.pi, 50):
        p = fc.eval_point(pert, th)
        assert abs(p.tangent @ p.inward_normal) < 1e-12
        assert abs(np.linalg.norm(p.tangent) - 1) < 1e-12
        assert abs(np.linalg.norm(p.inward_normal) - 1) < 1e-12


def test_dispersion_matches_support_ellipse(ellipse, ellipse_dispersion):
    for th in (0.0, 0.7, 2.0, 4.5):
        a = fc.eval_point(ellipse, th)
        b = fc.eval_point(ellipse_dispersion, th)
        assert np.allclose(a.position, b.position, atol=1e-9)
        assert a.curvature == pytest.approx(b.curvature, rel=1e-6)


def test_dispersion_rejects_bad_expression():
    with pytest.raises(ValueError):
        fc.CurveModel.dispersion("k1 + q7")


def test_dispersion_solve_iteration_cap(ellipse_dispersion):
    from fermisect.errors import NumericError

    with pytest.raises(NumericError):
        ellipse_dispersion._solve_points(np.array([0.3, 1.2]), max_iter=1)


# ----------------------------------------------------------------------
# antipode


def test_antipode_circle(circle):
    a = fc.antipode(circle, math.pi / 2)
    assert np.allclose(a.position, [0.0, -1.0], atol=1e-12)


def test_antipode_ellipse_central(ellipse):
    rng = np.random.default_rng(1)
    for th in rng.uniform(0, 2 * math.pi, 20):
        p = fc.eval_point(ellipse, th)
        a = fc.antipode(ellipse, th)
        assert np.allclose(a.position, -p.position, atol=1e-10)


def test_antipode_perturbed(pert):
    a = fc.antipode(pert, 0.0)
    assert np.allclose(a.position, [-0.95, 0.0], atol=1e-12)


def test_antipode_involution_and_tangents(circle, ellipse, pert):
    rng = np.random.default_rng(2)
    for curve in (circle, ellipse, pert):
        ths = rng.uniform(0, 2 * math.pi, 1000)
        pos = curve.positions(ths)
        double = curve.positions(ths + 2 * math.pi)
        assert np.abs(pos - double).max() < 1e-10
        t1 = fc._unit_perp(ths)
        t2 = fc._unit_perp(ths + math.pi)
        cross = t1[:, 0] * t2[:, 1] - t1[:, 1] * t2[:, 0]
        assert np.abs(cross).max() < 1e-10


def test_gauss_map_monotone(pert, ellipse):
    for curve in (pert, ellipse):
        ths = np.linspace(0, 2 * math.pi, 4096, endpoint=False)
        assert curve.rho(ths).min() > 0
        s = curve.arclength(ths)
        assert np.all(np.diff(s) > 0)


# ----------------------------------------------------------------------
# projection


def test_project_circle(circle):
    p = fc.project(circle, [0.5, 0.0])
    assert np.allclose(p.position, [1.0, 0.0], atol=1e-12)


def test_project_center_ambiguous(circle):
    with pytest.raises(AmbiguousProjection):
        fc.project(circle, [0.0, 0.0])


def test_project_ellipse(ellipse):
    p = fc.project(ellipse, [2.2, 0.0])
    assert np.allclose(p.position, [2.0, 0.0], atol=1e-9)
    # brute-force nearest point over a dense grid agrees
    ths = np.linspace(0, 2 * math.pi, 200000, endpoint=False)
    pos = ellipse.positions(ths)
    d = np.linalg.norm(pos - np.array([2.2, 0.0]), axis=1)
    best = pos[d.argmin()]
    assert np.allclose(p.position, best, atol=1e-4)


def test_project_normality(pert):
    rng = np.random.default_rng(3)
    for _ in range(30):
        th = rng.uniform(0, 2 * math.pi)
        t = rng.uniform(-0.3, 0.3)
        q = np.asarray(pert.positions(np.array(th))) \
            + t * np.array([math.cos(th), math.sin(th)])
        p = fc.project(pert, q)
        assert abs((q - p.position) @ p.tangent) < 1e-9


# ----------------------------------------------------------------------
# jets


def test_circle_jets_closed_form(circle):
    # 1 - sqrt(1 - x^2) = x^2/2 + x^4/8 + x^6/16 + ...
    jets = fc.graph_jet(circle, 0.0, 6)
    assert np.allclose(jets, [1.0, 0.0, 3.0, 0.0, 45.0], atol=1e-10)
    jets = fc.graph_jet(circle, 1.234, 4)
    assert np.allclose(jets, [1.0, 0.0, 3.0], atol=1e-10)


def test_ellipse_jet_curvature(ellipse):
    jets = fc.graph_jet(ellipse, 0.0, 2)
    assert jets[0] == pytest.approx(2.0, abs=1e-9)


def test_jets_match_fd_oracle(ellipse, pert):
    for curve, th in ((ellipse, 0.9), (pert, 0.4), (pert, 2.1)):
        lib = fc.graph_jet(curve, th, 4)
        ora = fd_graph_jets(curve, th, 4)
        assert np.allclose(lib, ora, atol=2e-5, rtol=1e-4)


def test_jet_curvature_identity(circle, ellipse, pert):
    rng = np.random.default_rng(4)
    for curve in (circle, ellipse, pert):
        ths = rng.uniform(0, 2 * math.pi, 200)
        jets = fc.graph_jets_batch(curve, ths, 3)
        curv = 1.0 / curve.rho(ths)
        assert np.abs(jets[:, 0] - curv).max() < 1e-8


def test_jet_order_budget(circle):
    with pytest.raises(OrderError):
        fc.graph_jet(circle, 0.0, 9)


# ----------------------------------------------------------------------
# asymmetry orders


def test_asymmetry_order_circle_absent(circle):
    rng = np.random.default_rng(5)
    for th in rng.uniform(0, 2 * math.pi, 20):
        assert fc.asymmetry_order(circle, th, 6) is None


def test_asymmetry_order_perturbed(pert):
    assert fc.asymmetry_order(pert, 0.0, 6) == 2
    assert fc.asymmetry_order(pert, math.pi / 6, 6) == 3
    # cross-check the order-3 point with the finite-difference oracle
    j1 = fd_graph_jets(pert, math.pi / 6, 3)
    j2 = fd_graph_jets(pert, math.pi / 6 + math.pi, 3)
    assert abs(j1[0] - j2[0]) < 1e-4          # curvatures agree
    assert abs(j1[1] - j2[1]) > 1.0           # third jets differ (48 eps)


def test_symmetric_jets_equal(ellipse):
    ths = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    jets = fc.graph_jets_batch(ellipse, ths, 5)
    anti = fc.graph_jets_batch(ellipse, ths + math.pi, 5)
    assert np.abs(jets - anti).max() < 1e-7


# ----------------------------------------------------------------------
# certification


def test_certify_circle(circle):
    cert = fc.certify(circle, n_max=6, grid=512)
    assert cert.symmetric
    assert np.abs(cert.symmetry_center).max() < 1e-10
    assert cert.n0 is None
    assert all(o is None for _, o in cert.per_point_order)


def test_certify_ellipse(ellipse):
    cert = fc.certify(ellipse, n_max=6, grid=512)
    assert cert.symmetric
    assert np.abs(cert.symmetry_center).max() < 1e-10


def test_certify_shifted_circle_center():
    shifted = fc.CurveModel.support([(0, 1.0, 0.0), (1, 0.3, 0.2)])
    cert = fc.certify(shifted, n_max=6, grid=512)
    assert cert.symmetric
    assert np.allclose(cert.symmetry_center, [0.3, 0.2], atol=1e-10)


def test_certify_perturbed(pert):
    cert = fc.certify(pert, n_max=6, grid=512)
    assert not cert.symmetric
    assert cert.n0 == 3
    orders = {o for _, o in cert.per_point_order}
    assert orders <= {2, 3}
    assert cert.min_jet_gap > 0


def test_certify_grid_too_small(pert):
    with pytest.raises(ValueError):
        fc.certify(pert, n_max=6, grid=100)


# ----------------------------------------------------------------------
# antipodal sums


def test_antipodal_sum_circle(circle):
    for th in (0.0, 0.7, 2.0):
        assert np.abs(fc.antipodal_sum(circle, th)).max() < 1e-12


def test_antipodal_sum_perturbed(pert):
    s = fc.antipodal_sum(pert, 0.0)
    assert np.allclose(s, [0.1, 0.0], atol=1e-12)


def test_antipodal_sum_symmetric_constant():
    shifted = fc.CurveModel.support([(0, 1.0, 0.0), (1, 0.3, 0.2)])
    ths = np.linspace(0, 2 * math.pi, 100)
    sums = fc.antipodal_sum(shifted, ths)
    assert np.abs(sums - np.array([0.6, 0.4])).max() < 1e-12


def test_antipodal_critical_points(pert):
    crit = fc.antipodal_sum_critical(pert)
    thetas = sorted(t for t, _ in crit)
    # rho(theta) = rho(theta + pi) exactly where cos(3 theta) = 0
    expected = [math.pi / 6 + k * math.pi / 3 for k in range(6)]
    assert len(thetas) == 6
    assert np.allclose(thetas, expected, atol=1e-10)


def test_sublevel_circle_full_and_empty(circle):
    assert fc.antipodal_sum_sublevel_length(circle, [0, 0], 0.5) == \
        pytest.approx(2 * math.pi)
    assert fc.antipodal_sum_sublevel_length(circle, [1, 0], 0.5) == 0.0


def test_sublevel_quad_points_floor(circle):
    with pytest.raises(ValueError):
        fc.antipodal_sum_sublevel_length(circle, [0, 0], 0.5, quad_points=100)


def test_sublevel_halving_scaling(pert):
    # near a critical value of the antipodal sum the length scales like
    # sqrt(eps): quadratic local behaviour of the sum map
    _, center = fc.antipodal_sum_critical(pert)[0]
    l1 = fc.antipodal_sum_sublevel_length(pert, center, 2.0 ** -6)
    l2 = fc.antipodal_sum_sublevel_length(pert, center, 2.0 ** -8)
    assert l1 / l2 == pytest.approx(2.0, rel=0.05)


def test_indeterminate_on_small_nmax(pert):
    # probing only the curvature gap leaves the curvature-equal points
    # undecided, which must be reported rather than clamped
    with pytest.raises(IndeterminateCertificate):
        fc.certify(pert, n_max=2, grid=512)


# ----------------------------------------------------------------------
# serialization


def test_curve_json_round_trip(pert, ellipse_dispersion):
    for curve in (pert, ellipse_dispersion):
        clone = fc.CurveModel.from_dict(curve.to_dict())
        assert clone.same_curve(curve)
        ths = np.array([0.3, 1.1, 5.0])
        assert np.allclose(clone.positions(ths), curve.positions(ths),
                           atol=1e-12)
