import collections
import itertools
import math

import numpy as np
import pytest

from fermisect import norms as fn
from fermisect import sectorization as fs
from fermisect.errors import (CurveMismatch, MalformedQuery, MaskRequired,
                              SymmetryError)
from fermisect.curve import certify


MASK4 = fn.MomentumMask.conserving((1, 1, -1, -1))


def small_sig(curve, n):
    return fs.build(curve, M=3, j=4, ell=curve.total_length / n + 1e-12)


def brute_p_norm(K, p):
    best = 0.0
    for pos in itertools.combinations(range(K.legs), p):
        groups = collections.Counter()
        for t, w in K.weights.items():
            groups[tuple(t[i] for i in pos)] += w
        if groups:
            best = max(best, max(groups.values()))
    return best


# ----------------------------------------------------------------------
# construction


def test_kernel_validation(circle):
    sig = small_sig(circle, 24)
    with pytest.raises(MalformedQuery):
        fn.SectorKernel(4, sig, {(0, 1, 2): 1.0})
    with pytest.raises(MalformedQuery):
        fn.SectorKernel(4, sig, {(0, 1, 2, 3): -1.0})
    with pytest.raises(MalformedQuery):
        fn.SectorKernel(4, sig, {(0, 0, 11, 11): 1.0},
                        mask=fn.MomentumMask.pp())
    # antipodal-cancelling quadruple passes the pp mask on the circle
    anti = (0 + 12) % 24
    K = fn.SectorKernel(4, sig, {(0, anti, 0, anti): 1.0},
                        mask=fn.MomentumMask.pp())
    assert len(K) == 1


def test_pp_mask_arity(circle):
    sig = small_sig(circle, 24)
    bad = fn.MomentumMask(signs=(1, -1), particle_particle=True)
    with pytest.raises(MalformedQuery):
        fn.SectorKernel(2, sig, {(0, 0): 1.0}, mask=bad)


def test_zero_weights_dropped(circle):
    sig = small_sig(circle, 24)
    K = fn.SectorKernel(3, sig, {(0, 1, 2): 0.0, (1, 2, 3): 2.0})
    assert len(K) == 1
    assert fn.p_norm(K, 1).value == 2.0


def test_kernel_json_round_trip(circle):
    sig = small_sig(circle, 24)
    anti = 12
    K = fn.SectorKernel(4, sig, {(0, anti, 0, anti): 1.5,
                                 (3, 15, 3, 15): 0.5},
                        mask=fn.MomentumMask.pp())
    K2 = fn.SectorKernel.from_dict(K.to_dict(), sig)
    assert K2.weights == K.weights
    assert K2.mask.particle_particle


# ----------------------------------------------------------------------
# p-norms


def test_p_norm_single_entry(circle):
    sig = small_sig(circle, 24)
    K = fn.SectorKernel(4, sig, {(1, 2, 3, 4): 2.5})
    for p in (1, 2, 3, 4):
        assert fn.p_norm(K, p).value == 2.5
    with pytest.raises(MalformedQuery):
        fn.p_norm(K, 0)


def test_p_norm_constant_masked_brute(circle):
    sig = small_sig(circle, 32)
    K = fn.constant_masked_kernel(sig, MASK4)
    assert len(K) > 0
    for p in (1, 2, 3):
        assert fn.p_norm(K, p).value == pytest.approx(brute_p_norm(K, p))


def test_p_norm_product_kernel(circle):
    sig = small_sig(circle, 24)
    w = {(i, j, 0, 0): (i + 1.0) * (j + 1.0)
         for i in range(5) for j in range(5)}
    K = fn.SectorKernel(4, sig, w)
    # fixing legs (3, 4) sums everything: (sum i+1)(sum j+1) = 225
    assert fn.p_norm(K, 1).value == 225.0
    assert fn.p_norm(K, 2).value == 225.0
    # fixing (1, 2) and the best (i, j) = (4, 4) leaves weight 25
    assert fn.p_norm(K, 4).value == 25.0


def test_p_norm_scaling_equivariance(circle):
    sig = small_sig(circle, 32)
    rng = np.random.default_rng(7)
    K = fn.star_masked_kernel(sig, MASK4, 5, rng)
    r1 = fn.p_norm(K, 1)
    r3 = fn.p_norm(K, 3)
    K2 = K.scale(2.5)
    assert fn.p_norm(K2, 1).value == pytest.approx(2.5 * r1.value)
    assert fn.p_norm(K2, 1).argmax_legs == r1.argmax_legs
    assert fn.p_norm(K2, 3).argmax_legs == r3.argmax_legs
    assert fn.p_norm(K.scale(0.0), 1).value == 0.0


def test_norm_monotone_in_support(circle):
    sig = small_sig(circle, 32)
    rng = np.random.default_rng(8)
    K = fn.star_masked_kernel(sig, MASK4, 7, rng)
    items = sorted(K.weights.items())
    half = fn.SectorKernel(4, sig, dict(items[: len(items) // 2]), mask=MASK4)
    for p in (1, 3):
        assert fn.p_norm(half, p).value <= fn.p_norm(K, p).value
    assert fn.channel_norm(half).value <= fn.channel_norm(K).value


def test_p_norm_completion_bound(circle):
    sig = small_sig(circle, 32)
    K = fn.constant_masked_kernel(sig, MASK4)
    completions = collections.Counter()
    for t in K.weights:
        completions[(0, t[0])] += 1
    n1 = fn.p_norm(K, 1).value
    n3 = fn.p_norm(K, 3).value
    assert n3 <= n1
    assert n1 <= n3 * max(completions.values())


# ----------------------------------------------------------------------
# omega norm


def test_omega_norm_clustered_zero(circle):
    sig = small_sig(circle, 36)
    K = fn.SectorKernel(4, sig, {(0, 0, 0, 0): 1.0})
    assert fn.omega_norm(K, 2 * sig.ell).value == 0.0


def test_omega_norm_far_triple(circle):
    sig = small_sig(circle, 30)
    n = len(sig)
    # thirds of the curve: pairwise far and far from antipodes
    t = (0, n // 5, 2 * n // 5, 0)
    K = fn.SectorKernel(4, sig, {t: 1.5})
    assert fn.omega_norm(K, 2 * sig.ell).value == 1.5
    with pytest.raises(MalformedQuery):
        fn.omega_norm(fn.SectorKernel(2, sig, {(0, 1): 1.0}), sig.ell)


def test_omega_norm_below_1_norm(circle):
    sig = small_sig(circle, 32)
    rng = np.random.default_rng(9)
    K = fn.star_masked_kernel(sig, MASK4, 3, rng)
    for omega in (sig.ell, 4 * sig.ell, 16 * sig.ell):
        assert fn.omega_norm(K, omega).value <= fn.p_norm(K, 1).value + 1e-12


# ----------------------------------------------------------------------
# channel norm


def test_channel_norm_basics(circle):
    sig = small_sig(circle, 24)
    K = fn.SectorKernel(4, sig, {(1, 2, 3, 4): 2.0})
    assert fn.channel_norm(K).value == 2.0
    w = {(0, 1, c, d): 1.0 for c in range(6) for d in range(6)}
    K2 = fn.SectorKernel(4, sig, w)
    assert fn.channel_norm(K2).value == 36.0
    with pytest.raises(MalformedQuery):
        fn.channel_norm(fn.SectorKernel(3, sig, {(0, 1, 2): 1.0}))


def test_channel_matches_pair_completion_count(pert):
    from fermisect import momentum as fm

    sig = small_sig(pert, 40)
    mask = fn.MomentumMask.pp()
    K = fn.constant_masked_kernel(sig, mask)
    ch = fn.channel_norm(K)
    (pos, key) = ch.argmax_legs[0]
    got = fm.pair_sum_count(sig, "sector_pair", sig[key[0]], sig[key[1]])
    # both counts over-approximate the same exact completion set, the mask
    # in the standard frame and the pair count in per-leg frames, so they
    # agree up to the frame-projection slack
    assert got <= int(ch.value)
    assert got >= 0.7 * ch.value


# ----------------------------------------------------------------------
# comparisons


def test_compare_1v3_requires_mask(circle):
    sig = small_sig(circle, 24)
    K = fn.SectorKernel(4, sig, {(0, 1, 2, 3): 1.0})
    with pytest.raises(MaskRequired):
        fn.compare_1_vs_3(K)


def test_compare_1v3_values(circle):
    sig = small_sig(circle, 32)
    K = fn.constant_masked_kernel(sig, MASK4)
    rep = fn.compare_1_vs_3(K)
    assert rep.value_a == fn.p_norm(K, 1).value
    assert rep.value_b == fn.p_norm(K, 3).value
    assert rep.scaled_ratio == pytest.approx(
        rep.value_a / rep.value_b * sig.ell)
    single = fn.SectorKernel(4, sig, {(0, 16, 0, 16): 3.0}, mask=MASK4)
    assert fn.compare_1_vs_3(single).ratio == 1.0
    empty = fn.SectorKernel(4, sig, {}, mask=MASK4)
    rep0 = fn.compare_1_vs_3(empty)
    assert rep0.value_a == rep0.value_b == rep0.ratio == 0.0


def test_omega_decomposition(circle):
    sig = small_sig(circle, 32)
    K = fn.constant_masked_kernel(sig, MASK4)
    omega = max(sig.ell, sig.base_M ** (-(sig.scale_j - 1) / 2))
    rep = fn.omega_decomposition_check(K, 4 * omega)
    assert rep.norm1_omega <= rep.norm1
    assert rep.norm1 <= rep.norm1_omega \
        + rep.fitted_constant * 4 * (4 * omega / sig.ell) ** 2 * rep.norm3 \
        + 1e-9
    with pytest.raises(MalformedQuery):
        fn.omega_decomposition_check(K, sig.ell / 100)


def test_channel_vs_3_symmetric_refused(circle):
    sig = small_sig(circle, 24)
    K = fn.constant_masked_kernel(sig, fn.MomentumMask.pp())
    cert = certify(circle, n_max=4, grid=256)
    with pytest.raises(SymmetryError):
        fn.channel_vs_3_check(K, n0=3, certificate=cert)


def test_channel_vs_3_asymmetric(pert):
    sig = small_sig(pert, 40)
    K = fn.constant_masked_kernel(sig, fn.MomentumMask.pp())
    rep = fn.channel_vs_3_check(K, n0=3)
    assert rep.scaled_ratio == pytest.approx(
        rep.ratio / (sig.ell ** (1.0 / 3.0) / sig.ell))
    single = fn.SectorKernel(
        4, sig, {next(iter(K.weights)): 1.0}, mask=fn.MomentumMask.pp())
    rep1 = fn.channel_vs_3_check(single, n0=3)
    assert rep1.ratio == 1.0
    assert rep1.scaled_ratio == pytest.approx(sig.ell ** (1 - 1.0 / 3.0))


# ----------------------------------------------------------------------
# resectorization


def _nested(curve, nc, ratio, extension_frac=fs.EXTENSION_FRAC):
    L = curve.total_length
    coarse = fs.build(curve, M=3, j=4, ell=L / nc + 1e-12,
                      extension_frac=extension_frac)
    fine = fs.build(curve, M=3, j=6, ell=L / (nc * ratio) + 1e-12,
                    extension_frac=extension_frac)
    return coarse, fine


def test_resectorize_identity_zero_extension(circle):
    coarse, _ = _nested(circle, 24, 4, extension_frac=0.0)
    K = fn.SectorKernel(2, coarse, {(3, 7): 1.5, (0, 11): 0.25})
    K2 = fn.resectorize(K, coarse)
    assert K2.weights == K.weights


def test_resectorize_single_entry_smear(circle):
    coarse, fine = _nested(circle, 24, 4, extension_frac=0.0)
    K = fn.SectorKernel(2, coarse, {(3, 7): 1.5})
    Kf = fn.resectorize(K, fine)
    assert len(Kf) == 16
    assert all(w == 1.5 for w in Kf.weights.values())
    om = fs.overlap_map(fine, coarse)
    assert set(Kf.weights) == set(itertools.product(om[3], om[7]))


def test_resectorize_composition_nested(circle):
    L = circle.total_length
    s0 = fs.build(circle, M=3, j=4, ell=L / 16 + 1e-12, extension_frac=0.0)
    s1 = fs.build(circle, M=3, j=5, ell=L / 64 + 1e-12, extension_frac=0.0)
    s2 = fs.build(circle, M=3, j=6, ell=L / 256 + 1e-12, extension_frac=0.0)
    K = fn.SectorKernel(2, s0, {(2, 9): 1.0, (5, 5): 0.5})
    via = fn.resectorize(fn.resectorize(K, s1), s2)
    direct = fn.resectorize(K, s2)
    assert via.weights == direct.weights


def test_resectorize_masked_support(pert):
    coarse, fine = _nested(pert, 20, 4)
    mask = MASK4
    K = fn.constant_masked_kernel(coarse, mask)
    Kf = fn.resectorize(K, fine)
    # re-masked support stays mask-compatible by construction
    ok = fn.mask_compatible(fine, list(Kf.weights), mask.signs)
    assert ok.all()
    assert len(Kf) > 0


def test_resectorize_errors(circle, pert):
    coarse, fine = _nested(circle, 24, 4)
    K = fn.SectorKernel(2, fine, {(0, 1): 1.0})
    with pytest.raises(MalformedQuery):
        fn.resectorize(K, coarse)     # target must be finer
    other = fs.build(pert, M=3, j=4, ell=0.4)
    with pytest.raises(CurveMismatch):
        fn.resectorize(fn.SectorKernel(2, coarse, {(0, 1): 1.0}), other)


# ----------------------------------------------------------------------
# generators


def test_star_norms_match_kernel(circle):
    sig = small_sig(circle, 40)
    rng1 = np.random.default_rng(3)
    rng2 = np.random.default_rng(3)
    K = fn.star_masked_kernel(sig, MASK4, 7, rng1)
    n1f, n3f = fn.star_norms(sig, MASK4, 7, rng2)
    assert n1f == pytest.approx(fn.p_norm(K, 1).value)
    assert n3f == pytest.approx(fn.p_norm(K, 3).value, rel=0.2)


def test_scatter_kernel_masked(circle):
    sig = small_sig(circle, 40)
    rng = np.random.default_rng(4)
    K = fn.scatter_masked_kernel(sig, MASK4, 30, rng)
    assert len(K) >= 20
    assert fn.mask_compatible(sig, list(K.weights), MASK4.signs).all()
