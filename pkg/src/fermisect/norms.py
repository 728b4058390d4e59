"""Sector-indexed kernel norms and resectorization.

A SectorKernel abstracts a translation-invariant n-point kernel at the
combinatorial level: a sparse nonnegative weight per n-tuple of sector
indices.  The norms implemented here fix some legs and sum the rest:

* p-norm: max over p leg positions and p sectors of the summed weight of
  the matching entries;
* omega-norm: the 1-norm restricted to entries where some pair of
  non-fixed legs is omega-far both directly and antipodally;
* channel norm: fix the two left legs of a 4-leg kernel, sum the right two.

Momentum-conservation masks are enforced at kernel construction; the mask
predicate is rect-mode compatibility evaluated in the standard frame (one
shared frame keeps batch checks cheap; any frame gives a valid conservative
outer test).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import contains_zero, signed_box
from .errors import CurveMismatch, MalformedQuery, MaskRequired, SymmetryError
from .momentum import PRODUCT_CAP, SectorBoxSet, _count_signed_tuples
from .sectorization import Sectorization, overlap_map


@dataclass(frozen=True)
class MomentumMask:
    """Conservation mask: the signed sector boxes must reach zero."""

    signs: tuple
    particle_particle: bool = False

    @classmethod
    def pp(cls):
        return cls(signs=(1, 1, -1, -1), particle_particle=True)

    @classmethod
    def conserving(cls, signs):
        return cls(signs=tuple(signs))


def _std_boxset(sig: Sectorization) -> SectorBoxSet:
    cache = getattr(sig, "_std_boxset", None)
    if cache is None:
        cache = SectorBoxSet(sig, frame_theta=None)
        sig._std_boxset = cache
    return cache


def mask_compatible(sig: Sectorization, tuples, signs):
    """Vectorized rect-mode conservation test for an array of index tuples."""
    tuples = np.asarray(tuples, dtype=np.int64)
    if tuples.size == 0:
        return np.zeros(0, dtype=bool)
    boxes = _std_boxset(sig).boxes
    total = np.zeros((len(tuples), 4))
    for leg, sg in enumerate(signs):
        b = boxes[tuples[:, leg]]
        total += b if sg > 0 else np.stack(
            [-b[:, 1], -b[:, 0], -b[:, 3], -b[:, 2]], axis=1)
    return contains_zero(total)


@dataclass
class SectorKernel:
    """Sparse nonnegative weights on n-tuples of sector indices."""

    legs: int
    sig: Sectorization
    weights: dict
    mask: MomentumMask | None = None

    def __post_init__(self):
        if self.legs < 2:
            raise MalformedQuery("kernels need at least 2 legs")
        clean = {}
        for t, w in self.weights.items():
            if len(t) != self.legs:
                raise MalformedQuery(f"tuple {t} has wrong arity")
            if w < 0:
                raise MalformedQuery("weights must be nonnegative")
            if w > 0:
                clean[tuple(int(i) for i in t)] = float(w)
        self.weights = clean
        if self.mask is not None:
            if self.mask.particle_particle:
                if self.legs != 4 or self.mask.signs != (1, 1, -1, -1):
                    raise MalformedQuery(
                        "particle-particle kernels have 4 legs with signs "
                        "(+, +, -, -)")
            if len(self.mask.signs) != self.legs:
                raise MalformedQuery("mask sign pattern arity mismatch")
            if clean:
                ok = mask_compatible(self.sig, list(clean.keys()),
                                     self.mask.signs)
                if not ok.all():
                    bad = list(clean.keys())[int(np.nonzero(~ok)[0][0])]
                    raise MalformedQuery(
                        f"entry {bad} violates the conservation mask")

    def __len__(self):
        return len(self.weights)

    def scale(self, lam):
        if lam < 0:
            raise MalformedQuery("scale factor must be nonnegative")
        return SectorKernel(self.legs, self.sig,
                            {t: lam * w for t, w in self.weights.items()},
                            mask=self.mask)

    def to_dict(self):
        mask = "none"
        if self.mask is not None:
            mask = "pp" if self.mask.particle_particle else list(self.mask.signs)
        return {"legs": self.legs, "mask": mask,
                "entries": [[list(t), w] for t, w in sorted(self.weights.items())]}

    @classmethod
    def from_dict(cls, data, sig):
        mask = data.get("mask", "none")
        if mask == "pp":
            mask = MomentumMask.pp()
        elif mask in ("none", None):
            mask = None
        else:
            mask = MomentumMask.conserving(mask)
        weights = {tuple(t): w for t, w in data["entries"]}
        return cls(legs=data["legs"], sig=sig, weights=weights, mask=mask)


@dataclass
class NormReport:
    p: object
    value: float
    argmax_legs: list = field(default_factory=list)


# ----------------------------------------------------------------------
# norms


def p_norm(K: SectorKernel, p: int) -> NormReport:
    """Max over p fixed leg positions and sectors of the summed weight of
    the remaining legs.  p = legs degenerates to the plain max entry.
    Ties are broken by lexicographic leg positions, then sectors."""
    if p < 1:
        raise MalformedQuery("p must be at least 1")
    if p > K.legs:
        raise MalformedQuery("p exceeds the number of legs")
    if not K.weights:
        return NormReport(p=p, value=0.0)
    best = None
    for positions in itertools.combinations(range(K.legs), p):
        groups = {}
        for t, w in K.weights.items():
            key = tuple(t[i] for i in positions)
            groups[key] = groups.get(key, 0.0) + w
        key, val = max(groups.items(), key=lambda kv: (kv[1], [-x for x in kv[0]]))
        if best is None or val > best[0] + 1e-15 * max(1.0, abs(best[0])):
            best = (val, positions, key)
    return NormReport(p=p, value=best[0], argmax_legs=[(best[1], best[2])])


def _arc_intervals(sig: Sectorization):
    """Plain arcs and their antipodal images, as arclength intervals."""
    cached = getattr(sig, "_arc_intervals", None)
    if cached is not None:
        return cached
    curve = sig.curve
    lo = np.array([s.s_lo for s in sig.sectors])
    hi = np.array([s.s_hi for s in sig.sectors])
    th_lo = curve.theta_from_arclength(lo)
    th_hi = curve.theta_from_arclength(hi)
    alo = curve.arclength(th_lo + math.pi)
    ahi = curve.arclength(th_hi + math.pi)
    L = curve.total_length
    cached = (np.stack([lo, hi], axis=1),
              np.stack([alo % L, ahi % L + np.where(ahi % L < alo % L, L, 0.0)],
                       axis=1), L)
    sig._arc_intervals = cached
    return cached


def _interval_dist(a, b, L):
    """Geodesic distance between two closed arcs on the circle of length L."""
    lo1, hi1 = a
    lo2, hi2 = b
    len1, len2 = hi1 - lo1, hi2 - lo2
    if (lo2 - lo1) % L <= len1 or (lo1 - lo2) % L <= len2:
        return 0.0
    return min((lo2 - hi1) % L, (lo1 - hi2) % L)


def sector_pair_far(sig: Sectorization, i: int, j: int, omega: float) -> bool:
    """True when sectors i and j are omega-far both directly and from each
    other's antipodal image (arc-to-arc geodesic distances)."""
    arcs, anti, L = _arc_intervals(sig)
    return (_interval_dist(arcs[i], arcs[j], L) >= omega
            and _interval_dist(arcs[i], anti[j], L) >= omega
            and _interval_dist(arcs[j], anti[i], L) >= omega)


def omega_norm(K: SectorKernel, omega: float) -> NormReport:
    """1-norm restricted to entries where some pair of non-fixed legs is
    omega-separated in both the direct and the antipodal sense."""
    if K.legs < 3:
        raise MalformedQuery("omega norm needs at least 3 legs")
    if not K.weights:
        return NormReport(p="omega", value=0.0)
    far_cache = {}

    def far(i, j):
        key = (i, j) if i <= j else (j, i)
        v = far_cache.get(key)
        if v is None:
            v = sector_pair_far(K.sig, key[0], key[1], omega)
            far_cache[key] = v
        return v

    best = None
    for i1 in range(K.legs):
        groups = {}
        for t, w in K.weights.items():
            others = [t[i] for i in range(K.legs) if i != i1]
            if any(far(a, b) for a, b in itertools.combinations(others, 2)):
                groups[t[i1]] = groups.get(t[i1], 0.0) + w
        if not groups:
            continue
        key, val = max(groups.items(), key=lambda kv: (kv[1], -kv[0]))
        if best is None or val > best[0]:
            best = (val, (i1,), (key,))
    if best is None:
        return NormReport(p="omega", value=0.0)
    return NormReport(p="omega", value=best[0], argmax_legs=[(best[1], best[2])])


def channel_norm(K: SectorKernel) -> NormReport:
    """Fix the two left legs, sum the two right legs (4-leg kernels)."""
    if K.legs != 4:
        raise MalformedQuery("channel norm is defined for 4-leg kernels")
    if not K.weights:
        return NormReport(p="ch", value=0.0)
    groups = {}
    for t, w in K.weights.items():
        key = (t[0], t[1])
        groups[key] = groups.get(key, 0.0) + w
    key, val = max(groups.items(), key=lambda kv: (kv[1], [-x for x in kv[0]]))
    return NormReport(p="ch", value=val, argmax_legs=[((0, 1), key)])


# ----------------------------------------------------------------------
# comparisons


@dataclass
class RatioReport:
    value_a: float
    value_b: float
    ratio: float
    scaled_ratio: float
    label: str = ""


def compare_1_vs_3(K: SectorKernel, strict: bool = False) -> RatioReport:
    """(|K|_1, |K|_3, |K|_1/|K|_3 * ell) for a masked 4-leg kernel.

    The scaled ratio is the quantity expected to stay bounded across
    scales; the comparison is meaningless without a conservation mask.
    """
    if K.legs != 4:
        raise MalformedQuery("comparison is for 4-leg kernels")
    if K.mask is None:
        raise MaskRequired("1-vs-3 comparison needs a momentum-conserving mask")
    sig = K.sig
    if strict:
        lo = sig.base_M ** (-2.0 * sig.scale_j / 3.0)
        hi = sig.base_M ** (-sig.scale_j / 2.0)
        if not (lo * (1 - 1e-9) <= sig.ell <= hi * (1 + 1e-9)):
            raise MalformedQuery(
                f"strict mode: ell={sig.ell:g} outside [{lo:g}, {hi:g}]")
    n1 = p_norm(K, 1).value
    n3 = p_norm(K, 3).value
    ratio = 0.0 if n3 == 0.0 else n1 / n3
    return RatioReport(value_a=n1, value_b=n3, ratio=ratio,
                       scaled_ratio=ratio * sig.ell, label="1_vs_3")


@dataclass
class OmegaDecomposition:
    norm1: float
    norm1_omega: float
    norm3: float
    omega: float
    fitted_constant: float


def omega_decomposition_check(K: SectorKernel, omega: float) -> OmegaDecomposition:
    """Smallest C with |K|_1 <= |K|_{1,omega} + C n (omega/ell)^2 |K|_3."""
    if K.mask is None:
        raise MaskRequired("decomposition check needs a conservation mask")
    sig = K.sig
    min_omega = max(sig.ell, sig.base_M ** (-(sig.scale_j - 1) / 2.0))
    if omega < min_omega * (1 - 1e-9):
        raise MalformedQuery(
            f"omega must be at least max(ell, M^-(j-1)/2) = {min_omega:g}")
    n1 = p_norm(K, 1).value
    n1w = omega_norm(K, omega).value
    n3 = p_norm(K, 3).value
    gap = max(0.0, n1 - n1w)
    denom = K.legs * (omega / sig.ell) ** 2 * n3
    c = 0.0 if gap == 0.0 else (math.inf if denom == 0.0 else gap / denom)
    return OmegaDecomposition(norm1=n1, norm1_omega=n1w, norm3=n3,
                              omega=omega, fitted_constant=c)


def channel_vs_3_check(K: SectorKernel, n0: int,
                       certificate=None) -> RatioReport:
    """channel / (3-norm * ell^(1/n0 - 1)) for particle-particle kernels.

    Bounded across scales exactly when the curve is strongly asymmetric
    with asymmetry order n0; symmetric curves have no n0 and the check
    refuses to pretend otherwise.
    """
    if K.mask is None or not K.mask.particle_particle:
        raise MaskRequired("channel comparison needs a particle-particle mask")
    if certificate is not None and certificate.symmetric:
        raise SymmetryError(
            "channel improvement requires a strongly asymmetric curve; on "
            "symmetric curves the scaled ratio grows, run the contrast scan "
            "instead")
    ch = channel_norm(K).value
    n3 = p_norm(K, 3).value
    sig = K.sig
    factor = sig.ell ** (1.0 / n0) / sig.ell
    ratio = 0.0 if n3 == 0.0 else ch / n3
    return RatioReport(value_a=ch, value_b=n3, ratio=ratio,
                       scaled_ratio=ratio / factor, label="channel_vs_3")


# ----------------------------------------------------------------------
# resectorization


def resectorize(K: SectorKernel, target: Sectorization) -> SectorKernel:
    """Transport a kernel to a finer (or equal) sectorization by summing the
    weight of every coarse tuple into all overlapping fine tuples, then
    re-masking to the fine conservation support."""
    if not K.sig.curve.same_curve(target.curve):
        raise CurveMismatch("kernels can only move between sectorizations of "
                            "one curve")
    if target.ell > K.sig.ell * (1 + 1e-12):
        raise MalformedQuery("target sectorization must be finer or equal")
    om = overlap_map(target, K.sig)
    out = {}
    for t, w in K.weights.items():
        pools = [om[i] for i in t]
        for fine in itertools.product(*pools):
            out[fine] = out.get(fine, 0.0) + w
    if K.mask is not None and out:
        keys = list(out.keys())
        ok = mask_compatible(target, keys, K.mask.signs)
        out = {t: out[t] for t, keep in zip(keys, ok) if keep}
    return SectorKernel(legs=K.legs, sig=target, weights=out, mask=K.mask)


# ----------------------------------------------------------------------
# kernel generators


def compatible_tuples(sig: Sectorization, signs, cand_lists=None):
    """All index tuples compatible with conservation of momentum (rect)."""
    boxset = _std_boxset(sig)
    m = len(signs)
    if cand_lists is None:
        cand_lists = [np.arange(len(sig))] * m
    base = np.zeros(4)
    _, tuples, _ = _count_signed_tuples(boxset.boxes, tuple(signs), cand_lists,
                                        base, boxset.grid, emit_tuples=True)
    return tuples


def constant_masked_kernel(sig: Sectorization, mask: MomentumMask,
                           weight: float = 1.0) -> SectorKernel:
    """Weight `weight` on every mask-compatible tuple; dense scan, meant for
    small sectorizations."""
    if len(sig) ** (len(mask.signs) - 1) > PRODUCT_CAP:
        raise MalformedQuery("sectorization too large for dense kernel")
    tuples = compatible_tuples(sig, mask.signs)
    return SectorKernel(legs=len(mask.signs), sig=sig,
                        weights={t: weight for t in tuples}, mask=mask)


def star_masked_kernel(sig: Sectorization, mask: MomentumMask, center: int,
                       rng=None, lo: float = 0.5, hi: float = 1.0) -> SectorKernel:
    """All mask-compatible tuples whose first leg is ``center``, with
    weights drawn from [lo, hi).

    This shape saturates the 1-norm (fixing the first leg sums every entry)
    while keeping the 3-norm at the single-completion level, which is the
    extremal regime of the 1-vs-3 comparison.
    """
    m = len(mask.signs)
    cand = [np.array([center])] + [np.arange(len(sig))] * (m - 1)
    tuples = compatible_tuples(sig, mask.signs, cand)
    if rng is None:
        weights = {t: 1.0 for t in tuples}
    else:
        vals = rng.uniform(lo, hi, size=len(tuples))
        weights = {t: float(v) for t, v in zip(tuples, vals)}
    return SectorKernel(legs=m, sig=sig, weights=weights, mask=mask)


def star_norms(sig: Sectorization, mask: MomentumMask, center: int,
               rng=None, chunk: int = 256):
    """(1-norm, 3-norm) of the star kernel at ``center`` without
    materializing it.

    The support of a 4-leg star kernel is indexed by (s2, s3, s4) with the
    last leg resolved through the grid, so every norm group is a weighted
    bincount over the enumeration arrays; random weights in [0.5, 1) are
    drawn when an rng is given.  Equals p_norm on the materialized kernel.
    """
    if len(mask.signs) != 4:
        raise MalformedQuery("star norms are for 4-leg kernels")
    boxset = _std_boxset(sig)
    boxes = boxset.boxes
    n = len(sig)
    s2_all, s3_all, s4_all, w_all = [], [], [], []
    base = signed_box(boxes[center], mask.signs[0])
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        a = base[None, :] + np.stack(
            [signed_box(boxes[i], mask.signs[1]) for i in range(lo, hi)])
        part = (a[:, None, :] + np.stack(
            [signed_box(boxes[i], mask.signs[2]) for i in range(n)])[None, :, :]
        ).reshape(-1, 4)
        queries = part if mask.signs[3] < 0 else np.stack(
            [-part[:, 1], -part[:, 0], -part[:, 3], -part[:, 2]], axis=1)
        qi, bi = boxset.grid.query_pairs(queries)
        s2_all.append(lo + qi // n)
        s3_all.append(qi % n)
        s4_all.append(bi)
        if rng is not None:
            w_all.append(rng.uniform(0.5, 1.0, size=len(qi)))
    s2 = np.concatenate(s2_all) if s2_all else np.zeros(0, dtype=np.int64)
    s3 = np.concatenate(s3_all) if s3_all else np.zeros(0, dtype=np.int64)
    s4 = np.concatenate(s4_all) if s4_all else np.zeros(0, dtype=np.int64)
    if len(s2) == 0:
        return 0.0, 0.0
    w = np.concatenate(w_all) if w_all else np.ones(len(s2))

    def gmax(keys):
        _, inv = np.unique(keys, return_inverse=True)
        return float(np.bincount(inv, weights=w).max())

    n1 = max(float(w.sum()), gmax(s2), gmax(s3), gmax(s4))
    n3 = max(float(w.max()),            # triple (2,3,4): singleton groups
             gmax(s2 * n + s3),         # (1,2,3), leg 1 is fixed
             gmax(s2 * n + s4),         # (1,2,4)
             gmax(s3 * n + s4))         # (1,3,4)
    return n1, n3


def scatter_masked_kernel(sig: Sectorization, mask: MomentumMask,
                          entries: int, rng) -> SectorKernel:
    """Roughly ``entries`` mask-compatible tuples found by rejection."""
    m = len(mask.signs)
    boxset = _std_boxset(sig)
    n = len(sig)
    weights = {}
    attempts = 0
    while len(weights) < entries and attempts < 60:
        attempts += 1
        draw = rng.integers(0, n, size=(max(64, entries * 4), m - 1))
        total = np.zeros((len(draw), 4))
        for leg in range(m - 1):
            b = boxset.boxes[draw[:, leg]]
            total += b if mask.signs[leg] > 0 else np.stack(
                [-b[:, 1], -b[:, 0], -b[:, 3], -b[:, 2]], axis=1)
        queries = total if mask.signs[-1] < 0 else np.stack(
            [-total[:, 1], -total[:, 0], -total[:, 3], -total[:, 2]], axis=1)
        qi, bi = boxset.grid.query_pairs(queries)
        for q, b in zip(qi, bi):
            t = tuple(int(x) for x in draw[q]) + (int(b),)
            if t not in weights:
                weights[t] = float(rng.uniform(0.5, 1.0))
            if len(weights) >= entries:
                break
    return SectorKernel(legs=m, sig=sig, weights=weights, mask=mask)
