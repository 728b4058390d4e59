"""Conservation-of-momentum compatibility and sector-tuple counting.

A signed tuple of sectors is compatible with a target when momenta can be
chosen inside the extended sector regions whose signed sum lands in the
target set.  Two evaluation modes are exposed:

* rect: the sector regions and the target are replaced by tight rectangles
  in a common tangent/normal frame and the membership test becomes interval
  arithmetic (a conservative outer bound, the semantics under which all
  counting bounds are checked);
* sampled: explicit sample momenta inside the regions are summed and tested
  against an inscribed polygon of the target, an exact certificate of
  membership (an inner bound).

Frame rule for enumerations: the target's tangent/normal frame when the
target is sector-like; for point targets the frame of the curve point
nearest the target; standard axes for zero targets.  Single compatibility
queries with a point/zero target use the first free sector's frame.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import curve as _curve
from .boxes import (BoxGrid, add_boxes, contains_zero, hull_of, neg_box,
                    point_box, signed_box)
from .curve import CurveModel, project_theta
from .errors import CurveMismatch, MalformedQuery, TangencyWarning
from .sectorization import (Sector, Sectorization, region_polygon,
                            sector_boxes)

PRODUCT_CAP = 10 ** 8


# ----------------------------------------------------------------------
# targets and queries


@dataclass(frozen=True)
class Target:
    """Target set of a compatibility query."""

    kind: str                      # sector | translated_sector | point | zero
    sector: Sector | None = None
    point: np.ndarray | None = None

    @classmethod
    def of_sector(cls, sector):
        return cls("sector", sector=sector)

    @classmethod
    def translated(cls, point, sector):
        return cls("translated_sector", sector=sector,
                   point=np.asarray(point, dtype=float))

    @classmethod
    def of_point(cls, point):
        return cls("point", point=np.asarray(point, dtype=float))

    @classmethod
    def zero(cls):
        return cls("zero")

    def frame_theta(self, curve):
        if self.kind in ("sector", "translated_sector"):
            return self.sector.center_theta
        if self.kind == "point":
            return float(project_theta(curve, self.point[None, :])[0])
        return None

    def box(self, curve, frame_theta, Lambda=None, extended=True):
        from .curve import _unit, _unit_perp

        if frame_theta is None:
            axis_n = np.array([1.0, 0.0])
            axis_t = np.array([0.0, 1.0])
        else:
            axis_n = _unit(frame_theta)
            axis_t = _unit_perp(frame_theta)
        if self.kind == "zero":
            return point_box(0.0, 0.0)
        if self.kind == "point":
            return point_box(float(self.point @ axis_n),
                             float(self.point @ axis_t))
        box = sector_boxes(curve, [self.sector], frame_theta=frame_theta,
                           Lambda=Lambda, extended=extended)[0]
        if self.kind == "translated_sector":
            box = box + np.array([self.point @ axis_n, self.point @ axis_n,
                                  self.point @ axis_t, self.point @ axis_t])
        return box


@dataclass(frozen=True)
class CompatibilityQuery:
    """Signed sectors plus fixed momentum contributions against a target.

    ``fixed_momenta`` entries are pre-signed contributions (the sign is
    already folded into the vector).  ``signs`` and ``free_sectors`` must
    have equal length.
    """

    signs: tuple
    free_sectors: tuple
    target: Target
    fixed_momenta: tuple = ()
    mode: str = "rect"
    samples_per_sector: int = 9

    def __post_init__(self):
        if len(self.signs) != len(self.free_sectors):
            raise MalformedQuery("signs and free_sectors length mismatch")
        if any(s not in (-1, 1) for s in self.signs):
            raise MalformedQuery("signs must be +-1")
        if not self.free_sectors and self.target.kind != "point":
            raise MalformedQuery("empty free_sectors needs a point target")

    @property
    def balanced(self):
        """Particle-number balance: plus legs match minus legs once the
        implicit minus sign of a sector/point target is counted.  Unbalanced
        patterns are legal; this flag only reports them."""
        plus = sum(1 for s in self.signs if s > 0)
        minus = sum(1 for s in self.signs if s < 0)
        if self.target.kind != "zero":
            minus += 1
        return plus == minus


@dataclass
class MomResult:
    count: int
    mode: str
    tuples: list | None = None
    elapsed: float = 0.0
    pruned_pairs: int = 0


# ----------------------------------------------------------------------
# sampled-mode support


def _sector_samples(curve, sector, k, Lambda=None):
    """About k momenta inside the (extended) sector region, on an (s, t)
    grid; every sample is an exact region member."""
    from .curve import _unit
    from .sectorization import _shell_offsets

    lam = sector.shell_halfwidth if Lambda is None else Lambda
    ks = max(1, int(math.sqrt(k)))
    kt = max(1, k // ks)
    lo, hi = sector.arc(extended=True)
    sgrid = np.linspace(lo, hi, ks + 2)[1:-1] if ks > 1 else \
        np.array([0.5 * (lo + hi)])
    thetas = curve.theta_from_arclength(sgrid)
    pos = curve.positions(thetas)
    u = _unit(thetas)
    t_in, t_out = _shell_offsets(curve, thetas, lam)
    fr = np.linspace(0.0, 1.0, kt) if kt > 1 else np.array([0.5])
    t = t_in[:, None] + (t_out - t_in)[:, None] * fr[None, :]
    pts = pos[:, None, :] + t[..., None] * u[:, None, :]
    return pts.reshape(-1, 2)


class _SampledChecker:
    def __init__(self, curve, target, samples_per_sector, Lambda=None):
        self.curve = curve
        self.target = target
        self.k = samples_per_sector
        self.Lambda = Lambda
        self._path = None
        if target.kind in ("sector", "translated_sector"):
            poly = region_polygon(curve, target.sector, m=24, Lambda=Lambda)
            if target.kind == "translated_sector":
                poly = poly + target.point
            from matplotlib.path import Path
            self._path = Path(poly)

    def check(self, sectors, signs, fixed=()):
        total = np.zeros((1, 2))
        for v in fixed:
            total = total + np.asarray(v, dtype=float)
        for sec, sg in zip(sectors, signs):
            pts = sg * _sector_samples(self.curve, sec, self.k, self.Lambda)
            total = (total[:, None, :] + pts[None, :, :]).reshape(-1, 2)
        if self.target.kind == "zero":
            target_pt = np.zeros(2)
        elif self.target.kind == "point":
            target_pt = self.target.point
        else:
            return bool(self._path.contains_points(total).any())
        return bool((np.abs(total - target_pt).max(axis=1) <= 1e-12).any())


# ----------------------------------------------------------------------
# the rect-mode predicate


def compatible(query: CompatibilityQuery, curve: CurveModel,
               Lambda: float | None = None) -> bool:
    """Decide a single compatibility query.

    rect mode: 0 must lie in the interval sum of the signed sector
    rectangles plus fixed contributions minus the target rectangle, all in
    one common frame (the target's when sector-like, otherwise the first
    free sector's).  sampled mode: some combination of region samples must
    land inside the target polygon.
    """
    if query.mode == "sampled":
        checker = _SampledChecker(curve, query.target,
                                  query.samples_per_sector, Lambda)
        return checker.check(query.free_sectors, query.signs,
                             query.fixed_momenta)

    if query.target.kind in ("sector", "translated_sector"):
        frame = query.target.sector.center_theta
    elif query.free_sectors:
        frame = query.free_sectors[0].center_theta
    else:
        frame = None
    from .curve import _unit, _unit_perp
    axis_n = _unit(frame) if frame is not None else np.array([1.0, 0.0])
    axis_t = _unit_perp(frame) if frame is not None else np.array([0.0, 1.0])

    total = neg_box(query.target.box(curve, frame, Lambda=Lambda))
    for v in query.fixed_momenta:
        v = np.asarray(v, dtype=float)
        total = add_boxes(total, point_box(float(v @ axis_n), float(v @ axis_t)))
    if query.free_sectors:
        boxes = sector_boxes(curve, query.free_sectors, frame_theta=frame,
                             Lambda=Lambda, extended=True)
        for box, sg in zip(boxes, query.signs):
            total = add_boxes(total, signed_box(box, sg))
    return bool(contains_zero(total))


# ----------------------------------------------------------------------
# enumeration core


def _count_signed_tuples(boxes, signs, cand_lists, base_box, grid,
                         emit_tuples=False, chunk=512, sampled_filter=None):
    """Count tuples over the candidate lists with 0 in base + sum signed
    boxes.  The last leg is resolved through the grid index; earlier legs
    are expanded as a pruned product."""
    m = len(signs)
    if m == 0:
        ok = bool(contains_zero(base_box))
        return (1 if ok else 0), ([()] if ok and emit_tuples else
                                  ([] if emit_tuples else None)), 0

    cand = [np.asarray(c, dtype=np.int64) for c in cand_lists]
    if any(len(c) == 0 for c in cand):
        return 0, ([] if emit_tuples else None), 0

    prod = 1
    for c in cand[:-1]:
        prod *= len(c)
    if prod > PRODUCT_CAP:
        raise MalformedQuery(
            f"enumeration product {prod} exceeds cap; window the legs")

    signed = [np.stack([signed_box(boxes[i], sg) for i in c])
              for sg, c in zip(signs, cand)]
    hulls = [hull_of(s) for s in signed]
    suffix = [None] * m
    acc = None
    for j in range(m - 1, -1, -1):
        suffix[j] = acc
        acc = hulls[j] if acc is None else add_boxes(acc, hulls[j])

    last_mask = np.zeros(len(boxes), dtype=bool)
    last_mask[cand[-1]] = True
    need_tuples = emit_tuples or sampled_filter is not None

    total = 0
    pruned = 0
    tuples = [] if need_tuples else None
    nfirst = len(cand[0])
    for c0 in range(0, nfirst, chunk):
        sel = slice(c0, min(c0 + chunk, nfirst))
        part = base_box[None, :] + signed[0][sel]
        idxs = [cand[0][sel]]
        # prune against the reach of the remaining legs
        if m > 1:
            reach = add_boxes(part, suffix[0][None, :])
            keep = contains_zero(reach)
            pruned += int((~keep).sum())
            part = part[keep]
            idxs = [idxs[0][keep]]
        for j in range(1, m - 1):
            p = len(part)
            cj = len(cand[j])
            part = (part[:, None, :] + signed[j][None, :, :]).reshape(-1, 4)
            idxs = [np.repeat(ix, cj) for ix in idxs]
            idxs.append(np.tile(cand[j], p))
            reach = add_boxes(part, suffix[j][None, :])
            keep = contains_zero(reach)
            pruned += int((~keep).sum())
            part = part[keep]
            idxs = [ix[keep] for ix in idxs]
        if len(part) == 0:
            continue
        queries = neg_box(part) if signs[-1] > 0 else part
        if need_tuples:
            qi, bi = grid.query_pairs(queries, mask=last_mask)
            total += len(qi)
            for q, b in zip(qi, bi):
                tuples.append(tuple(int(ix[q]) for ix in idxs) + (int(b),))
        else:
            total += int(grid.query_counts(queries, mask=last_mask).sum())

    if sampled_filter is not None:
        kept = [t for t in tuples if sampled_filter(t)]
        total = len(kept)
        tuples = kept if emit_tuples else None
    if tuples is not None:
        tuples.sort()
    return total, tuples, pruned


class SectorBoxSet:
    """Cached rectangles of all sectors of a sectorization in one frame."""

    def __init__(self, sig: Sectorization, frame_theta=None, Lambda=None,
                 extended=True):
        self.sig = sig
        self.frame_theta = frame_theta
        self.Lambda = Lambda if Lambda is not None else sig.Lambda
        self.boxes = sector_boxes(sig.curve, sig.sectors,
                                  frame_theta=frame_theta,
                                  Lambda=Lambda, extended=extended)
        self.grid = BoxGrid(self.boxes)


def _window_members(sig, window):
    """Sector indices whose centers lie in an arclength interval (lo, hi)."""
    lo, hi = window
    L = sig.curve.total_length
    s = sig.centers_s
    rel = (s - lo) % L
    return np.nonzero(rel <= (hi - lo) + 1e-12)[0]


# ----------------------------------------------------------------------
# public counting operations


def mom_count(sig: Sectorization, legs: int, target: Target,
              mode: str = "rect", windows=None, emit_tuples: bool = False,
              samples_per_sector: int = 9) -> MomResult:
    """Count tuples of sector centers compatible with the target.

    ``legs`` is the odd tuple length (3, 5 or 7); the sign pattern is the
    paper's: the first (legs+1)/2 legs enter with +, the rest with -.
    ``windows`` optionally restricts each leg to an arclength interval
    (one (lo, hi) pair per leg).  Enumeration expands all legs but the last
    and resolves the last through a spatial hash over sector rectangles, so
    the result equals the dense enumeration with the same predicate.
    """
    if legs % 2 == 0 or legs < 3:
        raise MalformedQuery("tuple length must be odd and at least 3")
    if legs not in (3, 5, 7):
        raise MalformedQuery("supported tuple lengths: 3, 5, 7")
    if windows is not None and len(windows) != legs:
        raise MalformedQuery("one window per leg required")

    t0 = time.perf_counter()
    nplus = (legs + 1) // 2
    signs = (1,) * nplus + (-1,) * (legs - nplus)
    frame = target.frame_theta(sig.curve)
    boxset = SectorBoxSet(sig, frame_theta=frame)
    base = neg_box(target.box(sig.curve, frame))
    if windows is None:
        cand = [np.arange(len(sig))] * legs
    else:
        cand = [_window_members(sig, w) for w in windows]

    sampled_filter = None
    if mode == "sampled":
        checker = _SampledChecker(sig.curve, target, samples_per_sector)

        def sampled_filter(t):
            return checker.check([sig[i] for i in t], signs)

    count, tuples, pruned = _count_signed_tuples(
        boxset.boxes, signs, cand, base, boxset.grid,
        emit_tuples=emit_tuples, sampled_filter=sampled_filter)
    return MomResult(count=count, mode=mode, tuples=tuples,
                     elapsed=time.perf_counter() - t0, pruned_pairs=pruned)


def cons_enumerate(sig: Sectorization, free, fixed_momenta=(),
                   fixed_sectors=(), coarse: Sectorization | None = None):
    """Completions of a partially fixed configuration by sectors of ``sig``.

    ``free`` is a list of (sign, window) with window a Sector of the coarser
    sectorization or None; a windowed leg ranges over the sectors of ``sig``
    whose extended arc meets the window's extended arc.  ``fixed_momenta``
    is a list of (point, sign); ``fixed_sectors`` a list of (Sector, sign)
    with sectors of ``sig``.  Returns the list of index tuples assigning
    sectors to the free legs, rect-mode compatible with total sum zero.
    """
    if coarse is not None and not sig.curve.same_curve(coarse.curve):
        raise CurveMismatch("window sectorization lives on a different curve")

    if fixed_sectors:
        frame = fixed_sectors[0][0].center_theta
    elif free:
        frame = None
    else:
        frame = None
    from .curve import _unit, _unit_perp
    axis_n = _unit(frame) if frame is not None else np.array([1.0, 0.0])
    axis_t = _unit_perp(frame) if frame is not None else np.array([0.0, 1.0])

    base = point_box(0.0, 0.0)
    for v, sg in fixed_momenta:
        v = sg * np.asarray(v, dtype=float)
        base = add_boxes(base, point_box(float(v @ axis_n), float(v @ axis_t)))
    for sec, sg in fixed_sectors:
        box = sector_boxes(sig.curve, [sec], frame_theta=frame)[0]
        base = add_boxes(base, signed_box(box, sg))

    if not free:
        return [()] if contains_zero(base) else []

    from .sectorization import _positive_overlap

    boxset = SectorBoxSet(sig, frame_theta=frame)
    L = sig.curve.total_length
    cand = []
    for sg, window in free:
        if window is None:
            cand.append(np.arange(len(sig)))
        else:
            lo, hi = window.arc(extended=True)
            members = []
            for i in range(len(sig)):
                flo, fhi = sig[i].arc(extended=True)
                if _positive_overlap(flo, fhi, lo, hi, L, 1e-9 * sig.ell):
                    members.append(i)
            cand.append(np.array(members, dtype=np.int64))
    signs = tuple(sg for sg, _ in free)
    _, tuples, _ = _count_signed_tuples(
        boxset.boxes, signs, cand, base, boxset.grid, emit_tuples=True)
    return tuples


def _self_boxes(sig: Sectorization):
    cached = getattr(sig, "_self_boxes_cache", None)
    if cached is None:
        from .sectorization import sector_self_boxes
        cached = sector_self_boxes(sig.curve, sig.sectors)
        sig._self_boxes_cache = cached
    return cached


def pair_sum_count(sig: Sectorization, target_kind: str, *args) -> int:
    """Ordered pairs (s1, s2) whose extended-region sum meets the target.

    target kinds: ``sector_pair(s1', s2')``, ``momentum_plus_sector(k1, s1')``
    and ``momentum_pair(k1, k2)``.  Each pair is tested in the frame of its
    first leg: every other rectangle is projected onto that frame, the
    conservative outer test the proofs use.  Per-leg frames keep the shell
    width out of the tangential overlap budget, so the pure sector-length
    scaling of the count is visible.
    """
    from .sectorization import sector_self_boxes

    curve = sig.curve
    shift = np.zeros(2)
    tparts = []
    if target_kind == "sector_pair":
        s1p, s2p = args
        tparts = list(zip(*sector_self_boxes(curve, [s1p, s2p])))
    elif target_kind == "momentum_plus_sector":
        k1, s1p = args
        shift = np.asarray(k1, dtype=float)
        tparts = list(zip(*sector_self_boxes(curve, [s1p])))
    elif target_kind == "momentum_pair":
        k1, k2 = args
        shift = np.asarray(k1, dtype=float) + np.asarray(k2, dtype=float)
    else:
        raise MalformedQuery(f"unknown pair target {target_kind!r}")

    thetas, centers, hn, ht = _self_boxes(sig)
    n = len(sig)
    t_center = shift + sum((np.asarray(p[1]) for p in tparts), np.zeros(2))

    count = 0
    for i in range(n):
        th = thetas[i]
        u = np.array([math.cos(th), math.sin(th)])
        up = np.array([-math.sin(th), math.cos(th)])
        rel = centers[i] + centers - t_center
        dn = rel @ u
        dt = rel @ up
        cos_j = np.abs(np.cos(thetas - th))
        sin_j = np.abs(np.sin(thetas - th))
        wn = hn[i] + hn * cos_j + ht * sin_j
        wt = ht[i] + ht * cos_j + hn * sin_j
        for tth, _, thn, tht in tparts:
            c = abs(math.cos(tth - th))
            s = abs(math.sin(tth - th))
            wn = wn + thn * c + tht * s
            wt = wt + tht * c + thn * s
        count += int(((np.abs(dn) <= wn) & (np.abs(dt) <= wt)).sum())
    return count


def mom_brute_force(sig: Sectorization, legs: int, target: Target,
                    windows=None) -> int:
    """Dense reference enumeration with the same rectangles and frame."""
    nplus = (legs + 1) // 2
    signs = (1,) * nplus + (-1,) * (legs - nplus)
    frame = target.frame_theta(sig.curve)
    boxes = sector_boxes(sig.curve, sig.sectors, frame_theta=frame)
    base = neg_box(target.box(sig.curve, frame))
    if windows is None:
        cand = [np.arange(len(sig))] * legs
    else:
        cand = [_window_members(sig, w) for w in windows]
    total = base[None, :]
    for sg, c in zip(signs, cand):
        sb = np.stack([signed_box(boxes[i], sg) for i in c])
        total = (total[:, None, :] + sb[None, :, :]).reshape(-1, 4)
    return int(contains_zero(total).sum())


# ----------------------------------------------------------------------
# secant counting


def _support_hhr(curve, theta):
    """h, h' and rho = h + h'' with a single trigonometric table."""
    mt = np.multiply.outer(theta, curve._m)
    cmt = np.cos(mt)
    smt = np.sin(mt)
    h = cmt @ curve._a + smt @ curve._b
    h1 = -smt @ (curve._m * curve._a) + cmt @ (curve._m * curve._b)
    w = 1.0 - curve._m ** 2
    rho = cmt @ (w * curve._a) + smt @ (w * curve._b)
    return h, h1, rho


def _shell_coord(curve, q):
    """Fast signed shell coordinate for batches of query momenta.

    Dispersion curves evaluate their expression directly.  For support
    curves the signed distance of a convex curve equals the largest signed
    gap to a tangent line, max_theta (q . u(theta) - h(theta)), located by
    Newton from the polar-angle seed; exact at the zero level set, which is
    all secant counting needs.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if curve.kind == "dispersion_level_set":
        return curve.dispersion_value(q)
    theta = np.arctan2(q[:, 1], q[:, 0])
    for _ in range(4):
        ct, st = np.cos(theta), np.sin(theta)
        h, h1, rho = _support_hhr(curve, theta)
        qu = q[:, 0] * ct + q[:, 1] * st
        qup = -q[:, 0] * st + q[:, 1] * ct
        num = qup - h1
        den = -qu - (rho - h)
        den = np.where(np.abs(den) < 1e-9, -1.0, den)
        theta = theta - np.minimum(np.maximum(num / den, -0.5), 0.5)
    ct, st = np.cos(theta), np.sin(theta)
    h, _, _ = _support_hhr(curve, theta)
    return q[:, 0] * ct + q[:, 1] * st - h


def secant_count(curve: CurveModel, p, signs=(1, -1), scan: int = 10 ** 4,
                 dedupe_tol: float = 1e-6) -> int:
    """Number of secants (chords) (k1, k2) of the curve with
    signs[0]*k1 + signs[1]*k2 = p.

    The first angle is scanned over the curve; the partner momentum is
    solved for and tested against the shell coordinate, with sign-change
    bisection refinement.  For the sum case (equal signs) the solution set
    is swap-symmetric, and swapped pairs describe the same chord, so they
    are deduplicated; the difference case produces each chord once.

    Raises TangencyWarning on the measure-zero exceptional set: grazing
    (non-crossing) solutions or a continuum of solutions.  The warning
    carries bracketing counts (without/with the degenerate solutions).
    """
    if scan < 10 ** 4:
        raise ValueError("scan must be at least 10^4")
    e1, e2 = signs
    if e1 not in (-1, 1) or e2 not in (-1, 1):
        raise MalformedQuery("signs must be +-1")
    p = np.asarray(p, dtype=float)
    if e1 != e2 and np.allclose(p, 0.0):
        raise MalformedQuery("difference case needs p != 0")

    key = ("secant_grid", scan)
    cached = curve._cache.get(key)
    if cached is None:
        thetas = 2 * math.pi * np.arange(scan) / scan
        cached = (thetas, curve.positions(thetas))
        curve._cache[key] = cached
    thetas, k1 = cached
    g = _shell_coord(curve, e2 * (p[None, :] - e1 * k1))
    scale = max(1.0, float(np.abs(g).max()))

    near_zero = np.abs(g) < 1e-9 * scale
    if near_zero.mean() > 0.05:
        raise TangencyWarning("continuum of solutions", count_low=0,
                              count_high=scan)

    step = 2 * math.pi / scan
    gj = np.roll(g, -1)
    crossing = (g != 0.0) & (g * gj < 0)
    exact = g == 0.0
    gh = np.roll(g, 1)
    same_sign = ((gh > 0) == (g > 0)) & ((g > 0) == (gj > 0))
    graze = (~crossing) & (~exact) & same_sign & \
        (np.abs(g) <= np.abs(gh)) & (np.abs(g) < np.abs(gj)) & \
        (np.abs(g) < 1e-3 * scale)
    grazers = int(graze.sum())

    lo = thetas[crossing]
    hi = lo + step
    flo = g[crossing]
    kwarm = k1[crossing]
    if lo.size:
        for _ in range(20):
            mid = 0.5 * (lo + hi)
            kwarm = curve.positions_warm(mid, kwarm, iters=3)
            fm = _shell_coord(curve, e2 * (p[None, :] - e1 * kwarm))
            left = flo * fm <= 0
            hi = np.where(left, mid, hi)
            lo = np.where(left, lo, mid)
            flo = np.where(left, flo, fm)
    roots = np.concatenate([0.5 * (lo + hi), thetas[exact]])

    # dedupe roots that refined to the same angle
    roots = np.sort(roots % (2 * math.pi))
    merged = []
    for r in roots:
        if not merged or r - merged[-1] > dedupe_tol:
            merged.append(float(r))
    if len(merged) >= 2 and merged[-1] - merged[0] > 2 * math.pi - dedupe_tol:
        merged.pop()
    roots = merged

    if e1 == e2 and roots:
        # swap symmetry: identify (k1, k2) with (k2, k1)
        ka = curve.positions(np.array(roots))
        kb = e2 * (p[None, :] - e1 * ka)
        thb = project_theta(curve, kb) % (2 * math.pi)
        used = [False] * len(roots)
        count = 0
        for a in range(len(roots)):
            if used[a]:
                continue
            used[a] = True
            for b in range(a + 1, len(roots)):
                if not used[b] and abs(roots[b] - thb[a]) < 1e-4:
                    used[b] = True
                    break
            count += 1
    else:
        count = len(roots)

    if grazers:
        raise TangencyWarning("grazing solutions detected",
                              count_low=count, count_high=count + grazers)
    return count


# ----------------------------------------------------------------------
# localization check


@dataclass
class LocalizationReport:
    violations: list = field(default_factory=list)
    hypothesis_failed: list = field(default_factory=list)
    checked: int = 0


def localization_check(result: MomResult, sig: Sectorization, p_ref,
                       omega: float, C: float = 20.0) -> LocalizationReport:
    """Check the localization property of compatible tuples.

    For every tuple whose legs all lie within Euclidean distance omega of
    the first leg's center or of its antipode, the target point must lie
    within C * n * omega of that center or its antipode (n the number of
    plus legs).  Tuples failing the clustering hypothesis are reported
    separately, not counted as violations.
    """
    if result.tuples is None:
        raise MalformedQuery("localization check needs retained tuples")
    curve = sig.curve
    if hasattr(p_ref, "position"):
        p = np.asarray(p_ref.position, dtype=float)
    else:
        p = np.asarray(curve.positions(np.array(float(p_ref))), dtype=float)
    report = LocalizationReport()
    centers = sig.center_points
    anti = curve.positions(sig.centers_theta + math.pi)
    for t in result.tuples:
        n = (len(t) + 1) // 2
        k = centers[t[0]]
        ak = anti[t[0]]
        legs = centers[list(t)]
        d = np.minimum(np.linalg.norm(legs - k, axis=1),
                       np.linalg.norm(legs - ak, axis=1))
        if d.max() > omega:
            report.hypothesis_failed.append(t)
            continue
        report.checked += 1
        if min(np.linalg.norm(p - k), np.linalg.norm(p - ak)) > C * n * omega:
            report.violations.append(t)
    return report
