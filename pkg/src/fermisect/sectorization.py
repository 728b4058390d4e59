"""Sectorizations: uniform covers of a momentum shell around the curve.

A sector of length ``l`` and shell width ``Lambda`` around a curve point is
the set of momenta whose shell coordinate (signed distance for support
curves, dispersion value for level-set curves) is at most ``Lambda`` in
magnitude and whose curve projection lies within ``l/2`` of the point along
the curve.  Sectors are bookkept as arclength intervals; the extended sector
enlarges the arc by a small margin on both sides.

Arc intervals are treated as subsets of the circle of circumference L (the
total curve length); two arcs overlap only when their intersection has
positive length, so that zero-extension nested grids compose exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curve import CurveModel, _unit, _unit_perp
from .errors import CurveMismatch, NumericError, TooCoarse, TooFine

# Default extended-sector margin, as a fraction of the sector length.  Kept
# small enough that extended-arc overlap between sectorizations of length
# ratio up to 16 stays within ceil(ratio) + 2 lists, while preserving the
# "at most three neighbours" property at equal scales.
EXTENSION_FRAC = 1.0 / 32.0

SECTOR_CAP = 1 << 20


@dataclass(frozen=True)
class Sector:
    """One sector: an arc interval plus the shell halfwidth."""

    index: int
    s_lo: float
    s_hi: float
    center_s: float
    center_theta: float
    center_point: np.ndarray
    extension: float
    shell_halfwidth: float

    @property
    def arc_halfwidth(self):
        return 0.5 * (self.s_hi - self.s_lo)

    @property
    def length(self):
        return self.s_hi - self.s_lo

    def arc(self, extended=True):
        e = self.extension if extended else 0.0
        return (self.s_lo - e, self.s_hi + e)


@dataclass(frozen=True)
class RectEnclosure:
    """Rectangle in a tangent/normal frame that contains a sector region."""

    center: np.ndarray
    axis_n: np.ndarray
    axis_t: np.ndarray
    halfwidth_n: float
    halfwidth_t: float
    in_window: bool | None = None


class Sectorization:
    """Uniform partition of the curve into N equal arcs with a shell width."""

    def __init__(self, curve, scale_j, base_M, ell, Lambda, extension, sectors):
        self.curve = curve
        self.scale_j = scale_j
        self.base_M = base_M
        self.ell = ell
        self.Lambda = Lambda
        self.extension = extension
        self.sectors = sectors
        self.length = curve.total_length

    def __len__(self):
        return len(self.sectors)

    def __iter__(self):
        return iter(self.sectors)

    def __getitem__(self, i):
        return self.sectors[i]

    @property
    def centers_s(self):
        return np.array([s.center_s for s in self.sectors])

    @property
    def centers_theta(self):
        return np.array([s.center_theta for s in self.sectors])

    @property
    def center_points(self):
        return np.array([s.center_point for s in self.sectors])

    def sector_containing(self, theta):
        """Index of the sector whose base arc contains the given angle."""
        s = float(self.curve.arclength(np.array(float(theta) % (2 * math.pi))))
        return min(int(s / self.ell), len(self.sectors) - 1)

    def to_dict(self):
        return {
            "curve": self.curve.to_dict(),
            "j": self.scale_j,
            "M": self.base_M,
            "ell": self.ell,
            "Lambda": self.Lambda,
            "extension": self.extension,
            "n_sectors": len(self.sectors),
            "sectors": [
                {"index": s.index, "arc": [s.s_lo, s.s_hi],
                 "center_s": s.center_s, "center_theta": s.center_theta,
                 "center": [float(s.center_point[0]), float(s.center_point[1])]}
                for s in self.sectors
            ],
        }

    @classmethod
    def from_dict(cls, data):
        curve = CurveModel.from_dict(data["curve"])
        return build(curve, M=data["M"], j=data["j"], ell=data["ell"],
                     Lambda=data["Lambda"],
                     extension_frac=data["extension"] / data["ell"])


def build(curve: CurveModel, M: float, j: int, ell: float | None = None,
          aleph: float | None = None, Lambda: float | None = None,
          extension_frac: float = EXTENSION_FRAC, cap: int = SECTOR_CAP,
          strict: bool = False) -> Sectorization:
    """Build the uniform sectorization at scale j.

    The requested length comes either from ``ell`` directly or from the
    ladder rule ``ell = M**(-aleph*j)``; it is rounded down to L/N with
    N = ceil(L/ell) so the arcs tile the curve exactly.  The default shell
    width is sqrt(2)/M^(j-1).
    """
    if M <= 1:
        raise ValueError("M must exceed 1")
    if j < 2:
        raise ValueError("scale j must be at least 2")
    if (ell is None) == (aleph is None):
        raise ValueError("give exactly one of ell, aleph")
    if aleph is not None:
        # the upper endpoint is admissible; allow decimal roundings of 2/3
        if not (0.5 < aleph <= 2.0 / 3.0 + 1e-3):
            raise ValueError("aleph must lie in (1/2, 2/3]")
        ell = float(M) ** (-aleph * j)

    L = curve.total_length
    if ell > L / 4 * (1 + 1e-12):
        raise TooCoarse(f"sector length {ell:g} is too coarse for curve "
                        f"length {L:g}")
    n = math.ceil(L / ell)
    if n > cap:
        raise TooFine(f"{n} sectors exceed the cap {cap}")
    ell_actual = L / n
    if strict:
        lo = M ** -(j - 1.5)
        hi = M ** -((j - 1) / 2.0)
        if not (lo <= ell_actual <= hi):
            raise ValueError(
                f"strict mode: ell={ell_actual:g} outside [{lo:g}, {hi:g}]")
    if Lambda is None:
        Lambda = math.sqrt(2.0) / M ** (j - 1)
    extension = extension_frac * ell_actual

    s_centers = (np.arange(n) + 0.5) * ell_actual
    thetas = curve.theta_from_arclength(s_centers)
    points = curve.positions(thetas)
    sectors = [
        Sector(index=i, s_lo=i * ell_actual, s_hi=(i + 1) * ell_actual,
               center_s=float(s_centers[i]), center_theta=float(thetas[i]),
               center_point=points[i], extension=extension,
               shell_halfwidth=float(Lambda))
        for i in range(n)
    ]
    return Sectorization(curve, j, float(M), ell_actual, float(Lambda),
                         extension, sectors)


def sector_at(curve: CurveModel, theta: float, ell: float, Lambda: float,
              extension_frac: float = EXTENSION_FRAC, index: int = -1) -> Sector:
    """Ad-hoc sector of length ell centered at the curve point with normal
    angle theta; used for targets s_{Lambda,l}(p) at arbitrary p."""
    s_c = float(curve.arclength(np.array(float(theta))))
    return Sector(index=index, s_lo=s_c - ell / 2, s_hi=s_c + ell / 2,
                  center_s=s_c, center_theta=float(theta),
                  center_point=np.asarray(curve.positions(np.array(float(theta)))),
                  extension=extension_frac * ell, shell_halfwidth=float(Lambda))


# ----------------------------------------------------------------------
# sector regions


def _shell_offsets(curve, thetas, Lambda):
    """Signed normal offsets (t_in, t_out) of the shell |e| <= Lambda.

    For support curves the shell coordinate is the geometric distance, so
    the offsets are exactly -Lambda and +Lambda.  For dispersion curves the
    offsets solve e(k + t u) = +-Lambda along the outward normal.
    """
    flat = np.asarray(thetas, dtype=float).ravel()
    if curve.kind == "support_fourier":
        t_in = np.full(flat.shape, -Lambda)
        t_out = np.full(flat.shape, Lambda)
        return t_in.reshape(np.shape(thetas)), t_out.reshape(np.shape(thetas))
    base = curve.positions(flat)
    u = _unit(flat)
    outs = []
    for target in (-Lambda, Lambda):
        gn = np.einsum("ij,ij->i", curve.dispersion_grad(base), u)
        t = np.full(flat.shape, target) / gn
        for _ in range(30):
            pts = base + t[:, None] * u
            val = curve.dispersion_value(pts) - target
            if np.abs(val).max() < 1e-13 * max(1.0, abs(Lambda)):
                break
            der = np.einsum("ij,ij->i", curve.dispersion_grad(pts), u)
            t = t - val / der
        else:
            raise NumericError("shell offset solve did not converge")
        outs.append(t.reshape(np.shape(thetas)))
    return outs[0], outs[1]


def sector_boxes(curve, sectors, frame_theta=None, Lambda=None, extended=True,
                 samples=17):
    """Tight bounding boxes of sector regions in a common frame.

    Returns an (N, 4) array of (n_lo, n_hi, t_lo, t_hi) coordinates along
    the frame axes (normal and tangent at ``frame_theta``; the standard
    axes when ``frame_theta`` is None).  The extrema are taken over a
    boundary discretization and padded by a chord-sagitta bound, so the box
    provably contains the region.
    """
    sectors = list(sectors)
    if not sectors:
        return np.zeros((0, 4))
    if frame_theta is None:
        axis_n = np.array([1.0, 0.0])
        axis_t = np.array([0.0, 1.0])
    else:
        axis_n = _unit(float(frame_theta))
        axis_t = _unit_perp(float(frame_theta))

    arcs = np.array([s.arc(extended) for s in sectors])       # (N, 2)
    lam = np.array([s.shell_halfwidth if Lambda is None else Lambda
                    for s in sectors])
    frac = np.linspace(0.0, 1.0, samples)
    sgrid = arcs[:, 0:1] + (arcs[:, 1:2] - arcs[:, 0:1]) * frac[None, :]
    thetas = curve.theta_from_arclength(sgrid)
    pos = curve.positions(thetas)                             # (N, m, 2)
    u = _unit(thetas)
    if curve.kind == "support_fourier":
        t_in = -lam[:, None]
        t_out = lam[:, None]
    else:
        t_in, t_out = _shell_offsets(curve, thetas, float(lam[0]))
        if not np.allclose(lam, lam[0]):
            raise ValueError("mixed shell widths need uniform Lambda")
    inner = pos + t_in[..., None] * u
    outer = pos + t_out[..., None] * u
    cloud = np.concatenate([inner, outer], axis=1)            # (N, 2m, 2)

    cn = cloud @ axis_n
    ct = cloud @ axis_t
    ds = (arcs[:, 1] - arcs[:, 0]) / (samples - 1)
    pad = ds ** 2 / (8.0 * curve.convexity_margin) * 1.5 + 1e-14
    return np.stack([cn.min(axis=1) - pad, cn.max(axis=1) + pad,
                     ct.min(axis=1) - pad, ct.max(axis=1) + pad], axis=1)


def sector_self_boxes(curve, sectors, Lambda=None, extended=True, samples=17):
    """Tight rectangles of sector regions, each in its own center frame.

    Returns (thetas, centers, halfwidth_n, halfwidth_t): the box of sector i
    is centered at ``centers[i]`` with axes (normal, tangent) at
    ``thetas[i]``.  Projecting these rectangles onto any other frame gives a
    conservative enclosure that stays tight for small relative tilts, which
    is what per-leg frame evaluation of pair sums needs.
    """
    sectors = list(sectors)
    if not sectors:
        return (np.zeros(0), np.zeros((0, 2)), np.zeros(0), np.zeros(0))
    arcs = np.array([s.arc(extended) for s in sectors])
    lam = np.array([s.shell_halfwidth if Lambda is None else Lambda
                    for s in sectors])
    thetas_c = np.array([s.center_theta for s in sectors])
    axis_n = _unit(thetas_c)
    axis_t = _unit_perp(thetas_c)

    frac = np.linspace(0.0, 1.0, samples)
    sgrid = arcs[:, 0:1] + (arcs[:, 1:2] - arcs[:, 0:1]) * frac[None, :]
    thetas = curve.theta_from_arclength(sgrid)
    pos = curve.positions(thetas)
    u = _unit(thetas)
    if curve.kind == "support_fourier":
        t_in = -lam[:, None]
        t_out = lam[:, None]
    else:
        t_in, t_out = _shell_offsets(curve, thetas, float(lam[0]))
        if not np.allclose(lam, lam[0]):
            raise ValueError("mixed shell widths need uniform Lambda")
    inner = pos + t_in[..., None] * u
    outer = pos + t_out[..., None] * u
    cloud = np.concatenate([inner, outer], axis=1)

    cn = np.einsum("nmj,nj->nm", cloud, axis_n)
    ct = np.einsum("nmj,nj->nm", cloud, axis_t)
    ds = (arcs[:, 1] - arcs[:, 0]) / (samples - 1)
    pad = ds ** 2 / (8.0 * curve.convexity_margin) * 1.5 + 1e-14
    n_lo, n_hi = cn.min(axis=1) - pad, cn.max(axis=1) + pad
    t_lo, t_hi = ct.min(axis=1) - pad, ct.max(axis=1) + pad
    centers = (0.5 * (n_lo + n_hi))[:, None] * axis_n \
        + (0.5 * (t_lo + t_hi))[:, None] * axis_t
    return (thetas_c, centers, 0.5 * (n_hi - n_lo), 0.5 * (t_hi - t_lo))


def region_rectangle(curve, sector: Sector, ref_theta: float,
                     omega: float | None = None, extended: bool = False,
                     Lambda: float | None = None, samples: int = 33) -> RectEnclosure:
    """Tight rectangle around the sector region, axes aligned with the
    tangent/normal frame at ``ref_theta``.

    When ``omega`` is given, the enclosure also reports whether the sector
    center lies within Euclidean distance omega of the reference point or of
    its antipode (the hypothesis under which the paper-style rectangle
    bounds apply); this is informational only.
    """
    box = sector_boxes(curve, [sector], frame_theta=ref_theta, Lambda=Lambda,
                       extended=extended, samples=samples)[0]
    axis_n = _unit(float(ref_theta))
    axis_t = _unit_perp(float(ref_theta))
    cn = 0.5 * (box[0] + box[1])
    ct = 0.5 * (box[2] + box[3])
    in_window = None
    if omega is not None:
        ref = np.asarray(curve.positions(np.array(float(ref_theta))))
        anti = np.asarray(curve.positions(np.array(float(ref_theta) + math.pi)))
        c = sector.center_point
        in_window = bool(min(np.linalg.norm(c - ref), np.linalg.norm(c - anti))
                         <= omega)
    return RectEnclosure(center=cn * axis_n + ct * axis_t,
                         axis_n=axis_n, axis_t=axis_t,
                         halfwidth_n=0.5 * (box[1] - box[0]),
                         halfwidth_t=0.5 * (box[3] - box[2]),
                         in_window=in_window)


def region_polygon(curve, sector: Sector, m: int = 16, extended: bool = True,
                   Lambda: float | None = None) -> np.ndarray:
    """Inscribed polygon of the sector region with 2m vertices.

    The vertices trace the inner shell boundary then the outer one.  Inner
    vertices are pushed outward by a chord-sagitta bound so every polygon
    point lies inside the exact region; outer chords are automatically on
    the inside of the convex outer boundary.
    """
    if m < 8:
        raise ValueError("need at least 8 vertices per boundary")
    lam = sector.shell_halfwidth if Lambda is None else Lambda
    lo, hi = sector.arc(extended)
    sgrid = np.linspace(lo, hi, m)
    thetas = curve.theta_from_arclength(sgrid)
    pos = curve.positions(thetas)
    u = _unit(thetas)
    t_in, t_out = _shell_offsets(curve, thetas, lam)
    ds = (hi - lo) / (m - 1)
    rho_min = curve.convexity_margin
    sag = ds ** 2 / (8.0 * max(rho_min - lam, 0.5 * rho_min)) * 1.2
    inner = pos + (t_in + sag)[..., None] * u
    outer = pos + t_out[..., None] * u
    if lam <= sag:
        # shell thinner than the sagitta pad: degenerate to the mid line
        mid_in, mid_out = 0.5 * (t_in + t_out), 0.5 * (t_in + t_out)
        inner = pos + mid_in[..., None] * u
        outer = pos + mid_out[..., None] * u
    return np.concatenate([inner, outer[::-1]], axis=0)


def region_contains(curve, sector: Sector, pts, extended: bool = True,
                    Lambda: float | None = None):
    """Exact membership test for the sector region (vectorized)."""
    from .curve import project_theta, signed_distance

    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    lam = sector.shell_halfwidth if Lambda is None else Lambda
    e = signed_distance(curve, pts)
    if curve.kind == "support_fourier":
        shell_ok = np.abs(e) <= lam + 1e-12
    else:
        shell_ok = np.abs(e) <= lam * (1 + 1e-12) + 1e-15
    theta = project_theta(curve, pts)
    s = curve.arclength(theta % (2 * math.pi))
    lo, hi = sector.arc(extended)
    L = curve.total_length
    tol = 1e-8 * max(1.0, L)
    rel = (s - lo) % L
    arc_ok = (rel <= (hi - lo) + tol) | (rel >= L - tol)
    return shell_ok & arc_ok


# ----------------------------------------------------------------------
# separation and overlap


def eps_separated_check(curve, points, eps: float):
    """True iff all pairwise geodesic (arclength) distances are >= eps.

    ``points`` may hold CurvePoint objects, normal angles, or raw arclength
    coordinates wrapped in ``("s", value)`` tuples.  Returns (ok, pair) with
    the first violating index pair when the check fails.
    """
    svals = []
    for p in points:
        if hasattr(p, "arclength"):
            svals.append(float(p.arclength))
        elif isinstance(p, tuple) and len(p) == 2 and p[0] == "s":
            svals.append(float(p[1]))
        else:
            svals.append(float(curve.arclength(np.array(float(p)))))
    s = np.array(svals)
    L = curve.total_length
    n = len(s)
    for i in range(n):
        d = np.abs(s[i + 1:] - s[i]) % L
        d = np.minimum(d, L - d)
        bad = np.nonzero(d < eps)[0]
        if bad.size:
            return False, (i, i + 1 + int(bad[0]))
    return True, None


def _positive_overlap(lo1, hi1, lo2, hi2, L, tol):
    """Positive-length intersection of two arcs of the circle of length L."""
    for shift in (-L, 0.0, L):
        lo = max(lo1 + shift, lo2)
        hi = min(hi1 + shift, hi2)
        if hi - lo > tol:
            return True
    return False


def overlap_map(sig: Sectorization, sig_prime: Sectorization):
    """For each coarse sector s' the list of fine sectors s with extended
    arcs overlapping in a set of positive length.

    ``sig`` must be the finer (or equal) sectorization over the same curve.
    """
    if not sig.curve.same_curve(sig_prime.curve):
        raise CurveMismatch("sectorizations live on different curves")
    if sig.ell > sig_prime.ell * (1 + 1e-12):
        raise ValueError("first argument must be the finer sectorization")
    L = sig.curve.total_length
    tol = 1e-9 * sig.ell
    nf = len(sig.sectors)
    ellf = sig.ell
    ef = sig.extension
    out = []
    for sp in sig_prime.sectors:
        lo, hi = sp.arc(extended=True)
        i_lo = math.floor((lo - ef) / ellf) - 1
        i_hi = math.ceil((hi + ef) / ellf) + 1
        hits = []
        for i in range(i_lo, i_hi + 1):
            idx = i % nf
            flo = i * ellf - ef
            fhi = (i + 1) * ellf + ef
            if _positive_overlap(flo, fhi, lo, hi, L, tol):
                hits.append(idx)
        seen = set()
        uniq = [h for h in hits if not (h in seen or seen.add(h))]
        out.append(uniq)
    return out
