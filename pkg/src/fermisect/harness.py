"""Scaling scans across scales, exponent fits and bound verification.

Every experiment produces one row per scale with (value, bound, ratio); the
bound is the relevant counting formula with constant 1, so the ratios absorb
the unknown geometry constant and "bounded uniformly" becomes a max/min band
check over the scanned ladder.  Scans are deterministic under a fixed seed;
each row draws from an rng keyed on (seed, row index).
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import curve as _curve
from . import momentum as _momentum
from . import norms as _norms
from . import sectorization as _sect
from .boxes import add_boxes, neg_box
from .curve import CurveModel
from .errors import InsufficientData, MalformedQuery

CSV_VERSION = 1
CSV_HEADER = "version,experiment,j,M,ell,Lambda,value,bound,ratio"

EXPERIMENTS = ("mom3", "mom3_tilde", "mom_windowed", "pairs", "norms_1v3",
               "norms_channel", "resect_factors", "antipodal_sublevel")


@dataclass
class ScanConfig:
    curve: dict
    experiment: str
    M: float = 3.0
    j_range: tuple = (4, 8)
    aleph: float | None = 2.0 / 3.0
    ell_per_j: dict | None = None
    Lambda: float | None = None
    mode: str = "rect"
    seed: int = 20240801
    workers: int = 1
    budget_seconds: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise MalformedQuery(f"unknown experiment {self.experiment!r}")
        if self.j_range[0] < 2:
            raise MalformedQuery("j_min must be at least 2")
        if self.M <= 1:
            raise MalformedQuery("M must exceed 1")

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "j_range" in data:
            data["j_range"] = tuple(data["j_range"])
        if "ell_per_j" in data and data["ell_per_j"] is not None:
            data["ell_per_j"] = {int(k): float(v)
                                 for k, v in data["ell_per_j"].items()}
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ScanRow:
    j: int
    ell: float
    Lambda: float
    value: float
    bound: float
    ratio: float | None


@dataclass
class ScalingReport:
    experiment: str
    M: float
    rows: list
    fitted_slope: float | None = None
    slope_stderr: float | None = None
    verdict: str | None = None
    complete: bool = True
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "M": self.M,
            "rows": [[r.j, r.ell, r.Lambda, r.value, r.bound, r.ratio]
                     for r in self.rows],
            "fitted_slope": self.fitted_slope,
            "slope_stderr": self.slope_stderr,
            "verdict": self.verdict,
            "complete": self.complete,
            "meta": self.meta,
        }


# ----------------------------------------------------------------------
# row computations


def _build_sig(cfg, curve, j):
    if cfg.ell_per_j is not None:
        return _sect.build(curve, M=cfg.M, j=j, ell=cfg.ell_per_j[j],
                           Lambda=cfg.Lambda)
    return _sect.build(curve, M=cfg.M, j=j, aleph=cfg.aleph, Lambda=cfg.Lambda)


def _ratio(value, bound):
    if bound == 0.0:
        return None if value == 0.0 else math.inf
    return value / bound


def _mom3_bound(ell, Lam):
    arg = Lam / ell ** 2
    logterm = math.log(arg) if arg > 1.0 else 0.0
    return (1.0 / ell) * (1.0 + (Lam / ell) * logterm)


def _row_mom3(cfg, curve, j, rng, tilde):
    sig = _build_sig(cfg, curve, j)
    if tilde:
        ths = cfg.params.get("target_thetas", (0.7, 1.9, 4.0))
        q = (curve.positions(np.array(ths[0])) + curve.positions(np.array(ths[1]))
             - curve.positions(np.array(ths[2])))
        target = _momentum.Target.of_point(q)
    else:
        th = cfg.params.get("target_theta", 0.7)
        target = _momentum.Target.of_sector(
            _sect.sector_at(curve, th, sig.ell, sig.Lambda))
    res = _momentum.mom_count(sig, 3, target, mode=cfg.mode)
    count = res.count
    if j == cfg.j_range[0] and cfg.mode == "rect" \
            and cfg.params.get("brute_anchor", True):
        brute = _momentum.mom_brute_force(sig, 3, target)
        if brute != count:
            raise RuntimeError(
                f"mom3 hash count {count} != dense count {brute} at j={j}")
    bound = _mom3_bound(sig.ell, sig.Lambda)
    return ScanRow(j, sig.ell, sig.Lambda, float(count), bound,
                   _ratio(count, bound))


def _window_omega(curve, windows):
    """The paper's window separation: three times the largest over pairs of
    the smaller of direct and antipodal window distances."""
    L = curve.total_length
    anti = []
    for lo, hi in windows:
        tl = curve.theta_from_arclength(np.array(lo))
        th = curve.theta_from_arclength(np.array(hi))
        alo = float(curve.arclength(tl + math.pi)) % L
        ahi = float(curve.arclength(th + math.pi)) % L
        if ahi < alo:
            ahi += L
        anti.append((alo, ahi))
    best = 0.0
    for i in range(len(windows)):
        for jdx in range(len(windows)):
            if i == jdx:
                continue
            d = min(_norms._interval_dist(windows[i], windows[jdx], L),
                    _norms._interval_dist(windows[i], anti[jdx], L))
            best = max(best, d)
    return 3.0 * best


def _row_mom_windowed(cfg, curve, j, rng):
    sig = _build_sig(cfg, curve, j)
    legs = cfg.params.get("legs", 5)
    centers = cfg.params.get("window_thetas", (0.3, 1.25, 2.45, 3.7, 5.1))
    delta = cfg.params.get("delta_in_ell", 3.0) * sig.ell
    windows = []
    for th in centers[:legs]:
        s = float(curve.arclength(np.array(th)))
        windows.append((s - delta / 2, s + delta / 2))
    omega = _window_omega(curve, windows)
    if omega / 3.0 <= max(delta, 4 * sig.ell):
        raise MalformedQuery("windows violate the separation hypothesis")
    th = cfg.params.get("target_theta", centers[0])
    target = _momentum.Target.of_sector(
        _sect.sector_at(curve, th, sig.ell, sig.Lambda))
    res = _momentum.mom_count(sig, legs, target, windows=windows,
                              mode=cfg.mode)
    n = (legs + 1) // 2
    bound = (n ** 2 * (delta / sig.ell + 1.0) ** (2 * n - 3)
             * (1.0 + sig.Lambda / (sig.ell * omega)))
    return ScanRow(j, sig.ell, sig.Lambda, float(res.count), bound,
                   _ratio(res.count, bound))


def worst_pair_target(curve):
    """The Cooper-channel worst pair: (k, a(k)) at a critical point of the
    antipodal-sum map; for symmetric curves any antipodal pair works."""
    crit = _curve.antipodal_sum_critical(curve)
    theta = crit[0][0] if crit else 0.0
    k1 = np.asarray(curve.positions(np.array(theta)))
    k2 = np.asarray(curve.positions(np.array(theta + math.pi)))
    return theta, k1, k2


def _row_pairs(cfg, curve, j, rng):
    # Default to the fine edge of the admissible length window,
    # ell = M^-(j - 3/2): the Cooper-pair count only reaches its asymptotic
    # exponent once the sector length resolves the cubic antipodal
    # degeneracy, which the coarser ladder rules do not by j = 8.
    rule = cfg.params.get("ell_rule", "fine")
    if cfg.ell_per_j is not None or rule == "aleph":
        sig = _build_sig(cfg, curve, j)
    else:
        sig = _sect.build(curve, M=cfg.M, j=j, ell=cfg.M ** -(j - 1.5),
                          Lambda=cfg.Lambda)
    n0 = cfg.params.get("n0")
    _, k1, k2 = worst_pair_target(curve)
    count = _momentum.pair_sum_count(sig, "momentum_pair", k1, k2)
    if n0:
        bound = sig.ell ** (1.0 / n0) / sig.ell
    else:
        bound = 1.0 / sig.ell
    return ScanRow(j, sig.ell, sig.Lambda, float(count), bound,
                   _ratio(count, bound))


def _row_norms_1v3(cfg, curve, j, rng):
    sig = _build_sig(cfg, curve, j)
    mask = _norms.MomentumMask.conserving((1, 1, -1, -1))
    kernels = cfg.params.get("kernels_per_scale", 100)
    centers = rng.integers(0, len(sig), size=kernels)
    worst = 0.0
    for c in centers:
        n1, n3 = _norms.star_norms(sig, mask, int(c), rng)
        if n3 > 0:
            worst = max(worst, n1 / n3)
    bound = 1.0 / sig.ell
    return ScanRow(j, sig.ell, sig.Lambda, worst, bound, _ratio(worst, bound))


def _pair_completion_count(boxset, tbox):
    """#{(s3, s4) : B3 + B4 meets tbox}, via one grid batch."""
    queries = add_boxes(neg_box(boxset.boxes), tbox[None, :])
    return int(boxset.grid.query_counts(queries).sum())


def _channel_stats(cfg, curve, sig, rng):
    """Counting estimators for the constant-1 particle-particle kernel.

    channel: max over candidate left pairs (s1', s2') of the number of
    right pairs meeting their sum (candidates = seeded random pairs plus
    pairs around the Cooper-critical configuration, where the maximum
    lives).  3-norm: max completion count of one leg over a sample of
    compatible quadruples.  Both are documented lower-bound estimators of
    the exact maxima, applied identically at every scale.  Rectangles live
    in the frame of the critical configuration, which keeps the dominant
    near-critical candidates tight.
    """
    n = len(sig)
    theta_c, _, _ = worst_pair_target(curve)
    boxset = _momentum.SectorBoxSet(sig, frame_theta=theta_c)
    i_c = sig.sector_containing(theta_c)
    i_a = sig.sector_containing(theta_c + math.pi)
    cand = []
    for da in range(-2, 3):
        for db in range(-2, 3):
            cand.append(((i_c + da) % n, (i_a + db) % n))
    extra = cfg.params.get("channel_candidates", 48)
    for _ in range(extra):
        cand.append((int(rng.integers(0, n)), int(rng.integers(0, n))))

    best_ch = 0
    best_pair = cand[0]
    for (a, b) in cand:
        tbox = add_boxes(boxset.boxes[a], boxset.boxes[b])
        ch = _pair_completion_count(boxset, tbox)
        if ch > best_ch:
            best_ch, best_pair = ch, (a, b)

    # sample compatible quadruples around the best pair for the 3-norm
    a, b = best_pair
    tbox = add_boxes(boxset.boxes[a], boxset.boxes[b])
    queries = add_boxes(neg_box(boxset.boxes), tbox[None, :])
    qi, bi = boxset.grid.query_pairs(queries)
    take = min(len(qi), cfg.params.get("p3_samples", 200))
    sel = rng.choice(len(qi), size=take, replace=False) if len(qi) else []
    p3 = 1
    quads = [(a, b, int(qi[s]), int(bi[s])) for s in sel]
    for (s1, s2, s3, s4) in quads:
        b1, b2, b3, b4 = (boxset.boxes[i] for i in (s1, s2, s3, s4))
        partials = (
            add_boxes(add_boxes(b1, b2), neg_box(b3)),      # free leg 4
            add_boxes(add_boxes(b1, b2), neg_box(b4)),      # free leg 3
            neg_box(add_boxes(b1, neg_box(add_boxes(b3, b4)))),   # leg 2
            neg_box(add_boxes(b2, neg_box(add_boxes(b3, b4)))),   # leg 1
        )
        for idx, part in enumerate(partials):
            q = part[None, :] if idx < 2 else neg_box(part)[None, :]
            p3 = max(p3, int(boxset.grid.query_counts(q)[0]))
    return best_ch, p3


def _row_norms_channel(cfg, curve, j, rng):
    sig = _build_sig(cfg, curve, j)
    n0 = cfg.params.get("n0", 3)
    ch, p3 = _channel_stats(cfg, curve, sig, rng)
    value = ch / p3
    bound = sig.ell ** (1.0 / n0) / sig.ell
    return ScanRow(j, sig.ell, sig.Lambda, float(value), bound,
                   _ratio(value, bound))


def _row_resect(cfg, curve, j, rng):
    sig = _build_sig(cfg, curve, j)
    gap = cfg.params.get("coarse_gap", 2)
    i = max(2, j - gap)
    coarse = _build_sig(cfg, curve, i)
    if coarse.ell <= 4 * sig.ell:
        raise MalformedQuery("coarse scale too close: need ell' > 4 ell")
    mask = _norms.MomentumMask.conserving((1, 1, -1, -1))
    kernels = cfg.params.get("kernels_per_scale", 12)
    entries = cfg.params.get("entries", 24)
    worst = 0.0
    for _ in range(kernels):
        K = _norms.scatter_masked_kernel(coarse, mask, entries, rng)
        if not K.weights:
            continue
        n1 = _norms.p_norm(K, 1).value
        n3 = _norms.p_norm(K, 3).value
        Kf = _norms.resectorize(K, sig)
        n1f = _norms.p_norm(Kf, 1).value
        denom = (coarse.ell / sig.ell) ** 2 * (n1 + n3 / coarse.ell)
        if denom > 0:
            worst = max(worst, n1f / denom)
    return ScanRow(j, sig.ell, sig.Lambda, worst, 1.0, _ratio(worst, 1.0))


def _rows_sublevel(cfg, curve, rng):
    n0 = cfg.params.get("n0", 3)
    powers = cfg.params.get("eps_powers", tuple(range(4, 13)))
    quad = cfg.params.get("quad_points", 20000)
    crit = _curve.antipodal_sum_critical(curve)
    center = crit[0][1]
    rows = []
    for idx, p in enumerate(powers):
        eps = 2.0 ** (-p)
        val = _curve.antipodal_sum_sublevel_length(curve, center, eps,
                                                   quad_points=quad)
        bound = eps ** (1.0 / (n0 - 1))
        rows.append(ScanRow(idx, eps, 0.0, val, bound, _ratio(val, bound)))
    return rows


def _compute_row(cfg, j):
    curve = CurveModel.from_dict(cfg.curve)
    rng = np.random.default_rng((cfg.seed, j))
    if cfg.experiment == "mom3":
        return _row_mom3(cfg, curve, j, rng, tilde=False)
    if cfg.experiment == "mom3_tilde":
        return _row_mom3(cfg, curve, j, rng, tilde=True)
    if cfg.experiment == "mom_windowed":
        return _row_mom_windowed(cfg, curve, j, rng)
    if cfg.experiment == "pairs":
        return _row_pairs(cfg, curve, j, rng)
    if cfg.experiment == "norms_1v3":
        return _row_norms_1v3(cfg, curve, j, rng)
    if cfg.experiment == "norms_channel":
        return _row_norms_channel(cfg, curve, j, rng)
    if cfg.experiment == "resect_factors":
        return _row_resect(cfg, curve, j, rng)
    raise MalformedQuery(cfg.experiment)


# ----------------------------------------------------------------------
# the scan driver


def scaling_scan(cfg: ScanConfig) -> ScalingReport:
    """One row per scale of the configured experiment.

    Deterministic under a fixed seed; respects the wall-clock budget by
    emitting a partial report flagged incomplete instead of aborting.
    """
    t0 = time.monotonic()
    curve = CurveModel.from_dict(cfg.curve)
    report = ScalingReport(experiment=cfg.experiment, M=cfg.M, rows=[])

    if cfg.experiment == "antipodal_sublevel":
        rng = np.random.default_rng((cfg.seed, 0))
        report.rows = _rows_sublevel(cfg, curve, rng)
    else:
        js = list(range(cfg.j_range[0], cfg.j_range[1] + 1))
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                futures = [pool.submit(_compute_row, cfg, j) for j in js]
                for fut in futures:
                    if cfg.budget_seconds is not None and \
                            time.monotonic() - t0 > cfg.budget_seconds:
                        report.complete = False
                        break
                    report.rows.append(fut.result())
        else:
            for j in js:
                if cfg.budget_seconds is not None and \
                        time.monotonic() - t0 > cfg.budget_seconds:
                    report.complete = False
                    break
                report.rows.append(_compute_row(cfg, j))

    try:
        report.fitted_slope, report.slope_stderr = fit_exponent(report.rows)
    except InsufficientData:
        pass
    report.meta = {"seed": cfg.seed, "mode": cfg.mode,
                   "params": dict(cfg.params)}
    return report


def fit_exponent(rows):
    """Least-squares slope of log(value) against log(1/ell), with the
    standard error of the slope estimate."""
    pts = [(math.log(1.0 / r.ell), math.log(r.value))
           for r in rows if r.value > 0]
    if len(pts) < 3:
        raise InsufficientData(f"need 3 positive rows, have {len(pts)}")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    xm = x - x.mean()
    sxx = float(xm @ xm)
    slope = float(xm @ y) / sxx
    resid = y - y.mean() - slope * xm
    dof = max(1, len(pts) - 2)
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, stderr


# ----------------------------------------------------------------------
# the sublevel-measure property test


def _real_roots(coeffs, lo, hi):
    """Real roots of a polynomial (highest degree first) inside [lo, hi],
    eigenvalue-based with Newton polish."""
    coeffs = np.asarray(coeffs, dtype=float)
    if len(coeffs) < 2:
        return []
    roots = np.roots(coeffs)
    scale = max(1.0, abs(hi), abs(lo))
    out = []
    der = np.polyder(coeffs)
    for r in roots:
        if abs(r.imag) > 1e-8 * scale:
            continue
        x = float(r.real)
        for _ in range(3):
            d = np.polyval(der, x)
            if d == 0:
                break
            x = x - np.polyval(coeffs, x) / d
        if lo - 1e-12 * scale <= x <= hi + 1e-12 * scale:
            out.append(min(max(x, lo), hi))
    return sorted(out)


def polynomial_sublevel_measure(coeffs, lo, hi, y_lo, y_hi):
    """Exact measure of {x in [lo, hi] : y_lo <= f(x) <= y_hi} by root
    isolation of the two endpoint equations."""
    cuts = [lo, hi]
    for y in (y_lo, y_hi):
        shifted = np.array(coeffs, dtype=float)
        shifted[-1] -= y
        cuts.extend(_real_roots(shifted, lo, hi))
    cuts = sorted(set(cuts))
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        v = np.polyval(coeffs, mid)
        if y_lo <= v <= y_hi:
            total += b - a
    return total


def sublevel_lemma_test(n: int, trials: int, seed: int) -> int:
    """Random polynomials of degree n against the sublevel-measure bound
    2^(n+1) (eps/b)^(1/n), with b = n! |leading coefficient| (the constant
    value of the n-th derivative).  Returns the number of violations."""
    if not 1 <= n <= 6:
        raise MalformedQuery("degree must be in [1, 6]")
    if trials < 10 ** 3:
        raise MalformedQuery("need at least 10^3 trials")
    rng = np.random.default_rng((seed, n))
    violations = 0
    for _ in range(trials):
        coeffs = rng.uniform(-1.0, 1.0, size=n + 1)
        while abs(coeffs[0]) < 1e-3:
            coeffs[0] = rng.uniform(-1.0, 1.0)
        b = math.factorial(n) * abs(coeffs[0])
        c = rng.uniform(-2.0, 2.0)
        half = rng.uniform(0.05, 2.0)
        lo, hi = c - half, c + half
        eps = 10.0 ** rng.uniform(-6, -1)
        x0 = rng.uniform(lo, hi)
        y0 = float(np.polyval(coeffs, x0)) + rng.normal(0.0, eps)
        measure = polynomial_sublevel_measure(coeffs, lo, hi,
                                              y0 - eps, y0 + eps)
        bound = 2.0 ** (n + 1) * (eps / b) ** (1.0 / n)
        if measure > bound + 1e-9 * (1.0 + bound):
            violations += 1
    return violations


# ----------------------------------------------------------------------
# verdicts


@dataclass
class Verdict:
    passed: bool
    reasons: list = field(default_factory=list)

    @property
    def exit_code(self):
        return 0 if self.passed else 1


def verify_bounds(report: ScalingReport, band: float = 4.0,
                  slope: float | None = None, slope_tol: float = 0.1,
                  slope_min: float | None = None) -> Verdict:
    """Pass iff the ratio band and the optional slope targets hold."""
    reasons = []
    ratios = [(r.j, r.ratio) for r in report.rows
              if r.ratio is not None and math.isfinite(r.ratio) and r.ratio > 0]
    if not ratios:
        reasons.append("no finite positive ratios")
    else:
        top = max(ratios, key=lambda t: t[1])
        bot = min(ratios, key=lambda t: t[1])
        if top[1] / bot[1] > band:
            reasons.append(
                f"ratio band {top[1] / bot[1]:.3g} exceeds {band:g} "
                f"(max at j={top[0]}, min at j={bot[0]})")
    if (slope is not None or slope_min is not None) \
            and report.fitted_slope is None:
        reasons.append("no fitted slope available")
    if slope is not None and report.fitted_slope is not None:
        if abs(report.fitted_slope - slope) > slope_tol:
            reasons.append(
                f"fitted slope {report.fitted_slope:.4f} not within "
                f"{slope_tol:g} of {slope:g}")
    if slope_min is not None and report.fitted_slope is not None:
        if report.fitted_slope < slope_min:
            reasons.append(
                f"fitted slope {report.fitted_slope:.4f} below {slope_min:g}")
    verdict = Verdict(passed=not reasons, reasons=reasons)
    report.verdict = "pass" if verdict.passed else "fail"
    return verdict
