"""Strictly convex closed planar curves parametrized by outward-normal angle.

A curve is described either by a support function ``h(theta)`` given as a
finite Fourier series, or as the zero level set of a dispersion expression
``e(k1, k2)`` (strictly negative inside, gradient outward).  In both cases the
primary parameter is the outward-normal angle ``theta``: the point ``k(theta)``
is the unique point of the curve whose outward unit normal is
``u(theta) = (cos theta, sin theta)``.  Under this parametrization the
antipodal map (the other point with a parallel tangent line) is exactly
``theta -> theta + pi``.

Conventions used throughout:

* tangent at ``theta`` is ``u_perp(theta) = (-sin theta, cos theta)`` (the
  direction of increasing ``theta``, one global orientation for all points);
* inward normal is ``-u(theta)``;
* ``rho(theta) = h + h''`` is the curvature radius; strict convexity means
  ``rho > 0`` everywhere;
* graph jets are the derivatives at 0 of the curve written as a graph over
  its tangent line, oriented tangent as abscissa and inward normal up, so the
  second derivative equals the curvature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from .errors import (
    AmbiguousProjection,
    IndeterminateCertificate,
    NumericError,
    OrderError,
)

TWO_PI = 2.0 * math.pi

# Default tolerances.  Jet differences below JET_TOL are treated as zero when
# deciding asymmetry orders; geometric coincidences use GEOM_TOL.
JET_TOL = 1e-6
GEOM_TOL = 1e-10

_VALIDATION_GRID = 4096


def _unit(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _unit_perp(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)


@dataclass(frozen=True, eq=False)
class CurvePoint:
    """A point on the curve together with its local frame."""

    theta: float
    position: np.ndarray
    tangent: np.ndarray
    inward_normal: np.ndarray
    curvature: float
    arclength: float


@dataclass
class AsymmetryCertificate:
    """Outcome of scanning jet differences between points and their antipodes.

    ``per_point_order`` holds one ``(theta, order)`` entry per probed angle,
    ``order = None`` meaning no difference was detected up to ``n_max``.
    For asymmetric curves ``n0`` is the largest order encountered and
    ``min_jet_gap`` the smallest gap that decided an order.
    """

    n_max: int
    grid_size: int
    per_point_order: list
    symmetric: bool
    n0: int | None = None
    min_jet_gap: float | None = None
    symmetry_center: np.ndarray | None = None


class CurveModel:
    """Strictly convex closed curve, support-Fourier or dispersion level set."""

    def __init__(self, kind, support_coeffs=None, dispersion_expr=None,
                 convexity_margin=None, smoothness_order=8):
        if kind in ("dispersion", "dispersion_level_set"):
            kind = "dispersion_level_set"
        if kind not in ("support_fourier", "dispersion_level_set"):
            raise ValueError(f"unknown curve kind {kind!r}")
        self.kind = kind
        self.smoothness_order = int(smoothness_order)
        self._cache = {}

        if kind == "support_fourier":
            if not support_coeffs:
                raise ValueError("support_fourier curve needs coefficients")
            coeffs = sorted((int(m), float(a), float(b)) for m, a, b in support_coeffs)
            self.support_coeffs = tuple(coeffs)
            self._m = np.array([c[0] for c in coeffs], dtype=float)
            self._a = np.array([c[1] for c in coeffs])
            self._b = np.array([c[2] for c in coeffs])
            self.dispersion_expr = None
        else:
            if not dispersion_expr:
                raise ValueError("dispersion curve needs an expression")
            self.dispersion_expr = str(dispersion_expr)
            self.support_coeffs = None
            self._build_dispersion()

        self._validate(convexity_margin)

    # ------------------------------------------------------------------
    # construction helpers

    @classmethod
    def circle(cls, radius=1.0):
        return cls("support_fourier", support_coeffs=[(0, radius, 0.0)])

    @classmethod
    def support(cls, coeffs):
        return cls("support_fourier", support_coeffs=coeffs)

    @classmethod
    def ellipse(cls, a, b, harmonics=96):
        """Ellipse with semi-axes (a, b) as a truncated support-Fourier curve.

        The support function sqrt(a^2 cos^2 + b^2 sin^2) is analytic, so its
        Fourier coefficients decay geometrically; the truncation at the given
        number of harmonics is accurate to machine precision for moderate
        aspect ratios.
        """
        k = 1 << 12
        theta = TWO_PI * np.arange(k) / k
        h = np.sqrt(a * a * np.cos(theta) ** 2 + b * b * np.sin(theta) ** 2)
        fh = np.fft.rfft(h) / k
        coeffs = [(0, float(fh[0].real), 0.0)]
        for m in range(1, min(harmonics, k // 2)):
            am = 2.0 * fh[m].real
            bm = -2.0 * fh[m].imag
            if abs(am) > 1e-15 or abs(bm) > 1e-15:
                coeffs.append((m, am, bm))
        return cls("support_fourier", support_coeffs=coeffs)

    @classmethod
    def dispersion(cls, expr):
        return cls("dispersion_level_set", dispersion_expr=expr)

    @classmethod
    def from_dict(cls, data):
        kind = data["kind"]
        if kind in ("dispersion", "dispersion_level_set"):
            return cls("dispersion_level_set", dispersion_expr=data["expr"],
                       convexity_margin=data.get("convexity_margin"))
        return cls("support_fourier", support_coeffs=data["coeffs"],
                   convexity_margin=data.get("convexity_margin"))

    def to_dict(self):
        if self.kind == "support_fourier":
            return {"kind": "support_fourier",
                    "coeffs": [list(c) for c in self.support_coeffs]}
        return {"kind": "dispersion", "expr": self.dispersion_expr}

    def descriptor(self):
        if self.kind == "support_fourier":
            return ("support_fourier", self.support_coeffs)
        return ("dispersion_level_set", self.dispersion_expr)

    def same_curve(self, other):
        return self.descriptor() == other.descriptor()

    def _build_dispersion(self):
        import sympy
        from sympy.parsing.sympy_parser import (
            parse_expr, standard_transformations, convert_xor)

        k1, k2 = sympy.symbols("k1 k2", real=True)
        text = self.dispersion_expr.replace("−", "-")
        expr = parse_expr(
            text,
            local_dict={"k1": k1, "k2": k2, "cos": sympy.cos, "sin": sympy.sin},
            transformations=standard_transformations + (convert_xor,),
        )
        extra = expr.free_symbols - {k1, k2}
        if extra:
            raise ValueError(f"unknown symbols in dispersion: {extra}")
        grads = [sympy.diff(expr, v) for v in (k1, k2)]
        hess = [[sympy.diff(g, v) for v in (k1, k2)] for g in grads]
        self._e_fn = sympy.lambdify((k1, k2), expr, "numpy")
        self._de_fn = sympy.lambdify((k1, k2), grads, "numpy")
        self._he_fn = sympy.lambdify((k1, k2), hess, "numpy")

    # ------------------------------------------------------------------
    # support-function elementary quantities (vectorized over theta)

    def _h(self, theta):
        mt = np.multiply.outer(np.asarray(theta, dtype=float), self._m)
        return np.cos(mt) @ self._a + np.sin(mt) @ self._b

    def _h1(self, theta):
        mt = np.multiply.outer(np.asarray(theta, dtype=float), self._m)
        return -np.sin(mt) @ (self._m * self._a) + np.cos(mt) @ (self._m * self._b)

    def _rho_support(self, theta):
        mt = np.multiply.outer(np.asarray(theta, dtype=float), self._m)
        w = 1.0 - self._m ** 2
        return np.cos(mt) @ (w * self._a) + np.sin(mt) @ (w * self._b)

    def _arclength_support(self, theta):
        """Exact antiderivative of rho from 0 to theta."""
        theta = np.asarray(theta, dtype=float)
        w = 1.0 - self._m ** 2
        out = np.zeros_like(theta)
        for m, wa, wb in zip(self._m, w * self._a, w * self._b):
            if m == 0:
                out = out + wa * theta
            else:
                out = out + (wa * np.sin(m * theta) + wb * (1.0 - np.cos(m * theta))) / m
        return out

    # ------------------------------------------------------------------
    # dispersion elementary quantities

    def dispersion_value(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.asarray(self._e_fn(pts[..., 0], pts[..., 1]), dtype=float)

    def dispersion_grad(self, pts):
        pts = np.asarray(pts, dtype=float)
        g = self._de_fn(pts[..., 0], pts[..., 1])
        gx = np.broadcast_to(np.asarray(g[0], dtype=float), pts[..., 0].shape)
        gy = np.broadcast_to(np.asarray(g[1], dtype=float), pts[..., 0].shape)
        return np.stack([gx, gy], axis=-1)

    def _dispersion_hess(self, pts):
        pts = np.asarray(pts, dtype=float)
        h = self._he_fn(pts[..., 0], pts[..., 1])
        shape = pts[..., 0].shape
        rows = [np.broadcast_to(np.asarray(h[i][j], dtype=float), shape)
                for i in (0, 1) for j in (0, 1)]
        return np.stack(rows, axis=-1).reshape(shape + (2, 2))

    def _solve_points(self, theta, max_iter=50):
        """Points on the level set with outward normal angle theta (batched)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.size == 0:
            return np.zeros((0, 2))
        u = _unit(theta)
        up = _unit_perp(theta)

        # radial bracket for the initial guess; assumes the origin is inside
        r_hi = np.full(theta.shape, 1.0)
        for _ in range(60):
            vals = self.dispersion_value(r_hi[:, None] * u)
            grow = vals < 0
            if not grow.any():
                break
            r_hi[grow] *= 2.0
            if r_hi.max() > 1e9:
                raise NumericError("level set not bounded along some ray")
        r_lo = np.zeros_like(r_hi)
        for _ in range(50):
            mid = 0.5 * (r_lo + r_hi)
            vals = self.dispersion_value(mid[:, None] * u)
            neg = vals < 0
            r_lo = np.where(neg, mid, r_lo)
            r_hi = np.where(neg, r_hi, mid)
        k = 0.5 * (r_lo + r_hi)[:, None] * u

        scale = max(1.0, float(np.abs(k).max()))
        for it in range(max_iter):
            e = self.dispersion_value(k)
            g = self.dispersion_grad(k)
            f2 = np.einsum("ij,ij->i", g, up)
            if max(np.abs(e).max(), np.abs(f2).max()) < 1e-12 * scale:
                break
            hess = self._dispersion_hess(k)
            j21 = np.einsum("ijk,ik->ij", hess, up)
            det = g[:, 0] * j21[:, 1] - g[:, 1] * j21[:, 0]
            if np.any(np.abs(det) < 1e-300):
                raise NumericError("singular Jacobian in level-set solve")
            dx = (e * j21[:, 1] - f2 * g[:, 1]) / det
            dy = (f2 * g[:, 0] - e * j21[:, 0]) / det
            step = np.stack([dx, dy], axis=-1)
            norm = np.linalg.norm(step, axis=-1, keepdims=True)
            cap = 0.5 * scale
            step = np.where(norm > cap, step * (cap / np.maximum(norm, 1e-300)), step)
            k = k - step
        else:
            raise NumericError("level-set solve did not converge in "
                               f"{max_iter} iterations")
        return k

    def _rho_dispersion(self, theta, pts=None):
        if pts is None:
            pts = self._solve_points(theta)
        g = self.dispersion_grad(pts)
        hess = self._dispersion_hess(pts)
        gx, gy = g[..., 0], g[..., 1]
        num = (hess[..., 0, 0] * gy ** 2 - 2.0 * hess[..., 0, 1] * gx * gy
               + hess[..., 1, 1] * gx ** 2)
        gn = np.hypot(gx, gy)
        kappa = num / gn ** 3
        return 1.0 / kappa

    # ------------------------------------------------------------------
    # uniform geometry API

    def positions(self, theta):
        """Curve points for an array of normal angles, shape (..., 2)."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "support_fourier":
            h = self._h(theta)
            h1 = self._h1(theta)
            return h[..., None] * _unit(theta) + h1[..., None] * _unit_perp(theta)
        flat = np.atleast_1d(theta).ravel()
        pts = self._solve_points(flat)
        return pts.reshape(theta.shape + (2,)) if theta.shape else pts[0]

    def positions_warm(self, theta, guess, iters=6):
        """Curve points with a warm-start guess (fast path for dispersion
        curves when the solution is known to be near the guess)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if self.kind == "support_fourier":
            return self.positions(theta)
        if theta.size == 0:
            return np.zeros((0, 2))
        u = _unit(theta)
        up = _unit_perp(theta)
        k = np.array(guess, dtype=float, copy=True)
        for _ in range(iters):
            e = self.dispersion_value(k)
            g = self.dispersion_grad(k)
            f2 = np.einsum("ij,ij->i", g, up)
            hess = self._dispersion_hess(k)
            j21 = np.einsum("ijk,ik->ij", hess, up)
            det = g[:, 0] * j21[:, 1] - g[:, 1] * j21[:, 0]
            det = np.where(np.abs(det) < 1e-300, 1e-300, det)
            dx = (e * j21[:, 1] - f2 * g[:, 1]) / det
            dy = (f2 * g[:, 0] - e * j21[:, 0]) / det
            k = k - np.stack([dx, dy], axis=-1)
        return k

    def rho(self, theta):
        """Curvature radius at the given normal angles."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "support_fourier":
            return self._rho_support(theta)
        flat = np.atleast_1d(theta).ravel()
        out = self._rho_dispersion(flat)
        return out.reshape(theta.shape) if theta.shape else float(out[0])

    def _geom(self):
        g = self._cache.get("geom")
        if g is None:
            n = 8192
            theta = TWO_PI * np.arange(n + 1) / n
            if self.kind == "support_fourier":
                s = self._arclength_support(theta)
                rho = self._rho_support(theta)
                pos = self.positions(theta)
            else:
                pos = self._solve_points(theta)
                rho = self._rho_dispersion(theta, pos)
                ds = 0.5 * (rho[1:] + rho[:-1]) * (TWO_PI / n)
                s = np.concatenate([[0.0], np.cumsum(ds)])
            g = {"theta": theta, "s": s, "rho": rho, "pos": pos,
                 "length": float(s[-1]), "min_rho": float(rho.min())}
            self._cache["geom"] = g
        return g

    @property
    def total_length(self):
        return self._geom()["length"]

    @property
    def convexity_margin(self):
        return self._margin

    def arclength(self, theta):
        """Arclength from the theta=0 point, monotone increasing in theta."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "support_fourier":
            return self._arclength_support(theta)
        g = self._geom()
        wraps = np.floor(theta / TWO_PI)
        frac = theta - TWO_PI * wraps
        return wraps * g["length"] + np.interp(frac, g["theta"], g["s"])

    def theta_from_arclength(self, s):
        s = np.asarray(s, dtype=float)
        g = self._geom()
        wraps = np.floor(s / g["length"])
        frac = s - g["length"] * wraps
        theta = np.interp(frac, g["s"], g["theta"])
        if self.kind == "support_fourier":
            for _ in range(4):
                theta = theta - (self._arclength_support(theta) - frac) / self._rho_support(theta)
        return theta + TWO_PI * wraps

    def _validate(self, margin):
        theta = TWO_PI * np.arange(_VALIDATION_GRID) / _VALIDATION_GRID
        if self.kind == "support_fourier":
            rho = self._rho_support(theta)
        else:
            pts = self._solve_points(theta)
            grad = self.dispersion_grad(pts)
            gn = np.linalg.norm(grad, axis=-1)
            if gn.min() < 1e-10:
                raise ValueError("dispersion gradient vanishes on the curve")
            if self.dispersion_value(pts.mean(axis=0)[None, :])[0] >= 0:
                raise ValueError("dispersion must be negative inside the curve")
            rho = self._rho_dispersion(theta, pts)
        min_rho = float(rho.min())
        if min_rho <= 0:
            raise ValueError(f"curve is not strictly convex (min rho = {min_rho:g})")
        if margin is None:
            margin = min_rho
        elif margin > min_rho:
            raise ValueError("convexity_margin exceeds the verified minimum "
                             f"curvature radius {min_rho:g}")
        self._margin = float(margin)


# ----------------------------------------------------------------------
# point evaluation


def eval_point(curve: CurveModel, theta: float) -> CurvePoint:
    """The curve point with outward normal angle ``theta``."""
    th = float(theta)
    pos = curve.positions(np.array(th))
    rho = float(curve.rho(np.array(th)))
    return CurvePoint(
        theta=th,
        position=np.asarray(pos, dtype=float),
        tangent=_unit_perp(th),
        inward_normal=-_unit(th),
        curvature=1.0 / rho,
        arclength=float(curve.arclength(np.array(th))),
    )


def antipode(curve: CurveModel, theta: float) -> CurvePoint:
    """The unique other point whose tangent line is parallel: theta + pi."""
    return eval_point(curve, float(theta) + math.pi)


def project_theta(curve: CurveModel, q, refine=6):
    """Normal angles of the nearest curve points for an array of queries.

    Vectorized; does not enforce the uniqueness tube.  Newton refinement of
    the tangency condition (k(theta) - q) . tangent = 0 from a dense seed.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    g = curve._geom()
    pos = g["pos"][::8]
    thg = g["theta"][::8]
    d2 = ((q[:, None, :] - pos[None, :, :]) ** 2).sum(axis=-1)
    theta = thg[np.argmin(d2, axis=1)]
    step_cap = 2.5 * (thg[1] - thg[0])
    for _ in range(refine):
        k = curve.positions(theta)
        rho = curve.rho(theta)
        up = _unit_perp(theta)
        u = _unit(theta)
        diff = k - q
        gval = np.einsum("ij,ij->i", diff, up)
        gder = rho - np.einsum("ij,ij->i", diff, u)
        gder = np.where(np.abs(gder) < 1e-12, 1e-12, gder)
        step = np.clip(gval / gder, -step_cap, step_cap)
        theta = theta - step
    return theta


def signed_distance(curve: CurveModel, q):
    """Signed normal distance to the curve: positive outside, negative inside.

    For dispersion curves this is the dispersion value itself (the natural
    shell coordinate); for support curves it is the geometric distance to the
    nearest point, signed by the outward normal.
    """
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    q2 = np.atleast_2d(q)
    if curve.kind == "dispersion_level_set":
        out = curve.dispersion_value(q2)
    else:
        theta = project_theta(curve, q2)
        k = curve.positions(theta)
        out = np.einsum("ij,ij->i", q2 - k, _unit(theta))
    return float(out[0]) if single else out


def project(curve: CurveModel, q) -> CurvePoint:
    """Nearest-point projection, restricted to the uniqueness tube."""
    q = np.asarray(q, dtype=float)
    theta = float(project_theta(curve, q[None, :])[0])
    k = curve.positions(np.array(theta))
    dist = float(np.linalg.norm(q - k))
    if dist >= curve.convexity_margin * (1.0 - 1e-9):
        raise AmbiguousProjection(
            f"point at distance {dist:g} is outside the uniqueness tube "
            f"(margin {curve.convexity_margin:g})")
    return eval_point(curve, theta)


# ----------------------------------------------------------------------
# graph jets
#
# The curve near k(theta0), written in the frame (tangent, inward normal),
# satisfies dx/ds = cos(psi), dy/ds = sin(psi) with psi(s) = theta(s) - theta0
# and ds/dtheta = rho(theta).  Taylor coefficients of rho in theta therefore
# determine the graph y(x) by pure power-series composition: integrate rho to
# get s(theta), invert, form x(s) and y(s), invert x, compose.  For support
# curves the rho derivatives are closed-form, so the jets carry no numerical
# differentiation error at all.


def _series_mul(a, b, k):
    out = np.zeros(k + 1)
    for i in range(min(len(a), k + 1)):
        if a[i] == 0.0:
            continue
        top = min(len(b), k + 1 - i)
        out[i:i + top] += a[i] * b[:top]
    return out


def _series_compose(outer, inner, k):
    """outer(inner(x)) to order k; inner must have zero constant term."""
    res = np.zeros(k + 1)
    res[0] = outer[0]
    power = np.zeros(k + 1)
    power[0] = 1.0
    for d in range(1, min(len(outer), k + 1)):
        power = _series_mul(power, inner, k)
        res += outer[d] * power
    return res


def _series_invert(f, k):
    """Compositional inverse g with f(g(x)) = x; needs f[0]=0, f[1] != 0."""
    g = np.zeros(k + 1)
    g[1] = 1.0 / f[1]
    for d in range(2, k + 1):
        err = _series_compose(f, g, d)[d]
        g[d] = -err / f[1]
    return g


def _series_integrate(f, k):
    out = np.zeros(k + 1)
    out[1:] = f[:k] / np.arange(1, k + 1)
    return out


def _series_sincos(psi, k):
    """Power series of sin(psi(x)) and cos(psi(x)) for psi with psi[0]=0."""
    fact = [math.factorial(i) for i in range(k + 1)]
    sin_outer = np.array([math.sin(i * math.pi / 2) / fact[i] for i in range(k + 1)])
    cos_outer = np.array([math.cos(i * math.pi / 2) / fact[i] for i in range(k + 1)])
    return _series_compose(sin_outer, psi, k), _series_compose(cos_outer, psi, k)


def _rho_derivs_support(curve, thetas, order):
    """rho and its theta-derivatives up to the given order, exactly."""
    thetas = np.asarray(thetas, dtype=float)
    w = 1.0 - curve._m ** 2
    out = np.empty(thetas.shape + (order + 1,))
    for d in range(order + 1):
        phases = np.multiply.outer(thetas, curve._m) + d * math.pi / 2.0
        md = curve._m ** d
        out[..., d] = np.cos(phases) @ (w * md * curve._a) \
            + np.sin(phases) @ (w * md * curve._b)
    return out


def _rho_derivs_dispersion(curve, thetas, order):
    """rho derivatives from a local Chebyshev fit of the scalar rho(theta).

    Only low orders are extracted, which keeps the differentiation
    amplification mild; accuracy degrades gracefully for orders near the
    smoothness budget.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    deg = order + 8
    m = 2 * (deg + 1)
    half = 0.3
    xi = np.cos(np.pi * np.arange(m) / (m - 1))
    nodes = thetas[:, None] + half * xi[None, :]
    rho = curve.rho(nodes)
    basis = npcheb.chebvander(xi, deg)
    pinv = np.linalg.pinv(basis)
    coef = np.einsum("dm,pm->pd", pinv, rho)
    out = np.empty((len(thetas), order + 1))
    for d in range(order + 1):
        out[:, d] = np.array([npcheb.chebval(0.0, npcheb.chebder(c, d))
                              for c in coef]) / half ** d
    return out


def graph_jets_batch(curve: CurveModel, thetas, n_max: int):
    """Graph-jet rows [phi'', ..., phi^(n_max)] for an array of base angles."""
    if n_max > curve.smoothness_order:
        raise OrderError(f"order {n_max} exceeds smoothness budget "
                         f"{curve.smoothness_order}")
    if n_max < 2:
        raise OrderError("need n_max >= 2")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    k = n_max
    if curve.kind == "support_fourier":
        rder = _rho_derivs_support(curve, thetas, n_max - 2)
    else:
        rder = _rho_derivs_dispersion(curve, thetas, n_max - 2)
    fact = np.array([math.factorial(i) for i in range(n_max - 1)])
    jet_fact = [math.factorial(n) for n in range(k + 1)]

    out = np.empty((len(thetas), n_max - 1))
    for p in range(len(thetas)):
        r = np.zeros(k + 1)
        r[:n_max - 1] = rder[p] / fact       # Taylor coefficients of rho
        s_of_theta = _series_integrate(r, k)
        theta_of_s = _series_invert(s_of_theta, k)
        sin_psi, cos_psi = _series_sincos(theta_of_s, k)
        x_of_s = _series_integrate(cos_psi, k)
        y_of_s = _series_integrate(sin_psi, k)
        s_of_x = _series_invert(x_of_s, k)
        y_of_x = _series_compose(y_of_s, s_of_x, k)
        for n in range(2, n_max + 1):
            out[p, n - 2] = jet_fact[n] * y_of_x[n]
    return out


def graph_jet(curve: CurveModel, theta: float, n_max: int):
    """Derivatives [phi''(0), ..., phi^(n_max)(0)] of the local graph."""
    return list(graph_jets_batch(curve, np.array([float(theta)]), n_max)[0])


def asymmetry_order(curve: CurveModel, theta: float, n_max: int,
                    tol: float = JET_TOL):
    """Smallest n <= n_max whose graph jet differs from the antipode's.

    Returns None when every probed jet agrees within ``tol``.
    """
    th = float(theta)
    jets = graph_jets_batch(curve, np.array([th, th + math.pi]), n_max)
    diff = np.abs(jets[0] - jets[1])
    hits = np.nonzero(diff > tol)[0]
    return int(hits[0]) + 2 if hits.size else None


def certify(curve: CurveModel, n_max: int = 6, grid: int = 1024,
            tol: float = JET_TOL, center_tol: float = 1e-8) -> AsymmetryCertificate:
    """Scan a theta grid for jet differences between antipodal points.

    Beyond the plain per-grid-point maximum, zero crossings of the signed jet
    gaps between neighbouring grid points are bisected and re-probed: points
    where a low-order gap vanishes carry a higher asymmetry order, and on a
    generic grid those zeros fall between grid points.  Without this
    refinement the reported n0 would be a strict grid artifact.
    """
    if grid < 256:
        raise ValueError("certification grid must have at least 256 points")
    grid = grid + (grid % 2)
    thetas = TWO_PI * np.arange(grid) / grid
    jets = graph_jets_batch(curve, thetas, n_max)
    half = grid // 2
    anti = (np.arange(grid) + half) % grid
    gaps = jets - jets[anti]                   # (grid, n_max-1), signed

    abs_gaps = np.abs(gaps)
    exceeds = abs_gaps > tol
    first = np.where(exceeds.any(axis=1), exceeds.argmax(axis=1) + 2, 0)
    orders = [int(f) if f else None for f in first]
    per_point = list(zip(thetas.tolist(), orders))

    centers = 0.5 * (curve.positions(thetas) + curve.positions(thetas + math.pi))
    center_mean = centers.mean(axis=0)
    center_dev = float(np.abs(centers - center_mean).max())

    if all(o is None for o in orders):
        if center_dev < center_tol:
            return AsymmetryCertificate(
                n_max=n_max, grid_size=grid, per_point_order=per_point,
                symmetric=True, symmetry_center=center_mean)
        worst = thetas[int(np.abs(centers - center_mean).sum(axis=1).argmax())]
        raise IndeterminateCertificate(
            "no jet difference up to n_max but antipodal midpoints are not "
            "constant; raise n_max", worst_theta=float(worst))

    if any(o is None for o in orders):
        worst = thetas[orders.index(None)]
        raise IndeterminateCertificate(
            f"mixed outcome: no jet difference up to {n_max} at theta="
            f"{worst:.6f} while other points differ", worst_theta=float(worst))

    n0 = max(orders)
    min_gap = float(min(abs_gaps[i, orders[i] - 2] for i in range(grid)))

    # refinement: bisect sign changes of the order-2 gap; at such zeros the
    # true asymmetry order exceeds 2
    g2 = gaps[:, 0]
    for i in range(grid):
        j = (i + 1) % grid
        if g2[i] == 0.0 or g2[i] * g2[j] >= 0.0:
            continue
        lo, hi = thetas[i], thetas[i] + TWO_PI / grid
        flo = g2[i]
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            pair = graph_jets_batch(curve, np.array([mid, mid + math.pi]), n_max)
            fmid = pair[0, 0] - pair[1, 0]
            if flo * fmid <= 0:
                hi = mid
            else:
                lo, flo = mid, fmid
        mid = 0.5 * (lo + hi)
        o = asymmetry_order(curve, mid, n_max, tol)
        if o is None:
            raise IndeterminateCertificate(
                "refined zero of the curvature gap shows no difference up to "
                f"{n_max} at theta={mid:.6f}", worst_theta=float(mid))
        per_point.append((float(mid), o))
        n0 = max(n0, o)

    return AsymmetryCertificate(
        n_max=n_max, grid_size=grid, per_point_order=per_point,
        symmetric=False, n0=n0, min_jet_gap=min_gap)


# ----------------------------------------------------------------------
# antipodal sums


def antipodal_sum(curve: CurveModel, theta):
    """k(theta) + a(k(theta)); constant 2p exactly when the curve is
    symmetric about p."""
    theta = np.asarray(theta, dtype=float)
    return curve.positions(theta) + curve.positions(theta + math.pi)


def antipodal_sum_speed(curve: CurveModel, theta):
    """Magnitude of the theta-derivative of the antipodal sum,
    |rho(theta) - rho(theta + pi)|."""
    theta = np.asarray(theta, dtype=float)
    return np.abs(curve.rho(theta) - curve.rho(theta + math.pi))


def antipodal_sum_critical(curve: CurveModel, grid: int = 4096):
    """Critical points of the antipodal-sum map.

    Returns a list of (theta, value) pairs where the map's speed vanishes;
    sub-level sets of |sum - value| around such values show the worst-case
    scaling.  For point-symmetric curves the map is constant and (0, 2p) is
    returned.
    """
    thetas = TWO_PI * np.arange(grid) / grid
    d = curve.rho(thetas) - curve.rho(thetas + math.pi)
    if np.abs(d).max() < 1e-12:
        return [(0.0, antipodal_sum(curve, 0.0))]
    out = []
    for i in range(grid):
        j = (i + 1) % grid
        if d[i] == 0.0:
            out.append(float(thetas[i]))
            continue
        if d[i] * d[j] >= 0:
            continue
        lo, hi, flo = thetas[i], thetas[i] + TWO_PI / grid, d[i]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fmid = float(curve.rho(np.array(mid)) - curve.rho(np.array(mid + math.pi)))
            if flo * fmid <= 0:
                hi = mid
            else:
                lo, flo = mid, fmid
        out.append(0.5 * (lo + hi))
    return [(t, antipodal_sum(curve, t)) for t in out]


def antipodal_sum_sublevel_length(curve: CurveModel, disk_center, eps: float,
                                  quad_points: int = 20000) -> float:
    """Arclength of {theta : |antipodal_sum(theta) - center| <= eps}.

    Sign changes of the indicator margin on a uniform grid are refined by
    bisection, so the result is exact up to features smaller than one grid
    cell (within 2 * total_length / quad_points as a coarse bound).
    """
    if quad_points < 10000:
        raise ValueError("quad_points must be at least 10^4")
    c = np.asarray(disk_center, dtype=float)
    thetas = TWO_PI * np.arange(quad_points) / quad_points
    gvals = np.linalg.norm(antipodal_sum(curve, thetas) - c, axis=-1) - eps

    def gfun(th):
        return float(np.linalg.norm(antipodal_sum(curve, np.array(th)) - c) - eps)

    crossings = []
    for i in range(quad_points):
        j = (i + 1) % quad_points
        if gvals[i] == 0.0:
            crossings.append(thetas[i])
            continue
        if gvals[i] * gvals[j] >= 0:
            continue
        lo, hi, flo = thetas[i], thetas[i] + TWO_PI / quad_points, gvals[i]
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            fmid = gfun(mid)
            if flo * fmid <= 0:
                hi = mid
            else:
                lo, flo = mid, fmid
        crossings.append(0.5 * (lo + hi))

    if not crossings:
        return curve.total_length if gvals[0] <= 0 else 0.0

    crossings = sorted(crossings)
    total = 0.0
    for idx, lo in enumerate(crossings):
        hi = crossings[(idx + 1) % len(crossings)]
        if hi <= lo:
            hi += TWO_PI
        mid = 0.5 * (lo + hi)
        if gfun(mid) <= 0:
            s_lo = float(curve.arclength(np.array(lo)))
            s_hi = float(curve.arclength(np.array(hi)))
            total += s_hi - s_lo
    return total
