"""Discrete planar curves and their arclength differential geometry.

A curve is a polyline sampled on the uniform parameter grid x_i = i/N.
Tangents come from second-order parameter stencils (one-sided at the
ends) and are normalized to unit length; the unit normal is the tangent
rotated by +pi/2, so a counterclockwise circle has oriented curvature
k = +1/R.  k and its arclength derivatives are produced by a three-point
first-derivative operator on the cumulative-chordlength grid, applied
repeatedly; boundary-layer nodes of the higher derivatives are replaced
by direct one-sided five-point stencils so every reported quantity keeps
(at least) second-order boundary accuracy.

All helpers are dtype-generic: the energy module reuses them with
complex nodes for complex-step differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroSegment

#: minimum number of segments: the one-sided fourth-order boundary rows
#: of the flow operator need this much room.
MIN_SEGMENTS = 16


# ---------------------------------------------------------------------------
# low-level stencils
# ---------------------------------------------------------------------------

def fd_weights(x, x0, m):
    """Finite-difference weights on arbitrary nodes (Fornberg's recursion).

    Returns the length-len(x) weight vector w such that
    sum(w * f(x)) approximates the m-th derivative of f at x0.
    """
    x = np.asarray(x)
    n = len(x)
    if m >= n:
        raise ValueError("need more than m points for an m-th derivative")
    c = np.zeros((n, m + 1), dtype=x.dtype)
    c1 = x[0] * 0 + 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = x[0] * 0 + 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 = c2 * c3
            if j == i - 1:
                for kk in range(mn, 0, -1):
                    c[i, kk] = c1 * (kk * c[i - 1, kk - 1] - c5 * c[i - 1, kk]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for kk in range(mn, 0, -1):
                c[j, kk] = (c4 * c[j, kk] - kk * c[j, kk - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def _norm2(v):
    """Euclidean norm along the last axis, analytic in the components.

    Written as sqrt(x*x + y*y) on purpose: np.linalg.norm takes moduli
    and would break complex-step differentiation.
    """
    return np.sqrt(v[..., 0] ** 2 + v[..., 1] ** 2)


def _rot90(v):
    """Rotate 2-vectors by +pi/2: (x, y) -> (-y, x)."""
    return np.stack((-v[..., 1], v[..., 0]), axis=-1)


def _param_d1(f, n_seg):
    """d/dx on the uniform parameter grid x_i = i/N, second order."""
    h = 1.0 / n_seg
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return out


def _bcast(w, f):
    """Reshape a weight vector so it broadcasts against per-node fields."""
    return w.reshape(w.shape + (1,) * (f.ndim - 1))


def ds_apply(s, f):
    """Arclength first derivative of per-node samples f on abscissae s.

    Three-point stencils: centered at interior nodes, one-sided at the
    two ends; every row is individually second-order accurate.
    """
    f = np.asarray(f)
    a = s[1:-1] - s[:-2]
    b = s[2:] - s[1:-1]
    w_lo = -b / (a * (a + b))
    w_mid = (b - a) / (a * b)
    w_hi = a / (b * (a + b))
    out = np.empty_like(f, dtype=np.result_type(f, s))
    out[1:-1] = (
        _bcast(w_lo, f) * f[:-2]
        + _bcast(w_mid, f) * f[1:-1]
        + _bcast(w_hi, f) * f[2:]
    )
    a0, b0 = s[1] - s[0], s[2] - s[1]
    out[0] = (
        -(2.0 * a0 + b0) / (a0 * (a0 + b0)) * f[0]
        + (a0 + b0) / (a0 * b0) * f[1]
        - a0 / ((a0 + b0) * b0) * f[2]
    )
    an, bn = s[-2] - s[-3], s[-1] - s[-2]
    out[-1] = (
        bn / (an * (an + bn)) * f[-3]
        - (an + bn) / (an * bn) * f[-2]
        + (2.0 * bn + an) / (bn * (an + bn)) * f[-1]
    )
    return out


def _trapezoid_weights(h):
    """Per-node trapezoid weights for integration against ds."""
    n = len(h) + 1
    w = np.zeros(n, dtype=h.dtype)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


# ---------------------------------------------------------------------------
# curve and cache types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteCurve:
    """Polyline representation of a regular curve gamma: [0,1] -> R^2.

    nodes has shape (N+1, 2) with node i at parameter x_i = i/N.  If
    constrained is set, both endpoints must lie exactly on the x-axis.
    The node array is copied and frozen at construction.
    """

    nodes: np.ndarray
    constrained: bool = False

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float, copy=True)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ValueError("nodes must have shape (N+1, 2)")
        if nodes.shape[0] < MIN_SEGMENTS + 1:
            raise ValueError(f"need at least {MIN_SEGMENTS} segments, "
                             f"got {nodes.shape[0] - 1}")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("nodes contain NaN/inf")
        seg = np.diff(nodes, axis=0)
        if np.any((seg[:, 0] == 0.0) & (seg[:, 1] == 0.0)):
            raise ZeroSegment("consecutive nodes coincide")
        if self.constrained and (nodes[0, 1] != 0.0 or nodes[-1, 1] != 0.0):
            raise ValueError("constrained curve must have y=0 exactly at "
                             "both endpoints")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_segments(self) -> int:
        return self.nodes.shape[0] - 1

    def translated(self, dx: float, dy: float = 0.0) -> "DiscreteCurve":
        # a vertical shift of a constrained curve fails attachment in
        # the constructor, which is the intended behavior
        return DiscreteCurve(self.nodes + np.array([dx, dy]), self.constrained)


@dataclass(frozen=True)
class GeometryCache:
    """Per-node arclength geometry derived from a DiscreteCurve.

    seg_len are the chord lengths h_i, total_len their sum; tau/nu the
    unit tangent/normal frames; k the oriented curvature and ds_k,
    ds2_k, ds3_k its first three arclength derivatives.  s (cumulative
    chord length), quad_w (trapezoid ds weights) and param_speed
    (|dgamma/dx|) are kept because nearly every consumer needs them.
    """

    seg_len: np.ndarray
    total_len: float
    tau: np.ndarray
    nu: np.ndarray
    k: np.ndarray
    ds_k: np.ndarray
    ds2_k: np.ndarray
    ds3_k: np.ndarray
    s: np.ndarray
    quad_w: np.ndarray
    param_speed: np.ndarray


def curvature_fields(nodes):
    """Chord lengths, arclength grid, frame and curvature for raw nodes.

    The oriented curvature at an interior node is the signed turning
    angle between the adjacent chords divided by their mean length (the
    second-order realization of <d tau/ds, nu> whose quadratic bias is
    arc-consistent: paired with chord trapezoid weights it integrates
    k^2 + mu exactly to O(h^4) on circles at the balanced radius).  The
    angle is evaluated as 2*atan(cross / (|d-||d+| + dot)), which is
    analytic in the node coordinates, so the same code path serves
    complex-step differentiation.  Endpoint curvatures are quadratic
    extrapolations along arclength.

    Returns (h, s, q, tau, nu, k, quad_w).
    """
    n_seg = nodes.shape[0] - 1
    d = np.diff(nodes, axis=0)
    h = _norm2(d)
    s = np.concatenate((np.zeros(1, dtype=h.dtype), np.cumsum(h)))
    v = _param_d1(nodes, n_seg)
    q = _norm2(v)
    tau = v / q[:, None]
    nu = _rot90(tau)
    cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
    dot = d[:-1, 0] * d[1:, 0] + d[:-1, 1] * d[1:, 1]
    alpha = 2.0 * np.arctan(cross / (h[:-1] * h[1:] + dot))
    k = np.empty(n_seg + 1, dtype=s.dtype)
    k[1:-1] = alpha / (0.5 * (h[:-1] + h[1:]))
    k[0] = np.dot(fd_weights(s[1:4], s[0], 0), k[1:4])
    k[-1] = np.dot(fd_weights(s[-4:-1], s[-1], 0), k[-4:-1])
    return h, s, q, tau, nu, k, _trapezoid_weights(h)


def _direct_boundary(values, s, m, out, idx):
    """Overwrite out[idx] with direct 5-point one-sided m-th derivatives."""
    n = len(s)
    for i in idx:
        win = np.arange(0, 5) if i < n // 2 else np.arange(n - 5, n)
        w = fd_weights(s[win], s[i], m)
        out[i] = np.dot(w, values[win])


def build_cache(curve: DiscreteCurve) -> GeometryCache:
    """Assemble the full geometry cache for a curve.

    Raises ZeroSegment for coincident consecutive nodes (normally
    already rejected by the DiscreteCurve constructor).
    """
    nodes = curve.nodes
    h, s, q, tau, nu, k, w = curvature_fields(nodes)
    if np.any(h == 0.0):
        raise ZeroSegment("consecutive nodes coincide")
    n = len(k)
    ds_k = ds_apply(s, k)
    ds2_k = ds_apply(s, ds_k)
    _direct_boundary(k, s, 2, ds2_k, (0, 1, n - 2, n - 1))
    ds3_k = ds_apply(s, ds2_k)
    _direct_boundary(k, s, 3, ds3_k, (0, 1, 2, n - 3, n - 2, n - 1))
    return GeometryCache(
        seg_len=h,
        total_len=float(np.sum(h)),
        tau=tau,
        nu=nu,
        k=k,
        ds_k=ds_k,
        ds2_k=ds2_k,
        ds3_k=ds3_k,
        s=s,
        quad_w=w,
        param_speed=q,
    )


def bounding_box(curve: DiscreteCurve):
    """(xmin, xmax, ymin, ymax) over the nodes."""
    nodes = curve.nodes
    return (
        float(nodes[:, 0].min()),
        float(nodes[:, 0].max()),
        float(nodes[:, 1].min()),
        float(nodes[:, 1].max()),
    )


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(8)


def _spline_arclengths(spl, a, b):
    """Arclength of a (vector-valued) spline over each interval [a_i, b_i]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    pts = mid + half * _GAUSS_X[None, :]
    speed = _norm2(spl(pts.ravel(), 1)).reshape(pts.shape)
    return (speed * _GAUSS_W[None, :]).sum(axis=1) * half[:, 0]


def resample_uniform(curve: DiscreteCurve, m_segments: int) -> DiscreteCurve:
    """Resample to m_segments+1 nodes equally spaced in arclength.

    The polyline is interpolated by a not-a-knot cubic spline in the
    cumulative-chordlength parameter; new nodes sit at equal arclength
    along the spline (solved by Newton to ~1e-12).  Endpoints are kept
    exactly.
    """
    from scipy.interpolate import CubicSpline

    if m_segments < MIN_SEGMENTS:
        raise ValueError(f"m_segments must be >= {MIN_SEGMENTS}")
    nodes = curve.nodes
    h = _norm2(np.diff(nodes, axis=0))
    s = np.concatenate(([0.0], np.cumsum(h)))
    spl = CubicSpline(s, nodes, bc_type="not-a-knot")

    sigma_int = _spline_arclengths(spl, s[:-1], s[1:])
    sigma = np.concatenate(([0.0], np.cumsum(sigma_int)))
    total = sigma[-1]
    targets = np.linspace(0.0, total, m_segments + 1)[1:-1]

    # initial guess: invert the piecewise-linear arclength table
    u = np.interp(targets, sigma, s)
    cell = np.clip(np.searchsorted(sigma, targets) - 1, 0, len(s) - 2)
    base = sigma[cell]
    anchor = s[cell]
    for _ in range(4):
        arc = base + _spline_arclengths(spl, anchor, u)
        speed = _norm2(spl(u, 1))
        u = u - (arc - targets) / speed
        u = np.clip(u, 0.0, s[-1])

    new_nodes = np.empty((m_segments + 1, 2))
    new_nodes[0] = nodes[0]
    new_nodes[-1] = nodes[-1]
    new_nodes[1:-1] = spl(u)
    if curve.constrained:
        new_nodes[0, 1] = 0.0
        new_nodes[-1, 1] = 0.0
    return DiscreteCurve(new_nodes, constrained=curve.constrained)


# ---------------------------------------------------------------------------
# integration-by-parts defect
# ---------------------------------------------------------------------------

def discrete_ibp_defect(X, Y, cache: GeometryCache) -> float:
    """|LHS - RHS| of the tangential-projection integration by parts.

    With P the projection off the unit tangent, the identity reads

        int <P dX/ds, Y> ds = - int <X, P dY/ds> ds
                              + int <X,tau><Y, dtau/ds> + <X, dtau/ds><Y,tau> ds
                              + [<P X, Y>]_0^1

    and the defect measures how well the discrete d/ds operator and the
    trapezoid quadrature honor it.  For normal fields the middle
    integral vanishes identically.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = len(cache.k)
    if X.shape != (n, 2) or Y.shape != (n, 2):
        raise DimensionMismatch("fields must have shape (N+1, 2)")
    s, w, tau = cache.s, cache.quad_w, cache.tau

    def perp(v):
        return v - (v[:, 0] * tau[:, 0] + v[:, 1] * tau[:, 1])[:, None] * tau

    dX = ds_apply(s, X)
    dY = ds_apply(s, Y)
    dtau = ds_apply(s, tau)

    def dots(a, b):
        return a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]

    lhs = np.sum(w * dots(perp(dX), Y))
    correction = np.sum(w * (dots(X, tau) * dots(Y, dtau)
                             + dots(X, dtau) * dots(Y, tau)))
    xperp = perp(X)
    boundary = dots(xperp, Y)[-1] - dots(xperp, Y)[0]
    rhs = -np.sum(w * dots(X, perp(dY))) + correction + boundary
    return float(abs(lhs - rhs))


# ---------------------------------------------------------------------------
# polyline comparison
# ---------------------------------------------------------------------------

def _max_dist_to_polyline(P, Q, chunk=512):
    """max over points P of the distance to the polyline with nodes Q."""
    A, B = Q[:-1], Q[1:]
    d = B - A
    dd = np.einsum("ij,ij->i", d, d)
    worst = 0.0
    for lo in range(0, len(P), chunk):
        p = P[lo:lo + chunk]
        ap = p[:, None, :] - A[None, :, :]
        t = np.clip(np.einsum("pij,ij->pi", ap, d) / dd[None, :], 0.0, 1.0)
        closest = A[None, :, :] + t[:, :, None] * d[None, :, :]
        dist = _norm2(p[:, None, :] - closest).min(axis=1)
        worst = max(worst, float(dist.max()))
    return worst


def hausdorff_distance(a, b) -> float:
    """Symmetric Hausdorff distance between two polylines (node arrays)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return max(_max_dist_to_polyline(a, b), _max_dist_to_polyline(b, a))


def align_horizontal(a, b):
    """Shift polyline a along x to best match b.

    Returns (shift, distance): the x-translation applied to a and the
    resulting Hausdorff distance.  Horizontal translations are the
    symmetry of the endpoint constraint, so comparisons of flow limits
    against directly computed critical points are made modulo this
    shift.
    """
    from scipy.optimize import minimize_scalar

    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    guess = float(np.mean(b[:, 0]) - np.mean(a[:, 0]))
    span = max(np.ptp(a[:, 0]), np.ptp(b[:, 0]), 1e-6)

    def cost(c):
        return hausdorff_distance(a + np.array([c, 0.0]), b)

    res = minimize_scalar(cost, bounds=(guess - span, guess + span),
                          method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x), float(res.fun)
