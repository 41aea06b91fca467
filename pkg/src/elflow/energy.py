"""Penalized bending energy, its variations and the gradient field.

The energy of a curve is E = int (k^2 + mu) ds, evaluated by trapezoid
quadrature of the stencil curvature.  first_variation returns the exact
directional derivative of that discrete functional (computed by
complex-step differentiation of the same pipeline, so it matches the
central-difference oracle to machine precision and is exactly invariant
under horizontal translations).  gradient assembles the classical
interior field (2 k'' + k^3 - mu k) nu together with the two boundary
coefficients (-2 k' nu + mu tau)_x and their product-space dual norm,
which is what the flow monitors for criticality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstraintViolation, DimensionMismatch, NonPositiveMu
from .geometry import DiscreteCurve, GeometryCache, build_cache, curvature_fields

_CS_STEP = 1e-200  # complex-step size; exact to roundoff, immune to cancellation


@dataclass(frozen=True)
class VariationReport:
    """Analytic-vs-finite-difference record for one directional derivative."""

    analytic: float
    finite_difference: float
    eps: float
    abs_err: float
    rel_err: float
    observed_order: float

    def as_dict(self) -> dict:
        return {
            "analytic": self.analytic,
            "fd": self.finite_difference,
            "eps": self.eps,
            "abs_err": self.abs_err,
            "rel_err": self.rel_err,
            "observed_order": self.observed_order,
        }


@dataclass(frozen=True)
class GradientData:
    """Interior gradient field, boundary coefficients and their dual norm.

    interior[i] = (2 ds2_k + k^3 - mu k) nu at node i; boundary_coeff
    holds the x-components of (-2 ds_k nu + mu tau) at the two ends;
    dual_norm = sqrt(b0^2 + b1^2 + ||interior||^2_{L2(ds)}), the Riesz
    norm on the product of R^2 with L2.
    """

    interior: np.ndarray
    boundary_coeff: tuple
    dual_norm: float


def _check_field(curve: DiscreteCurve, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape != curve.nodes.shape:
        raise DimensionMismatch(
            f"field shape {X.shape} != nodes shape {curve.nodes.shape}")
    if curve.constrained and (X[0, 1] != 0.0 or X[-1, 1] != 0.0):
        raise ConstraintViolation(
            "variation field must keep constrained endpoints on the axis")
    return X


def _energy_of_nodes(nodes, mu):
    """Discrete energy of a raw node array; dtype-generic."""
    _, _, _, _, _, k, w = curvature_fields(nodes)
    return np.sum(w * (k * k + mu))


def energy(curve: DiscreteCurve, mu: float, cache: GeometryCache | None = None) -> float:
    """Trapezoid quadrature of k^2 + mu against ds."""
    if mu <= 0.0:
        raise NonPositiveMu(f"mu must be > 0, got {mu}")
    if cache is None:
        return float(_energy_of_nodes(curve.nodes, mu))
    return float(np.sum(cache.quad_w * (cache.k ** 2 + mu)))


def first_variation(curve: DiscreteCurve, mu: float, X) -> float:
    """Exact derivative of the discrete energy in direction X.

    Admissible directions keep constrained endpoints on the axis
    (X_y = 0 there); violating fields raise ConstraintViolation.
    """
    if mu <= 0.0:
        raise NonPositiveMu(f"mu must be > 0, got {mu}")
    X = _check_field(curve, X)
    shifted = curve.nodes.astype(complex)
    shifted += 1j * _CS_STEP * X
    return float(_energy_of_nodes(shifted, mu).imag / _CS_STEP)


def second_variation(curve: DiscreteCurve, mu: float, X, Y,
                     eta: float | None = None) -> float:
    """Semi-analytic second variation d^2E(X, Y).

    Centered difference in eta of the exact first variation along Y,
    applied to X.  Near a critical point this is symmetric in (X, Y) up
    to the O(eta^2) differencing error.
    """
    X = _check_field(curve, X)
    Y = _check_field(curve, Y)
    if eta is None:
        eta = 1e-4 * (1.0 + float(np.abs(curve.nodes).max()))
    plus = DiscreteCurve(curve.nodes + eta * Y, curve.constrained)
    minus = DiscreteCurve(curve.nodes - eta * Y, curve.constrained)
    return (first_variation(plus, mu, X) - first_variation(minus, mu, X)) / (2.0 * eta)


def verify_variation(curve: DiscreteCurve, mu: float, X, eps_list) -> VariationReport:
    """Compare the analytic first variation against central differences.

    eps_list needs at least two steps; the observed order comes from the
    first two, the reported finite_difference from the last.
    """
    eps_list = list(eps_list)
    if len(eps_list) < 2:
        raise ValueError("eps_list needs at least two entries")
    X = _check_field(curve, X)
    analytic = first_variation(curve, mu, X)
    nodes = curve.nodes

    def central(eps):
        ep = _energy_of_nodes(nodes + eps * X, mu)
        em = _energy_of_nodes(nodes - eps * X, mu)
        return float((ep - em) / (2.0 * eps))

    fds = [central(e) for e in eps_list]
    errs = [abs(f - analytic) for f in fds]
    e0, e1 = eps_list[0], eps_list[1]
    if errs[0] > 0.0 and errs[1] > 0.0 and e0 != e1:
        order = float(np.log(errs[0] / errs[1]) / np.log(e0 / e1))
    else:
        order = float("nan")
    fd = fds[-1]
    abs_err = errs[-1]
    denom = max(abs(analytic), abs(fd))
    rel_err = abs_err / denom if denom > 0.0 else 0.0
    return VariationReport(
        analytic=analytic,
        finite_difference=fd,
        eps=float(eps_list[-1]),
        abs_err=abs_err,
        rel_err=rel_err,
        observed_order=order,
    )


def boundary_coefficients(cache: GeometryCache, mu: float) -> tuple:
    """x-components of (-2 ds_k nu + mu tau) at the two endpoints."""
    b = []
    for e in (0, -1):
        b.append(float(-2.0 * cache.ds_k[e] * cache.nu[e, 0] + mu * cache.tau[e, 0]))
    return tuple(b)


def gradient(curve: DiscreteCurve, mu: float,
             cache: GeometryCache | None = None) -> GradientData:
    """Interior gradient field and boundary coefficients of the energy.

    A precomputed cache may be supplied; the shooting solver passes its
    ODE-state cache here, along which the interior field vanishes
    algebraically.
    """
    if mu <= 0.0:
        raise NonPositiveMu(f"mu must be > 0, got {mu}")
    if cache is None:
        cache = build_cache(curve)
    v = 2.0 * cache.ds2_k + cache.k ** 3 - mu * cache.k
    interior = v[:, None] * cache.nu
    b0, b1 = boundary_coefficients(cache, mu)
    dual = float(np.sqrt(b0 * b0 + b1 * b1 + np.sum(cache.quad_w * v * v)))
    return GradientData(interior=interior, boundary_coeff=(b0, b1), dual_norm=dual)
