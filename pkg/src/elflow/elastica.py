"""Critical points of the penalized bending energy by shooting.

A stationary curve satisfies 2 k'' + k^3 - mu k = 0 along its length
together with zero curvature at both ends, endpoints on the x-axis and
the third-order (sliding) conditions (-2 k' nu + mu tau)_x = 0.  The
solver integrates the first-order system

    k' = w,   w' = (mu k - k^3)/2,   theta' = k,
    x' = cos(theta),  y' = sin(theta)

from k(0) = 0, w(0) = a, theta(0) = phi0, gamma(0) = 0 with classical
fixed-step RK4 and runs damped Newton on the terminal residuals.  The
left sliding condition fixes a = -mu cos(phi0) / (2 sin(phi0)); because
the contact force is conserved along exact solutions, the right sliding
condition then holds automatically, leaving the square 2x2 system
(k(L), y(L)) = 0 in (phi0, L).  The full 3x3 formulation (unknown a,
residuals including the left sliding condition) is kept as an
alternative.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence, NonFinite, SingularJacobian
from .geometry import DiscreteCurve, GeometryCache, _norm2, _trapezoid_weights
from . import energy as _energy_mod

DEFAULT_N_STEPS = 2048


class ElasticaKind(enum.Enum):
    ARC = "arc"
    LOOP = "loop"


@dataclass(frozen=True)
class ShootingParams:
    """Launch data of the stationarity ODE: a = k'(0), phi0, total length L."""

    a: float
    phi0: float
    L: float

    def __post_init__(self):
        if not (self.L > 0.0):
            raise ValueError("L must be positive")
        if not (0.0 < self.phi0 < np.pi):
            raise ValueError("phi0 must lie in (0, pi) so the launch leaves "
                             "the axis upward")


def eliminated_a(phi0: float, mu: float) -> float:
    """k'(0) enforcing the left sliding condition 2 a sin(phi0) + mu cos(phi0) = 0."""
    return -mu * np.cos(phi0) / (2.0 * np.sin(phi0))


def _rhs(state, mu):
    k, w, th = state[0], state[1], state[2]
    return np.stack((
        w,
        0.5 * (mu * k - k ** 3),
        k,
        np.cos(th),
        np.sin(th),
    ))


def _rk4_path(state0, mu, L, n_steps):
    """Integrate and keep the whole path; state0 may be (5,) or (5, m)."""
    ds = L / n_steps
    path = np.empty((n_steps + 1,) + np.shape(state0))
    path[0] = state0
    y = np.array(state0, dtype=float)
    for i in range(n_steps):
        k1 = _rhs(y, mu)
        k2 = _rhs(y + 0.5 * ds * k1, mu)
        k3 = _rhs(y + 0.5 * ds * k2, mu)
        k4 = _rhs(y + ds * k3, mu)
        y = y + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        path[i + 1] = y
    return path


def integrate_shooting(params: ShootingParams, mu: float,
                       n_steps: int = DEFAULT_N_STEPS):
    """Integrate the stationarity system; returns (curve, terminal).

    terminal is (k(L), k'(L), theta(L), (x(L), y(L))).  The returned
    curve keeps the integration nodes, which are uniform in arclength by
    construction.
    """
    if n_steps < 64:
        raise ValueError("n_steps must be >= 64")
    state0 = np.array([0.0, params.a, params.phi0, 0.0, 0.0])
    path = _rk4_path(state0, mu, params.L, n_steps)
    if not np.all(np.isfinite(path[-1])):
        raise NonFinite("shooting state blew up")
    kL, wL, thL, xL, yL = path[-1]
    curve = DiscreteCurve(path[:, 3:5])
    return curve, (float(kL), float(wL), float(thL), (float(xL), float(yL)))


def _terminal(a, phi0, L, mu, n_steps):
    state0 = np.array([0.0, a, phi0, 0.0, 0.0])
    return _rk4_path(state0, mu, L, n_steps)[-1]


def third_order_value(w, theta, mu):
    """x-component of (-2 k' nu + mu tau) for tangent angle theta."""
    return 2.0 * w * np.sin(theta) + mu * np.cos(theta)


def residual_vector(params: ShootingParams, mu: float,
                    n_steps: int = DEFAULT_N_STEPS) -> np.ndarray:
    """(k(L), y(L), sliding residual at 0, sliding residual at L)."""
    kL, wL, thL, _, yL = _terminal(params.a, params.phi0, params.L, mu, n_steps)
    if not np.isfinite(kL):
        raise NonFinite("shooting state blew up")
    r3 = third_order_value(params.a, params.phi0, mu)
    r4 = third_order_value(wL, thL, mu)
    return np.array([kL, yL, r3, r4])


# ---------------------------------------------------------------------------
# Newton
# ---------------------------------------------------------------------------

_PHI_LO, _PHI_HI = 1e-3, np.pi - 1e-3


def _newton(fun, z0, bounds_lo, bounds_hi, tol, max_iter):
    """Damped Newton with central-difference Jacobian and box projection."""
    z = np.array(z0, dtype=float)
    r = fun(z)
    for _ in range(max_iter):
        nr = np.max(np.abs(r))
        if nr <= tol:
            return z, r
        m = len(z)
        J = np.empty((len(r), m))
        for j in range(m):
            hj = 1e-6 * (1.0 + abs(z[j]))
            zp = z.copy(); zp[j] += hj
            zm = z.copy(); zm[j] -= hj
            J[:, j] = (fun(zp) - fun(zm)) / (2.0 * hj)
        try:
            dz = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from None
        if not np.all(np.isfinite(dz)):
            raise SingularJacobian("non-finite Newton step")
        stepped = False
        for lam in (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125):
            zt = np.clip(z + lam * dz, bounds_lo, bounds_hi)
            rt = fun(zt)
            if np.all(np.isfinite(rt)) and np.max(np.abs(rt)) < nr:
                z, r = zt, rt
                stepped = True
                break
        if not stepped:
            raise NoConvergence("line search stalled")
    if np.max(np.abs(r)) <= tol:
        return z, r
    raise NoConvergence(f"residual {np.max(np.abs(r)):.3e} after {max_iter} iterations")


@dataclass
class ElasticaSolution:
    """A converged critical point with its launch data and residuals."""

    mu: float
    params: ShootingParams
    curve: DiscreteCurve
    ode_residual: float
    bc_residuals: dict
    kind: ElasticaKind
    energy: float
    degenerate: bool = False
    endpoint_gap: float = 0.0
    # raw ODE samples (k, w, theta) on the integration grid, kept so
    # downstream checks can avoid re-differencing the node polyline
    k_samples: np.ndarray = field(default=None, repr=False)
    w_samples: np.ndarray = field(default=None, repr=False)
    theta_samples: np.ndarray = field(default=None, repr=False)

    def geometry_cache(self) -> GeometryCache:
        """Geometry cache built from the ODE state instead of stencils.

        tau/nu come from theta, the curvature chain from (k, w) and the
        stationarity equation itself, so the derived quantities carry
        integrator accuracy (~1e-10) rather than stencil truncation.
        """
        k, w, th = self.k_samples, self.w_samples, self.theta_samples
        mu = self.mu
        nodes = self.curve.nodes
        h = _norm2(np.diff(nodes, axis=0))
        n = len(k)
        ds = self.params.L / (n - 1)
        s = ds * np.arange(n)
        tau = np.stack((np.cos(th), np.sin(th)), axis=-1)
        nu = np.stack((-np.sin(th), np.cos(th)), axis=-1)
        ds2 = 0.5 * (mu * k - k ** 3)
        ds3 = 0.5 * (mu * w - 3.0 * k ** 2 * w)
        w_quad = np.full(n, ds)
        w_quad[0] = w_quad[-1] = 0.5 * ds
        return GeometryCache(
            seg_len=h, total_len=float(np.sum(h)), tau=tau, nu=nu,
            k=k, ds_k=w, ds2_k=ds2, ds3_k=ds3, s=s, quad_w=w_quad,
            param_speed=np.full(n, self.params.L),
        )

    def gradient_data(self):
        """Gradient of the energy seen through the ODE-state cache."""
        return _energy_mod.gradient(self.curve, self.mu, cache=self.geometry_cache())

    def check_admissible(self, rho: float = 1e-3, tol: float = 1e-6):
        """Admissibility report evaluated from the ODE state (exact)."""
        from .flow import AdmissibilityReport

        k, w, th = self.k_samples, self.w_samples, self.theta_samples
        L, mu = self.params.L, self.mu
        resid = {}
        margins = {}
        for label, e in (("0", 0), ("1", -1)):
            resid[f"attachment_{label}"] = abs(float(self.curve.nodes[e, 1]))
            # constant-speed parametrization: d2 gamma/dx2 = L^2 k nu
            resid[f"curvature_{label}"] = float(L * L * abs(k[e]))
            resid[f"third_order_{label}"] = abs(third_order_value(w[e], th[e], mu))
            v = -(2.0 * 0.5 * (mu * k[e] - k[e] ** 3) + k[e] ** 3 - mu * k[e])
            resid[f"fourth_order_{label}"] = abs(float(v * np.cos(th[e])))
            margins[f"nondegeneracy_{label}"] = float(np.sin(th[e]) - rho)
        passed = all(v <= tol for v in resid.values()) and \
            all(m >= 0.0 for m in margins.values())
        return AdmissibilityReport(residuals=resid, margins=margins,
                                   rho=rho, tol=tol, passed=passed)

    def as_dict(self) -> dict:
        gap = self.endpoint_gap
        return {
            "mu": self.mu,
            "a": self.params.a,
            "phi0": self.params.phi0,
            "L": self.params.L,
            "kind": self.kind.value,
            "energy": self.energy,
            "degenerate": self.degenerate,
            "endpoint_gap": gap,
            "mu_gap_ratio": self.mu / gap if gap > 0.0 else float("inf"),
            "residuals": dict(self.bc_residuals, ode=self.ode_residual),
        }


def _proper_crossing(nodes, chunk=256) -> bool:
    """True if any two non-adjacent segments cross transversally.

    Touches at shared points (including the coincident-endpoint pinch of
    converged critical points) do not count: the test uses strict
    orientation inequalities.
    """
    P, Q = nodes[:-1], nodes[1:]
    n = len(P)

    def cross(o, a, b):
        return ((a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1])
                - (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0]))

    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        A = P[lo:hi, None, :]
        B = Q[lo:hi, None, :]
        C = P[None, :, :]
        D = Q[None, :, :]
        d1 = cross(A, B, C)
        d2 = cross(A, B, D)
        d3 = cross(C, D, A)
        d4 = cross(C, D, B)
        hit = (d1 * d2 < 0.0) & (d3 * d4 < 0.0)
        # mask adjacent pairs
        i = np.arange(lo, hi)[:, None]
        j = np.arange(n)[None, :]
        hit &= np.abs(i - j) > 1
        if np.any(hit):
            return True
    return False


def classify(solution: ElasticaSolution) -> ElasticaKind:
    """Loop iff the tangent angle varies by at least 2*pi in total or
    the curve crosses itself transversally; otherwise arc."""
    if solution.degenerate:
        return ElasticaKind.ARC
    tv = float(np.sum(np.abs(np.diff(solution.theta_samples))))
    if tv >= 2.0 * np.pi - 1e-9:
        return ElasticaKind.LOOP
    if _proper_crossing(solution.curve.nodes):
        return ElasticaKind.LOOP
    return ElasticaKind.ARC


def _ode_residual_refined(params: ShootingParams, mu: float, n_steps: int) -> float:
    """max |2 k'' + k^3 - mu k| with k'' from 4th-order stencils on a
    doubled integration grid (independent of the integrator's own k'')."""
    state0 = np.array([0.0, params.a, params.phi0, 0.0, 0.0])
    path = _rk4_path(state0, mu, params.L, 2 * n_steps)
    k = path[:, 0]
    h = params.L / (2 * n_steps)
    kxx = (-k[4:] + 16.0 * k[3:-1] - 30.0 * k[2:-2] + 16.0 * k[1:-3] - k[:-4]) \
        / (12.0 * h * h)
    res = 2.0 * kxx + k[2:-2] ** 3 - mu * k[2:-2]
    return float(np.max(np.abs(res)))


def _assemble_solution(z, mu, n_steps, mode) -> ElasticaSolution:
    from scipy.integrate import simpson

    if mode == "eliminated":
        phi0, L = z
        a = eliminated_a(phi0, mu)
    else:
        a, phi0, L = z
    params = ShootingParams(a=float(a), phi0=float(phi0), L=float(L))
    state0 = np.array([0.0, a, phi0, 0.0, 0.0])
    path = _rk4_path(state0, mu, L, n_steps)
    k, w, th = path[:, 0], path[:, 1], path[:, 2]
    nodes = path[:, 3:5].copy()
    attach = abs(float(nodes[-1, 1]))
    gap = abs(float(nodes[-1, 0] - nodes[0, 0]))
    nodes[0, 1] = 0.0
    nodes[-1, 1] = 0.0  # snap the converged attachment residual
    curve = DiscreteCurve(nodes, constrained=True)
    ds = L / n_steps
    e_val = float(simpson(k ** 2 + mu, dx=ds))
    bc = {
        "curvature_0": abs(float(k[0])),
        "curvature_1": abs(float(k[-1])),
        "attachment_1": attach,
        "third_order_0": abs(float(third_order_value(w[0], th[0], mu))),
        "third_order_1": abs(float(third_order_value(w[-1], th[-1], mu))),
    }
    sol = ElasticaSolution(
        mu=mu, params=params, curve=curve,
        ode_residual=_ode_residual_refined(params, mu, n_steps),
        bc_residuals=bc, kind=ElasticaKind.ARC, energy=e_val,
        degenerate=bool(np.max(np.abs(k)) < 1e-8),
        endpoint_gap=gap,
        k_samples=k, w_samples=w, theta_samples=th,
    )
    sol.kind = classify(sol)
    return sol


def solve(mu: float, guess: ShootingParams, n_steps: int = DEFAULT_N_STEPS,
          tol: float = 1e-11, max_iter: int = 100,
          mode: str = "eliminated") -> ElasticaSolution:
    """Damped Newton from a shooting guess.

    mode="eliminated" (default) solves the 2x2 system (k(L), y(L)) over
    (phi0, L) with a tied to phi0 by the left sliding condition;
    mode="full" solves the 3x3 system including that condition with a
    free.  Degenerate straight-line fixed points are rejected.
    """
    if mode == "eliminated":
        def fun(z):
            phi0, L = z
            kL, _, _, _, yL = _terminal(eliminated_a(phi0, mu), phi0, L, mu, n_steps)
            return np.array([kL, yL])

        lo = np.array([_PHI_LO, 0.05 / np.sqrt(mu)])
        hi = np.array([_PHI_HI, 60.0 / np.sqrt(mu)])
        z0 = np.array([guess.phi0, guess.L])
    elif mode == "full":
        def fun(z):
            a, phi0, L = z
            kL, _, _, _, yL = _terminal(a, phi0, L, mu, n_steps)
            return np.array([kL, yL, third_order_value(a, phi0, mu)])

        lo = np.array([-np.inf, _PHI_LO, 0.05 / np.sqrt(mu)])
        hi = np.array([np.inf, _PHI_HI, 60.0 / np.sqrt(mu)])
        z0 = np.array([guess.a, guess.phi0, guess.L])
    else:
        raise ValueError(f"unknown mode {mode!r}")

    z, _ = _newton(fun, z0, lo, hi, tol, max_iter)
    sol = _assemble_solution(z, mu, n_steps, mode)
    if sol.degenerate:
        raise NoConvergence("converged to the degenerate straight line")
    return sol


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

def _scan_grid(mu, phi0_grid, L_max, n_coarse):
    """Batched RK4 over all phi0 at once; returns y(L) and k(L) tables."""
    a = eliminated_a(phi0_grid, mu)
    state0 = np.stack((np.zeros_like(a), a, phi0_grid,
                       np.zeros_like(a), np.zeros_like(a)))
    path = _rk4_path(state0, mu, L_max, n_coarse)  # (n+1, 5, m)
    return path


def solve_all(mu: float, n_phi: int = 41, n_L: int = 48,
              L_span=(0.5, 6.0), n_steps: int = DEFAULT_N_STEPS,
              max_solutions: int = 12) -> list:
    """Scan a coarse (phi0, L) grid and polish every bracketed root.

    Seeds are grid cells where the attachment residual y(L) changes sign
    along L; duplicates are merged by parameter distance 1e-6.  Returns
    solutions sorted by length.
    """
    phi0_grid = np.linspace(0.1, np.pi - 0.1, n_phi)
    L_lo, L_hi = L_span[0] / np.sqrt(mu), L_span[1] / np.sqrt(mu)
    n_coarse = 512
    path = _scan_grid(mu, phi0_grid, L_hi, n_coarse)
    s_grid = np.linspace(0.0, L_hi, n_coarse + 1)
    Lj = np.linspace(L_lo, L_hi, n_L)
    idx = np.clip(np.round(Lj / L_hi * n_coarse).astype(int), 0, n_coarse)
    yT = path[idx, 4, :]   # (n_L, n_phi)

    solutions = []
    for ip in range(len(phi0_grid)):
        sign_change = np.nonzero(yT[:-1, ip] * yT[1:, ip] < 0.0)[0]
        for j in sign_change:
            guess = ShootingParams(a=eliminated_a(phi0_grid[ip], mu),
                                   phi0=float(phi0_grid[ip]),
                                   L=float(0.5 * (Lj[j] + Lj[j + 1])))
            try:
                sol = solve(mu, guess, n_steps=n_steps)
            except (NoConvergence, SingularJacobian, NonFinite, ValueError):
                continue
            if _is_duplicate(sol, solutions):
                continue
            solutions.append(sol)
            if len(solutions) >= max_solutions:
                break
    solutions.sort(key=lambda s: s.params.L)
    return solutions


def _is_duplicate(sol, solutions, tol=1e-6) -> bool:
    for other in solutions:
        d = max(abs(sol.params.a - other.params.a),
                abs(sol.params.phi0 - other.params.phi0),
                abs(sol.params.L - other.params.L))
        if d <= tol * (1.0 + abs(other.params.L)):
            return True
    return False


def reference_arc(mu: float, n_steps: int = DEFAULT_N_STEPS) -> ElasticaSolution:
    """The shortest arc-type critical point for this mu (the flow's
    generic attractor); raises NoConvergence if the scan finds none."""
    for sol in solve_all(mu, n_steps=n_steps):
        if sol.kind is ElasticaKind.ARC and not sol.degenerate:
            return sol
    raise NoConvergence(f"no arc-type critical point found for mu={mu}")
