"""Evolution of constrained curves by the penalized elastic flow.

The normal velocity is V = -(2 ds2_k + k^3 - mu k); time stepping is
linearly implicit: the parameter-form leading term -2 |dgamma/dx|^-4
d^4 gamma/dx^4 is frozen-coefficient implicit, everything else explicit,
which leaves two decoupled banded systems (bandwidth 9) per step - one
per coordinate.  Boundary rows impose the attachment (y = 0), the
parameter second-derivative condition d2 gamma/dx2 = 0 and the sliding
condition (-2 d3x/ds3 + mu dx/ds) = 0 (one-sided stencils, valid because
the same system enforces zero curvature at the ends).  Tangential motion
is a reparametrization; the curve is resampled to uniform arclength on a
fixed cadence whenever the grid has drifted.

Stops: dissipation below tolerance (converged), the time horizon, length
collapse, loss of transversality at an endpoint, or a failed step after
ten dt-halvings.
"""

from __future__ import annotations

import enum
import time as _time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import AdmissibilityError, StepFailure, ZeroSegment
from .energy import boundary_coefficients
from .geometry import (
    DiscreteCurve,
    GeometryCache,
    build_cache,
    fd_weights,
    resample_uniform,
)

_BANDWIDTH = 4  # lower/upper bandwidth of the step matrices


class StopReason(enum.Enum):
    CONVERGED = "Converged"
    MAX_TIME = "MaxTimeReached"
    LENGTH_COLLAPSE = "LengthCollapse"
    BOUNDARY_TANGENCY = "BoundaryTangency"
    STEP_FAILURE = "StepFailure"


@dataclass(frozen=True)
class FlowConfig:
    """Parameters of one flow run.

    dt=None selects the default 0.1 * (l/N)^2 from the initial length.
    rho_min is the transversality floor at the endpoints, len_min the
    length-collapse threshold, u_tol the convergence threshold on the
    dissipation.
    """

    mu: float
    n_nodes: int = 200
    dt: float | None = None
    t_max: float = 50.0
    u_tol: float = 1e-8
    rho_min: float = 1e-3
    len_min: float = 1e-2
    reparam_every: int = 5
    snapshot_every: int = 25

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError("mu must be positive")
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.n_nodes < 16:
            raise ValueError("n_nodes must be >= 16")
        if self.t_max < 0.0:
            raise ValueError("t_max must be >= 0")
        for name in ("u_tol", "len_min", "reparam_every", "snapshot_every"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 < self.rho_min < 1.0):
            raise ValueError("rho_min must lie in (0, 1)")

    def as_dict(self) -> dict:
        return {
            "mu": self.mu, "n_nodes": self.n_nodes, "dt": self.dt,
            "t_max": self.t_max, "u_tol": self.u_tol,
            "rho_min": self.rho_min, "len_min": self.len_min,
            "reparam_every": self.reparam_every,
            "snapshot_every": self.snapshot_every,
        }


@dataclass(frozen=True)
class FlowState:
    """Curve, time and derived geometry at one instant of the flow."""

    curve: DiscreteCurve
    time: float
    cache: GeometryCache


TRACE_COLUMNS = ("t", "energy", "dissipation", "length",
                 "xmin", "xmax", "ymin", "ymax", "tangency", "dual_norm")


class FlowTrace:
    """Time series of scalar observables sampled along a run."""

    columns = TRACE_COLUMNS

    def __init__(self, data=None):
        self._rows = [] if data is None else [tuple(r) for r in np.atleast_2d(data)]

    def append(self, row):
        if len(row) != len(TRACE_COLUMNS):
            raise ValueError("bad trace row")
        if self._rows and row[0] <= self._rows[-1][0]:
            raise ValueError("trace times must be strictly increasing")
        self._rows.append(tuple(float(v) for v in row))

    def __len__(self):
        return len(self._rows)

    @property
    def data(self) -> np.ndarray:
        return np.array(self._rows, dtype=float).reshape(len(self._rows),
                                                         len(TRACE_COLUMNS))

    def column(self, name: str) -> np.ndarray:
        return self.data[:, TRACE_COLUMNS.index(name)]

    @property
    def t(self):
        return self.column("t")

    @property
    def energy(self):
        return self.column("energy")

    @property
    def dissipation(self):
        return self.column("dissipation")

    @property
    def length(self):
        return self.column("length")

    @property
    def dual_norm(self):
        return self.column("dual_norm")

    def bbox_diameters(self) -> np.ndarray:
        d = self.data
        return np.hypot(d[:, 5] - d[:, 4], d[:, 7] - d[:, 6])


@dataclass
class FlowResult:
    """Everything run() produces: final state, trace, reason, snapshots."""

    final: FlowState
    trace: FlowTrace
    reason: StopReason
    snapshots: list
    dt: float
    steps: int
    wall_time: float

    def __iter__(self):
        # allow final, trace, reason = run(...)
        return iter((self.final, self.trace, self.reason))


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissibilityReport:
    """Named boundary residuals + transversality margins of an initial curve."""

    residuals: dict
    margins: dict
    rho: float
    tol: float
    passed: bool

    def as_dict(self) -> dict:
        return {"residuals": dict(self.residuals), "margins": dict(self.margins),
                "rho": self.rho, "tol": self.tol, "passed": self.passed}

    def worst(self) -> float:
        return max(self.residuals.values())


def check_admissible(curve: DiscreteCurve, mu: float, rho: float = 1e-3,
                     tol: float = 1e-6,
                     cache: GeometryCache | None = None) -> AdmissibilityReport:
    """Boundary residual report for initial data.

    Checks, at both endpoints: attachment |y|, the parameter
    second-derivative condition |d2 gamma/dx2|, the sliding condition
    |(-2 ds_k nu + mu tau)_x|, the transversality margin tau_y - rho,
    and the fourth-order compatibility |((-2 ds2_k - k^3 + mu k) nu)_y|.
    One-sided stencils put a resolution-dependent floor (~h^2 curve
    scale) under these residuals for generic sampled curves; exact
    shooting solutions evaluate the same report from their ODE state via
    ElasticaSolution.check_admissible.
    """
    if cache is None:
        cache = build_cache(curve)
    nodes = curve.nodes
    n_seg = curve.n_segments
    h = 1.0 / n_seg
    d2_0 = (2.0 * nodes[0] - 5.0 * nodes[1] + 4.0 * nodes[2] - nodes[3]) / h ** 2
    d2_1 = (2.0 * nodes[-1] - 5.0 * nodes[-2] + 4.0 * nodes[-3] - nodes[-4]) / h ** 2
    residuals = {}
    margins = {}
    for label, e, d2 in (("0", 0, d2_0), ("1", -1, d2_1)):
        residuals[f"attachment_{label}"] = abs(float(nodes[e, 1]))
        residuals[f"curvature_{label}"] = float(np.hypot(*d2))
        residuals[f"third_order_{label}"] = abs(
            float(-2.0 * cache.ds_k[e] * cache.nu[e, 0] + mu * cache.tau[e, 0]))
        v = -(2.0 * cache.ds2_k[e] + cache.k[e] ** 3 - mu * cache.k[e])
        residuals[f"fourth_order_{label}"] = abs(float(v * cache.nu[e, 1]))
        margins[f"nondegeneracy_{label}"] = float(cache.tau[e, 1] - rho)
    passed = all(v <= tol for v in residuals.values()) and \
        all(m >= 0.0 for m in margins.values())
    return AdmissibilityReport(residuals=residuals, margins=margins,
                               rho=rho, tol=tol, passed=passed)


# ---------------------------------------------------------------------------
# one step
# ---------------------------------------------------------------------------

def _set_row(ab, i, j0, coeffs):
    cols = np.arange(j0, j0 + len(coeffs))
    ab[_BANDWIDTH + i - cols, cols] = coeffs


def _sliding_rows(s, mu):
    """Five-point one-sided rows of -2 d^3/ds^3 + mu d/ds at both ends."""
    left = -2.0 * fd_weights(s[:5], s[0], 3) + mu * fd_weights(s[:5], s[0], 1)
    right = -2.0 * fd_weights(s[-5:], s[-1], 3) + mu * fd_weights(s[-5:], s[-1], 1)
    return left, right


def _flow_stats(cache: GeometryCache, mu: float):
    """(energy, dissipation, dual_norm, tangency) of the current state."""
    v = -(2.0 * cache.ds2_k + cache.k ** 3 - mu * cache.k)
    u = float(np.sum(cache.quad_w * v * v))
    e = float(np.sum(cache.quad_w * (cache.k ** 2 + mu)))
    b0, b1 = boundary_coefficients(cache, mu)
    dual = float(np.sqrt(u + b0 * b0 + b1 * b1))
    tangency = float(min(cache.tau[0, 1], cache.tau[-1, 1]))
    return e, u, dual, tangency


def step(state: FlowState, config: FlowConfig, dt: float | None = None) -> FlowState:
    """Advance one time increment; raises StepFailure on a bad solve."""
    if dt is None:
        dt = config.dt
        if dt is None:
            raise ValueError("no dt: pass one or set it in the config")
    cache = state.cache
    nodes = state.curve.nodes
    n = nodes.shape[0]
    n_seg = n - 1
    mu = config.mu

    v_scalar = -(2.0 * cache.ds2_k + cache.k ** 3 - mu * cache.k)
    f_expl = v_scalar[:, None] * cache.nu

    n4 = float(n_seg) ** 4
    q4 = cache.param_speed ** 4
    c = 2.0 * dt * n4 / q4

    # interior 5-point fourth differences, aligned with nodes 2..N-2
    d4 = np.diff(nodes, n=4, axis=0) * n4
    idx = np.arange(2, n - 2)
    rhs_int = nodes[idx] + dt * (f_expl[idx] + 2.0 * d4 / q4[idx, None])

    ab = np.zeros((2 * _BANDWIDTH + 1, n))
    for off, sten in ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)):
        vals = c[idx] * sten
        if off == 0:
            vals = vals + 1.0
        ab[_BANDWIDTH - off, idx + off] = vals
    ab_x = ab
    ab_y = ab.copy()

    h2 = float(n_seg) ** 2
    d2_left = np.array([2.0, -5.0, 4.0, -1.0]) * h2
    d2_right = np.array([-1.0, 4.0, -5.0, 2.0]) * h2
    slide_l, slide_r = _sliding_rows(cache.s, mu)

    _set_row(ab_x, 0, 0, slide_l)
    _set_row(ab_x, 1, 0, d2_left)
    _set_row(ab_x, n - 2, n - 4, d2_right)
    _set_row(ab_x, n - 1, n - 5, slide_r)

    _set_row(ab_y, 0, 0, np.array([1.0]))
    _set_row(ab_y, 1, 0, d2_left)
    _set_row(ab_y, n - 2, n - 4, d2_right)
    _set_row(ab_y, n - 1, n - 1, np.array([1.0]))

    rhs_x = np.zeros(n)
    rhs_y = np.zeros(n)
    rhs_x[idx] = rhs_int[:, 0]
    rhs_y[idx] = rhs_int[:, 1]

    try:
        new_x = solve_banded((_BANDWIDTH, _BANDWIDTH), ab_x, rhs_x,
                             check_finite=False)
        new_y = solve_banded((_BANDWIDTH, _BANDWIDTH), ab_y, rhs_y,
                             check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise StepFailure(f"banded solve failed: {exc}") from None

    new_nodes = np.stack((new_x, new_y), axis=-1)
    if not np.all(np.isfinite(new_nodes)):
        raise StepFailure("non-finite node positions after solve")
    new_nodes[0, 1] = 0.0
    new_nodes[-1, 1] = 0.0
    try:
        new_curve = DiscreteCurve(new_nodes, constrained=True)
        new_cache = build_cache(new_curve)
    except (ZeroSegment, ValueError) as exc:
        raise StepFailure(f"step lost regularity: {exc}") from None
    return FlowState(curve=new_curve, time=state.time + dt, cache=new_cache)


# ---------------------------------------------------------------------------
# run loop
# ---------------------------------------------------------------------------

def _grid_drift(cache: GeometryCache) -> float:
    h = cache.seg_len
    mean = cache.total_len / len(h)
    return float(np.max(np.abs(h - mean)) / mean)


def _sample_row(state: FlowState, mu: float):
    e, u, dual, tangency = _flow_stats(state.cache, mu)
    nodes = state.curve.nodes
    return (state.time, e, u, state.cache.total_len,
            float(nodes[:, 0].min()), float(nodes[:, 0].max()),
            float(nodes[:, 1].min()), float(nodes[:, 1].max()),
            tangency, dual)


def run(initial: DiscreteCurve, config: FlowConfig, *,
        admissibility: str = "warn",
        max_snapshots: int = 50) -> FlowResult:
    """Evolve an initial curve until one of the stop conditions fires.

    admissibility: "require" raises AdmissibilityError when the initial
    report fails, "warn" warns and proceeds, "skip" does not check.
    Snapshot curves are collected on the trace cadence and thinned
    geometrically to at most max_snapshots (deterministically).
    """
    if admissibility not in ("require", "warn", "skip"):
        raise ValueError("admissibility must be require|warn|skip")
    t_start = _time.perf_counter()

    curve = initial
    if not curve.constrained:
        raise ValueError("flow needs a constrained curve (endpoints on the axis)")
    if curve.n_segments != config.n_nodes:
        curve = resample_uniform(curve, config.n_nodes)

    if admissibility != "skip":
        report = check_admissible(curve, config.mu, rho=config.rho_min)
        if not report.passed:
            msg = ("initial curve fails the admissibility check; worst "
                   f"residual {report.worst():.3e}, margins "
                   f"{min(report.margins.values()):.3e}")
            if admissibility == "require":
                raise AdmissibilityError(msg)
            warnings.warn(msg, stacklevel=2)

    cache = build_cache(curve)
    state = FlowState(curve=curve, time=0.0, cache=cache)
    dt0 = config.dt if config.dt is not None else \
        0.1 * (cache.total_len / config.n_nodes) ** 2

    trace = FlowTrace()
    trace.append(_sample_row(state, config.mu))
    snapshots = [(0, state.curve)]
    snap_stride = 1

    steps = 0
    reason = None
    while True:
        _, u, _, tangency = _flow_stats(state.cache, config.mu)
        if state.cache.total_len < config.len_min:
            reason = StopReason.LENGTH_COLLAPSE
            break
        if tangency < config.rho_min:
            reason = StopReason.BOUNDARY_TANGENCY
            break
        if u < config.u_tol:
            reason = StopReason.CONVERGED
            break
        if state.time >= config.t_max * (1.0 - 1e-12):
            reason = StopReason.MAX_TIME
            break

        dt_try = min(dt0, config.t_max - state.time)
        new_state = None
        for _attempt in range(11):
            try:
                new_state = step(state, config, dt=dt_try)
                break
            except StepFailure:
                dt_try *= 0.5
        if new_state is None:
            reason = StopReason.STEP_FAILURE
            break
        state = new_state
        steps += 1

        if steps % config.reparam_every == 0 and _grid_drift(state.cache) > 1e-3:
            curve = resample_uniform(state.curve, config.n_nodes)
            state = FlowState(curve=curve, time=state.time,
                              cache=build_cache(curve))

        if steps % config.snapshot_every == 0:
            trace.append(_sample_row(state, config.mu))
            if steps % (config.snapshot_every * snap_stride) == 0:
                snapshots.append((steps, state.curve))
                if len(snapshots) > max_snapshots:
                    snapshots = snapshots[::2]
                    snap_stride *= 2

    if len(trace) == 0 or trace.t[-1] < state.time:
        trace.append(_sample_row(state, config.mu))
    if snapshots[-1][0] != steps:
        snapshots.append((steps, state.curve))

    return FlowResult(final=state, trace=trace, reason=reason,
                      snapshots=snapshots, dt=dt0, steps=steps,
                      wall_time=_time.perf_counter() - t_start)
