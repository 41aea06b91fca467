"""Post-processing of flow traces into convergence diagnostics.

Three measurable footprints of the convergence theory are extracted from
a trace: the dissipation budget (the time integral of u must exhaust the
energy drop), the gradient-inequality exponent (log energy gap against
log dual norm), and the exponential tail rate of the gap.  Compactness
is reported as the largest bounding-box diameter and the length range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyTrace, InsufficientSamples
from .flow import FlowTrace

GAP_FLOOR = 1e-12      # floor under the energy gap before taking logs
FIT_GAP_MIN = 1e-10    # samples with smaller gap are numerical noise
TRANSIENT_FRACTION = 0.2  # leading fraction of samples excluded from fits
MIN_FIT_SAMPLES = 10


@dataclass
class ConvergenceReport:
    """Fitted convergence quantities of one converged run."""

    energy_gap_series: np.ndarray      # (n, 2) pairs (t, gap)
    theta_hat: float                   # clamped to (0, 1/2]
    theta_raw: float
    C_hat: float
    fit_r2: float
    decay_rate: float
    decay_r2: float
    u_integral: float
    max_bbox_diam: float
    length_range: tuple
    u_budget_ok: bool
    gap_monotone: bool
    H_monotone: bool

    def as_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat,
            "theta_raw": self.theta_raw,
            "C_hat": self.C_hat,
            "fit_r2": self.fit_r2,
            "decay_rate": self.decay_rate,
            "decay_r2": self.decay_r2,
            "u_integral": self.u_integral,
            "max_bbox_diam": self.max_bbox_diam,
            "length_range": list(self.length_range),
            "u_budget_ok": self.u_budget_ok,
            "gap_monotone": self.gap_monotone,
            "H_monotone": self.H_monotone,
        }


def _require_samples(trace: FlowTrace):
    if len(trace) == 0:
        raise EmptyTrace("trace has no samples")


def energy_gap(trace: FlowTrace, e_inf: float) -> np.ndarray:
    """Energy gap series, floored to keep logarithms finite."""
    _require_samples(trace)
    return np.maximum(trace.energy - e_inf, GAP_FLOOR)


def _linfit(x, y):
    """Least-squares line fit; returns slope, intercept, r^2."""
    if np.ptp(x) <= 0.0:
        raise InsufficientSamples("no spread in the fit window")
    A = np.vstack((x, np.ones_like(x))).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise InsufficientSamples("constant data in the fit window")
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return float(coef[0]), float(coef[1]), r2


def dissipation_report(trace: FlowTrace, e_inf: float) -> dict:
    """Trapezoid integral of u and the dissipation budget checks.

    The integral must match the total energy drop within 5 percent and
    the gap series must be non-increasing (up to a roundoff floor).
    """
    _require_samples(trace)
    t = trace.t
    u = trace.dissipation
    gap = energy_gap(trace, e_inf)
    u_integral = float(np.trapz(u, t)) if len(trace) > 1 else 0.0
    e_drop = float(trace.energy[0] - e_inf)
    budget_ok = u_integral <= 1.05 * e_drop + 1e-12
    budget_tight = abs(u_integral - e_drop) <= 0.05 * max(e_drop, 1e-30)
    monotone = bool(np.all(np.diff(gap) <= 1e-10 * (1.0 + gap[:-1])))
    return {
        "u_integral": u_integral,
        "energy_drop": e_drop,
        "u_budget_ok": bool(budget_ok),
        "u_budget_tight": bool(budget_tight),
        "gap_monotone": monotone,
    }


def _fit_window(trace: FlowTrace, e_inf: float):
    gap = energy_gap(trace, e_inf)
    n = len(gap)
    start = int(np.ceil(TRANSIENT_FRACTION * n))
    keep = np.zeros(n, dtype=bool)
    keep[start:] = True
    keep &= gap > FIT_GAP_MIN
    keep &= trace.dual_norm > 0.0
    return gap, keep


def fit_lojasiewicz(trace: FlowTrace, e_inf: float):
    """Fit gap^(1-theta) <= C * dual_norm as a log-log regression.

    Returns (theta_hat, C_hat, fit_r2); theta_hat is clamped to
    (0, 1/2], the raw slope is available through convergence_report.
    """
    theta_raw, c_hat, r2 = _loj_raw(trace, e_inf)
    return _clamp_theta(theta_raw), c_hat, r2


def _loj_raw(trace: FlowTrace, e_inf: float):
    _require_samples(trace)
    gap, keep = _fit_window(trace, e_inf)
    if int(keep.sum()) < MIN_FIT_SAMPLES:
        raise InsufficientSamples(
            f"{int(keep.sum())} usable samples in the fit window")
    lg = np.log(gap[keep])
    ld = np.log(trace.dual_norm[keep])
    slope, intercept, r2 = _linfit(ld, lg)
    # gap = e^b dual^m  =>  gap^(1/m) = e^(b/m) dual, i.e. 1-theta = 1/m
    theta_raw = 1.0 - 1.0 / slope if slope != 0.0 else float("-inf")
    c_hat = float(np.exp(intercept / slope)) if slope != 0.0 else float("nan")
    return float(theta_raw), c_hat, r2


def _clamp_theta(theta: float) -> float:
    return float(min(max(theta, 1e-6), 0.5))


def decay_rate_fit(trace: FlowTrace, e_inf: float):
    """Least-squares slope of log(gap) over the tail half of the samples.

    Returns (rate, fit_r2); rate is negative for decaying gaps.
    """
    _require_samples(trace)
    gap = np.asarray(trace.energy, dtype=float) - e_inf
    ok = gap > GAP_FLOOR
    idx = np.nonzero(ok)[0]
    if len(idx) < MIN_FIT_SAMPLES:
        raise InsufficientSamples(f"{len(idx)} samples above the gap floor")
    tail = idx[len(idx) // 2:]
    if len(tail) < MIN_FIT_SAMPLES:
        raise InsufficientSamples("tail window too short")
    slope, _, r2 = _linfit(trace.t[tail], np.log(gap[tail]))
    return slope, r2


def compactness_report(trace: FlowTrace):
    """(max bounding-box diameter, (min length, max length)) over the trace."""
    _require_samples(trace)
    diam = trace.bbox_diameters()
    lengths = trace.length
    return float(diam.max()), (float(lengths.min()), float(lengths.max()))


def convergence_report(trace: FlowTrace, e_inf: float) -> ConvergenceReport:
    """Assemble every diagnostic into a single report."""
    _require_samples(trace)
    gap = energy_gap(trace, e_inf)
    series = np.column_stack((trace.t, gap))
    diss = dissipation_report(trace, e_inf)
    try:
        theta_raw, c_hat, r2 = _loj_raw(trace, e_inf)
        theta_hat = _clamp_theta(theta_raw)
    except InsufficientSamples:
        theta_raw = theta_hat = c_hat = r2 = float("nan")
    try:
        rate, decay_r2 = decay_rate_fit(trace, e_inf)
    except InsufficientSamples:
        rate = decay_r2 = float("nan")
    max_diam, length_range = compactness_report(trace)
    if np.isfinite(theta_hat):
        H = gap ** theta_hat
        h_monotone = bool(np.all(np.diff(H) <= 1e-10 * (1.0 + H[:-1])))
    else:
        h_monotone = True
    return ConvergenceReport(
        energy_gap_series=series,
        theta_hat=theta_hat,
        theta_raw=theta_raw,
        C_hat=c_hat,
        fit_r2=r2,
        decay_rate=rate,
        decay_r2=decay_r2,
        u_integral=diss["u_integral"],
        max_bbox_diam=max_diam,
        length_range=length_range,
        u_budget_ok=diss["u_budget_ok"] and diss["u_budget_tight"],
        gap_monotone=diss["gap_monotone"],
        H_monotone=h_monotone,
    )
