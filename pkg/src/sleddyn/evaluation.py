"""Driver evaluation: relative energy-loss metrics and model validation.

A straight-running sled loses energy only to longitudinal ice friction
and head-on drag; that per-sample minimum defines the loss budget

    E_tot_loss = integral of (mu F_z_f0 + mu F_z_r + F_drag(base area)) ds.

The actual motion-opposing force is the negative driving-direction
component of each force, obtained by rotating body-frame forces by the
chassis slip angle: slip and steering tilt the (large) lateral forces
into the drag direction and inflate the drag area. The evaluation
metrics are the relative increases of the actual over the ideal losses::

    dE_ice_f = (int -F_xt_f0 ds - int mu F_z_f0 ds) / E_tot_loss

and likewise for the rear runner and the drag term; dE_tot is their
sum by construction. All integrals run over distance, so the metrics
are insensitive to resampling of the same trajectory.

Loss terms are accumulated as motion-opposing magnitudes (friction
forces point backward, so their x-components are negated), which keeps
every dE a positive fraction for physically sensible traces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aero import AeroModel, drag_area_at_beta, drag_force
from .errors import DataError
from .friction import MU_X_DEFAULT, force_y, force_y_braghin
from .onetrack import AxleForceTrace, front_runner_forces
from .telemetry import TelemetryRun

#: Invalid spans no longer than this are bridged by interpolation [s].
MAX_GAP_S = 0.1

EXCEEDANCE_THRESHOLDS_DEG = (2.0, 4.0)
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class LossBreakdown:
    """Relative energy-loss increases over one contiguous window."""

    e_tot_loss: float
    de_ice_f: float
    de_ice_r: float
    de_aero: float
    s_start: float
    s_end: float
    runtime: float

    @property
    def de_tot(self) -> float:
        return self.de_ice_f + self.de_ice_r + self.de_aero

    @property
    def distance(self) -> float:
        return self.s_end - self.s_start


def _segments(valid: np.ndarray, t: np.ndarray, max_gap: float):
    """Contiguous index ranges after bridging short invalid spans.

    Invalid spans of duration <= max_gap are kept (their samples will be
    interpolated); longer spans split the trace.
    """
    n = valid.size
    splits = []
    i = 0
    while i < n:
        if valid[i]:
            i += 1
            continue
        j = i
        while j < n and not valid[j]:
            j += 1
        gap = t[min(j, n - 1)] - t[max(i - 1, 0)]
        if gap > max_gap or i == 0 or j == n:
            splits.append((i, j))
        i = j
    segments = []
    start = 0
    for i, j in splits:
        if i > start:
            segments.append((start, i))
        start = j
    if start < n:
        segments.append((start, n))
    return segments


def _bridge(values: np.ndarray, valid: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Linear interpolation of invalid samples over distance."""
    if valid.all():
        return values
    out = values.copy()
    out[~valid] = np.interp(s[~valid], s[valid], values[valid])
    return out


def loss_energies(trace: AxleForceTrace, run: TelemetryRun, aero: AeroModel,
                  window=None, mu_x: float = MU_X_DEFAULT,
                  max_gap: float = MAX_GAP_S) -> list[LossBreakdown]:
    """Loss breakdowns over the window, one entry per contiguous segment.

    Samples in invalid spans no longer than ``max_gap`` seconds are
    bridged by interpolation over distance; longer gaps split the window
    and each segment is reported with its own denominators.
    """
    s = trace.s
    if window is None:
        window = (float(s[0]), float(s[-1]))
    in_window = (s >= window[0]) & (s <= window[1])
    if not in_window.any():
        raise DataError("evaluation window contains no samples")

    results = []
    idx = np.nonzero(in_window)[0]
    t_w = trace.t[idx]
    valid_w = trace.valid[idx]
    if not valid_w.any():
        raise DataError("evaluation window contains no valid samples")
    for lo, hi in _segments(valid_w, t_w, max_gap):
        seg = idx[lo:hi]
        if seg.size < 2:
            continue
        results.append(_segment_losses(trace, run, aero, seg, mu_x))
    if not results:
        raise DataError("no usable segments inside the evaluation window")
    return results


def _segment_losses(trace: AxleForceTrace, run: TelemetryRun, aero: AeroModel,
                    seg: np.ndarray, mu_x: float) -> LossBreakdown:
    s = trace.s[seg]
    valid = trace.valid[seg]
    v = run.v[seg]

    def clean(values):
        return _bridge(values[seg], valid, s)

    beta = clean(trace.beta)
    f_x_f0 = clean(trace.f_x_f0)
    f_y_f0 = clean(trace.f_y_f0)
    f_y_r = clean(trace.f_y_r)
    f_z_f0 = clean(trace.f_z_f0)
    f_z_r = clean(trace.f_z_r)
    alpha_r = clean(trace.alpha_r)

    cos_b, sin_b = np.cos(beta), np.sin(beta)
    # actual motion-opposing components (friction points backward: negate x-tilde)
    actual_front = -(cos_b * f_x_f0 - sin_b * f_y_f0)
    f_x_r_model = -mu_x * f_z_r * np.cos(alpha_r)
    actual_rear = -(cos_b * f_x_r_model - sin_b * f_y_r)
    actual_aero = drag_force(v, 1.0, aero.air) * drag_area_at_beta(aero, beta)

    ideal_front = mu_x * f_z_f0
    ideal_rear = mu_x * f_z_r
    ideal_aero = drag_force(v, aero.cx_ax, aero.air)

    def integrate(values):
        return float(np.trapezoid(values, s))

    e_tot = integrate(ideal_front + ideal_rear + ideal_aero)
    if e_tot <= 0:
        raise DataError("non-positive ideal loss energy over the segment")
    return LossBreakdown(
        e_tot_loss=e_tot,
        de_ice_f=(integrate(actual_front) - integrate(ideal_front)) / e_tot,
        de_ice_r=(integrate(actual_rear) - integrate(ideal_rear)) / e_tot,
        de_aero=(integrate(actual_aero) - integrate(ideal_aero)) / e_tot,
        s_start=float(s[0]), s_end=float(s[-1]),
        runtime=float(trace.t[seg][-1] - trace.t[seg][0]),
    )


def combine_losses(parts: list[LossBreakdown]) -> LossBreakdown:
    """Energy-weighted combination of per-segment breakdowns."""
    if not parts:
        raise DataError("nothing to combine")
    e_tot = sum(p.e_tot_loss for p in parts)
    return LossBreakdown(
        e_tot_loss=e_tot,
        de_ice_f=sum(p.de_ice_f * p.e_tot_loss for p in parts) / e_tot,
        de_ice_r=sum(p.de_ice_r * p.e_tot_loss for p in parts) / e_tot,
        de_aero=sum(p.de_aero * p.e_tot_loss for p in parts) / e_tot,
        s_start=parts[0].s_start, s_end=parts[-1].s_end,
        runtime=sum(p.runtime for p in parts),
    )


# ---------------------------------------------------------------------------
# angle statistics


def angle_statistics(labeled_runs) -> dict:
    """Distribution summaries of steering and slip angles per label.

    ``labeled_runs`` yields (label, run, trace) triples; runs of the
    same label (driver or track) are pooled. Quantiles are reported in
    degrees together with the fraction of samples whose magnitude
    exceeds 2 and 4 degrees.
    """
    pools: dict[str, dict[str, list]] = {}
    for label, run, trace in labeled_runs:
        pool = pools.setdefault(label, {"delta": [], "alpha_f": [], "alpha_r": []})
        valid = trace.valid
        pool["delta"].append(run.delta[valid])
        pool["alpha_f"].append(trace.alpha_f[valid])
        pool["alpha_r"].append(trace.alpha_r[valid])
    report = {}
    for label, pool in pools.items():
        entry = {}
        for name, chunks in pool.items():
            values = np.degrees(np.abs(np.concatenate(chunks)))
            entry[name] = {
                "quantiles_deg": {q: float(np.quantile(values, q)) for q in QUANTILES},
                "exceedance": {
                    thr: float(np.mean(values > thr)) for thr in EXCEEDANCE_THRESHOLDS_DEG
                },
                "n": int(values.size),
            }
        report[label] = entry
    return report


# ---------------------------------------------------------------------------
# validation against measurement


def measured_lateral_cog(trace: AxleForceTrace):
    """Lateral force at the COG from measurement, m a_y_cog - F_y_ext.

    The reconstruction solved exactly that balance, so the sum of the
    reconstructed axle forces reproduces it without touching raw
    channels again.
    """
    return trace.f_y_f0 + trace.f_y_r


def model_lateral_cog(trace: AxleForceTrace, front, rear,
                      run: TelemetryRun, mu_x: float = MU_X_DEFAULT):
    """Lateral COG force predicted by friction laws along the trace.

    ``front``/``rear`` are LateralFrictionParams, or the string
    "braghin" to substitute the reference model at that axle. The front
    force is built in the runner frame and rotated back to the body
    frame, mirroring the simulator's force chain.
    """
    gamma, delta = run.gamma, run.delta
    alpha_f = np.where(np.isfinite(trace.alpha_f), trace.alpha_f, 0.0)
    alpha_r = np.where(np.isfinite(trace.alpha_r), trace.alpha_r, 0.0)
    f_z_f0 = np.abs(np.where(np.isfinite(trace.f_z_f0), trace.f_z_f0, 1.0))
    f_z_r = np.abs(np.where(np.isfinite(trace.f_z_r), trace.f_z_r, 1.0))
    if isinstance(front, str) and front == "braghin":
        from . import kinematics

        f_y_f = force_y_braghin(f_z_f0, alpha_f)
        f_x_f = -mu_x * f_z_f0 * np.cos(alpha_f)
        a = kinematics.rotation_f0_to_f(gamma, delta)
        f_z_f = (f_z_f0 - a[..., 2, 0] * f_x_f - a[..., 2, 1] * f_y_f) / a[..., 2, 2]
        _, f_y_f0, _ = kinematics.rotate_forces(a, f_x_f, f_y_f, f_z_f)
    else:
        _, (_, f_y_f0, _) = front_runner_forces(alpha_f, f_z_f0, gamma, delta, front, mu_x)
    if isinstance(rear, str) and rear == "braghin":
        f_y_r = force_y_braghin(f_z_r, alpha_r)
    else:
        f_y_r = force_y(f_z_r, alpha_r, rear)
    return f_y_f0 + f_y_r


def validate_rmse(predicted, measured, valid=None) -> float:
    """Root mean square error between aligned series [N]."""
    predicted = np.asarray(predicted, dtype=float)
    measured = np.asarray(measured, dtype=float)
    if predicted.shape != measured.shape:
        raise DataError(f"series lengths differ: {predicted.shape} vs {measured.shape}")
    if valid is not None:
        predicted = predicted[valid]
        measured = measured[valid]
    if predicted.size == 0:
        raise DataError("no valid samples for RMSE")
    return float(np.sqrt(np.mean((predicted - measured) ** 2)))
