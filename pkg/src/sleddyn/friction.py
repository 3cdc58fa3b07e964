"""Runner-ice friction laws and the contact-pressure lookup.

Longitudinal friction: the coefficient mu_x follows a capped quadratic
in contact pressure,

    mu_x = min(1e-3 * zeta_x * (B_x p^2 - C_x p + D_x), E_x),

clamped below at zero, and the force is F_x = -mu_x * F_z * cos(alpha)
so that pure sideways sliding produces no longitudinal force. The cap
E_x applies to the final coefficient (0.007 by default), the only
reading consistent with measured coefficients in the 3e-3..5e-3 range.

Lateral friction: a sin-atan curve in the slip angle, a pure-lateral
cut of the Magic Formula family,

    F_y = mu_zeta_y * F_z * sin(C_y * atan(B_y a - E_y (B_y a - atan(B_y a))))
    B_y = K_y / (C_y * mu_zeta_y * F_z),

which has slope exactly K_y at alpha = 0. A simple atan reference model
(mu_y = 0.5, k3 = 50/rad at both axles) is included for comparison.

When no pressure data is available, mu_x falls back to the fixed value
0.004, in line with published ice-house and track measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

#: Fallback longitudinal friction coefficient when no pressure lookup exists.
MU_X_DEFAULT = 0.004

#: Reference-model constants: peak coefficient and slip-angle gain [1/rad].
BRAGHIN_MU_Y = 0.5
BRAGHIN_K3 = 50.0


@dataclass(frozen=True)
class LongitudinalFrictionParams:
    """Coefficients of the capped quadratic mu_x(p); pressure in MPa."""

    b_x: float
    c_x: float
    d_x: float
    e_x: float = 0.007
    zeta_x: float = 1.0

    def __post_init__(self):
        if self.b_x <= 0:
            raise ValueError("b_x must be positive (convex quadratic)")
        if self.e_x <= 0:
            raise ValueError("e_x cap must be positive")
        if self.zeta_x < 1.0:
            raise ValueError("asperity factor zeta_x must be >= 1")

    @property
    def vertex_pressure(self) -> float:
        """Pressure of minimum friction, C_x / (2 B_x) [MPa]."""
        return self.c_x / (2.0 * self.b_x)


@dataclass(frozen=True)
class LateralFrictionParams:
    """Parameters of the lateral sin-atan law for one runner.

    mu_zeta_y is the fitted peak-scale product; e_y controls the trend
    beyond the measured slip-angle range and is conventionally fixed
    rather than fitted; k_y is the cornering stiffness [N/rad].
    """

    mu_zeta_y: float
    c_y: float
    k_y: float
    e_y: float = 0.99

    def __post_init__(self):
        if self.mu_zeta_y <= 0:
            raise ValueError("mu_zeta_y must be positive")
        if not 0.0 < self.c_y < 2.0:
            raise ValueError(f"shape factor c_y must be in (0, 2), got {self.c_y}")
        if self.k_y <= 0:
            raise ValueError("cornering stiffness k_y must be positive")
        if not 0.0 < self.e_y <= 1.0:
            raise ValueError(f"curvature factor e_y must be in (0, 1], got {self.e_y}")


def mu_x(p, params: LongitudinalFrictionParams):
    """Longitudinal friction coefficient at contact pressure p [MPa].

    Raises ValueError for non-positive pressures; the quadratic is
    clamped to [0, e_x].
    """
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0):
        raise ValueError("contact pressure must be positive")
    quad = 1e-3 * params.zeta_x * (params.b_x * p * p - params.c_x * p + params.d_x)
    return np.clip(quad, 0.0, params.e_x)


def force_x_mu(f_z, alpha, mu):
    """Longitudinal force F_x = -mu * F_z * cos(alpha) [N]."""
    return -np.asarray(mu, dtype=float) * np.asarray(f_z, dtype=float) * np.cos(alpha)


def force_x(f_z, alpha, p, params: LongitudinalFrictionParams):
    """Longitudinal force from the pressure-dependent coefficient."""
    return force_x_mu(f_z, alpha, mu_x(p, params))


def stiffness_factor(f_z, params: LateralFrictionParams, zeta_y: float = 1.0):
    """B_y = K_y / (C_y * mu_zeta_y * zeta_y * F_z); F_z must be positive."""
    f_z = np.asarray(f_z, dtype=float)
    if np.any(f_z <= 0.0):
        raise ValueError("normal force must be positive for the lateral law")
    return params.k_y / (params.c_y * params.mu_zeta_y * zeta_y * f_z)


def force_y(f_z, alpha, params: LateralFrictionParams, zeta_y: float = 1.0):
    """Lateral force [N] at slip angle alpha [rad] and normal force F_z [N].

    Odd in alpha, slope k_y at alpha = 0; with e_y <= 1 the magnitude
    keeps growing slowly past the measured slip-angle range. ``zeta_y``
    is an asperity tuning factor on the fitted peak-scale product
    (rough ice reduces contact area); the fits themselves absorb it
    into mu_zeta_y, so it defaults to 1.
    """
    f_z = np.asarray(f_z, dtype=float)
    b_a = stiffness_factor(f_z, params, zeta_y) * np.asarray(alpha, dtype=float)
    arg = b_a - params.e_y * (b_a - np.arctan(b_a))
    return params.mu_zeta_y * zeta_y * f_z * np.sin(params.c_y * np.arctan(arg))


def force_y_braghin(f_z, alpha, mu_y: float = BRAGHIN_MU_Y, k3: float = BRAGHIN_K3):
    """Reference lateral model F_y = mu_y * F_z * (2/pi) * atan(k3 * alpha)."""
    return mu_y * np.asarray(f_z, dtype=float) * (2.0 / np.pi) * np.arctan(k3 * np.asarray(alpha, dtype=float))


#: Pitch-rate magnitude below which the track is treated as flat.
OMEGA_MIN = 1e-3

#: Sentinel radius for flat track; pressure lookups clamp it to their edge.
FLAT_RADIUS = np.inf


def track_radius_y(v, theta_dot, omega_min: float = OMEGA_MIN):
    """Track radius around the pitch axis, r = -v / theta_dot [m].

    Positive for hollows (pitch-down rate while moving forward),
    negative for crests. |theta_dot| <= omega_min yields the flat
    sentinel (+inf) instead of a near-singular radius.
    """
    v = np.asarray(v, dtype=float)
    theta_dot = np.asarray(theta_dot, dtype=float)
    flat = np.abs(theta_dot) <= omega_min
    safe = np.where(flat, 1.0, theta_dot)
    return np.where(flat, FLAT_RADIUS, -v / safe)


@dataclass(frozen=True)
class PressureLookup:
    """Contact pressure [MPa] gridded over normal force and track radius.

    ``pressure[i, j]`` is the pressure at ``radius_axis[i]`` and
    ``f_z_axis[j]``. Queries are bilinear inside the grid and clamped to
    the nearest edge outside, so the flat-track sentinel (+inf radius)
    resolves to the largest-radius row.
    """

    f_z_axis: np.ndarray
    radius_axis: np.ndarray
    pressure: np.ndarray

    def __post_init__(self):
        f_z = np.asarray(self.f_z_axis, dtype=float)
        r = np.asarray(self.radius_axis, dtype=float)
        p = np.asarray(self.pressure, dtype=float)
        if f_z.ndim != 1 or r.ndim != 1 or p.shape != (r.size, f_z.size):
            raise DataError("pressure grid shape does not match its axes")
        if np.any(np.diff(f_z) <= 0) or np.any(np.diff(r) <= 0):
            raise DataError("lookup axes must be strictly increasing")
        if not np.all(p > 0):
            raise DataError("contact pressures must be positive everywhere")
        object.__setattr__(self, "f_z_axis", f_z)
        object.__setattr__(self, "radius_axis", r)
        object.__setattr__(self, "pressure", p)


def _clamped_cell(axis: np.ndarray, x):
    """Index of the lower cell corner and the clamped fractional position."""
    x = np.clip(x, axis[0], axis[-1])
    idx = np.clip(np.searchsorted(axis, x, side="right") - 1, 0, axis.size - 2)
    frac = (x - axis[idx]) / (axis[idx + 1] - axis[idx])
    return idx, frac


def lookup_pressure(table: PressureLookup, f_z, r_y_track):
    """Bilinear pressure interpolation, edge-clamped outside the grid."""
    f_z = np.asarray(f_z, dtype=float)
    r = np.asarray(r_y_track, dtype=float)
    j, fx = _clamped_cell(table.f_z_axis, f_z)
    i, fy = _clamped_cell(table.radius_axis, r)
    p = table.pressure
    top = p[i, j] * (1 - fx) + p[i, j + 1] * fx
    bot = p[i + 1, j] * (1 - fx) + p[i + 1, j + 1] * fx
    return top * (1 - fy) + bot * fy


def save_longitudinal_params(params: LongitudinalFrictionParams, path,
                             header: list[str] | None = None) -> None:
    from .kvfile import dump_kv

    dump_kv({"b_x": params.b_x, "c_x": params.c_x, "d_x": params.d_x,
             "e_x": params.e_x, "zeta_x": params.zeta_x}, path, header=header)


def load_longitudinal_params(path) -> LongitudinalFrictionParams:
    from .kvfile import load_kv

    raw = {k: float(v) for k, v in load_kv(path).items()}
    try:
        return LongitudinalFrictionParams(
            b_x=raw["b_x"], c_x=raw["c_x"], d_x=raw["d_x"],
            e_x=raw.get("e_x", 0.007), zeta_x=raw.get("zeta_x", 1.0))
    except KeyError as exc:
        raise DataError(f"{path}: missing longitudinal parameter {exc}") from exc


def load_pressure_table(path) -> PressureLookup:
    """Read the text grid format: first row F_z axis, first column radius axis."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(tok) for tok in line.replace(",", " ").split()])
    if len(rows) < 3:
        raise DataError(f"{path}: pressure table needs at least 2 radius rows")
    f_z_axis = np.array(rows[0])
    body = np.array(rows[1:])
    if body.shape[1] != f_z_axis.size + 1:
        raise DataError(f"{path}: rows must carry a radius value plus one pressure per F_z")
    return PressureLookup(f_z_axis=f_z_axis, radius_axis=body[:, 0], pressure=body[:, 1:])


def save_pressure_table(table: PressureLookup, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(" ".join(repr(float(v)) for v in table.f_z_axis) + "\n")
        for r, row in zip(table.radius_axis, table.pressure):
            fh.write(" ".join(repr(float(v)) for v in (r, *row)) + "\n")
