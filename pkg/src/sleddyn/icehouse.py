"""Longitudinal friction from straight gliding runs, via energy accounting.

Over a gliding section the sum of potential, kinetic, and aerodynamic
energy decreases linearly with distance at the rate of the ice friction
force: F_ice = -d(E_pot + E_kin + E_aero)/ds. The slope comes from an
ordinary least-squares line over the middle section of the glide (the
lie-down and sit-up transients at the ends are excluded), and the
friction coefficient follows as mu = |F_ice| / (m g cos kappa).

Rink surfaces are never perfectly level; runs are therefore performed
in both directions and the two coefficients averaged, which cancels a
small unknown slope to first order.

A quadratic least-squares fit across specimens turns (pressure, mu)
pairs into the coefficients of the longitudinal friction law.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aero import AirState, drag_force
from .errors import DataError, NumericalError
from .friction import LongitudinalFrictionParams

G = 9.81

#: Fraction of the gliding phase used for the slope fit, centered.
DEFAULT_WINDOW_FRACTION = 0.6

MIN_FIT_SAMPLES = 20


@dataclass(frozen=True)
class GlideRun:
    """Speed-over-distance record of one gliding run.

    ``kappa`` is the slope angle along the direction of travel
    (positive when climbing) used when no altitude channel exists; the
    direction tag only serves to pair opposite runs for averaging.
    """

    s: np.ndarray
    v: np.ndarray
    m: float
    air: AirState
    cx_ax: float
    direction: str = "down"
    kappa: float | None = 0.0
    h: np.ndarray | None = None
    specimen: str = ""

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if s.shape != v.shape or s.ndim != 1:
            raise DataError("s and v must be 1-d arrays of equal length")
        if np.any(np.diff(s) <= 0):
            raise DataError("distance must be strictly increasing over the glide")
        if np.any(v <= 0):
            raise DataError("speed must stay positive inside the gliding window")
        if self.direction not in ("up", "down"):
            raise DataError(f"direction must be 'up' or 'down', got {self.direction!r}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "v", v)
        if self.h is not None:
            object.__setattr__(self, "h", np.asarray(self.h, dtype=float))


def glide_run_from_time_series(t, v, m, air, cx_ax, direction="down", kappa=0.0,
                               h=None, specimen="") -> GlideRun:
    """Build a GlideRun from t/v samples, integrating distance on the fly."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])
    return GlideRun(s=s, v=v, m=m, air=air, cx_ax=cx_ax, direction=direction,
                    kappa=kappa, h=h, specimen=specimen)


def energy_series(run: GlideRun):
    """Cumulative E_pot + E_kin + E_aero along the glide [J].

    Potential energy comes from the altitude channel when present and
    from the slope angle otherwise; the aerodynamic part integrates the
    drag force over distance (trapezoidal).
    """
    s = run.s
    if run.h is not None:
        e_pot = run.m * G * (run.h - run.h[0])
    elif run.kappa is not None:
        e_pot = run.m * G * np.sin(run.kappa) * (s - s[0])
    else:
        raise DataError("glide run needs either an altitude channel or a slope angle")
    e_kin = 0.5 * run.m * (run.v ** 2 - run.v[0] ** 2)
    f_aero = drag_force(run.v, run.cx_ax, run.air)
    e_aero = np.concatenate([[0.0], np.cumsum(0.5 * (f_aero[1:] + f_aero[:-1]) * np.diff(s))])
    return e_pot + e_kin + e_aero


def middle_window(s, fraction: float = DEFAULT_WINDOW_FRACTION):
    """Centered sub-interval of the distance range covering ``fraction`` of it."""
    lo, hi = float(s[0]), float(s[-1])
    pad = 0.5 * (1.0 - fraction) * (hi - lo)
    return lo + pad, hi - pad


def friction_force_fit(s, energy, window=None):
    """Friction force as minus the OLS slope of the energy series [N].

    Returns (force, standard_error). The window is an (s0, s1) pair;
    by default the centered 60 % section is used.
    """
    s = np.asarray(s, dtype=float)
    energy = np.asarray(energy, dtype=float)
    if window is None:
        window = middle_window(s)
    mask = (s >= window[0]) & (s <= window[1])
    if mask.sum() < MIN_FIT_SAMPLES:
        raise DataError(f"only {int(mask.sum())} samples inside the fit window, need {MIN_FIT_SAMPLES}")
    x, y = s[mask], energy[mask]
    if np.ptp(x) == 0:
        raise DataError("degenerate window: no spread in distance")
    xm = x - x.mean()
    sxx = float(xm @ xm)
    slope = float(xm @ (y - y.mean())) / sxx
    resid = (y - y.mean()) - slope * xm
    dof = max(x.size - 2, 1)
    stderr = float(np.sqrt((resid @ resid) / dof / sxx))
    return -slope, stderr


def mu_from_force(f_ice, m, kappa=0.0):
    """Friction coefficient mu = |F_ice| / (m g cos kappa)."""
    return abs(f_ice) / (m * G * np.cos(kappa))


def average_bidirectional(mu_up, mu_down):
    """Arithmetic mean of opposite-direction coefficients.

    Cancels an unknown rink slope to first order: the slope adds
    +-m g sin(kappa) to the two fitted forces symmetrically.
    """
    return 0.5 * (mu_up + mu_down)


@dataclass(frozen=True)
class GlideResult:
    specimen: str
    direction: str
    f_ice: float
    f_ice_stderr: float
    mu: float
    mu_stderr: float


def evaluate_glide(run: GlideRun, window=None, window_fraction: float = DEFAULT_WINDOW_FRACTION) -> GlideResult:
    """Full energy-method evaluation of one gliding run."""
    energy = energy_series(run)
    if window is None:
        window = middle_window(run.s, window_fraction)
    force, stderr = friction_force_fit(run.s, energy, window)
    kappa = run.kappa if run.kappa is not None else 0.0
    scale = run.m * G * np.cos(kappa)
    return GlideResult(
        specimen=run.specimen, direction=run.direction,
        f_ice=force, f_ice_stderr=stderr,
        mu=mu_from_force(force, run.m, kappa), mu_stderr=stderr / scale,
    )


def fit_quadratic_mu_p(points) -> LongitudinalFrictionParams:
    """Quadratic least squares through (pressure [MPa], mu) pairs.

    Fits mu * 1e3 = B p^2 - C p + D with the asperity factor at 1; the
    cap E_x is not a fit quantity and keeps its default.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DataError("need at least 3 (p, mu) pairs")
    p, mu = pts[:, 0], pts[:, 1]
    design = np.column_stack([p * p, p, np.ones_like(p)])
    if np.linalg.matrix_rank(design) < 3:
        raise NumericalError("rank-deficient design: pressures are collinear in (p, p^2)")
    coef, *_ = np.linalg.lstsq(design, mu * 1e3, rcond=None)
    a, b, c = (float(x) for x in coef)
    return LongitudinalFrictionParams(b_x=a, c_x=-b, d_x=c)


# ---------------------------------------------------------------------------
# glide-run CSV: columns t, v [, h]; metadata in '# key = value' comments


def load_glide_csv(path) -> GlideRun:
    meta: dict[str, str] = {}
    rows = []
    has_h = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    k, _, v = body.partition("=")
                    meta[k.strip()] = v.strip()
                continue
            if line.lower().startswith("t,"):
                has_h = line.lower().split(",")[2:3] == ["h"]
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparsable row {line!r}") from None
    if not rows:
        raise DataError(f"{path}: no samples")
    required = ("m", "p_air", "temperature", "cx_ax", "direction")
    missing = [k for k in required if k not in meta]
    if missing:
        raise DataError(f"{path}: metadata block missing {', '.join(missing)}")
    arr = np.array(rows)
    air = AirState(p_air=float(meta["p_air"]), temperature=float(meta["temperature"]),
                   r_specific=float(meta.get("r_specific", 287.05)))
    return glide_run_from_time_series(
        t=arr[:, 0], v=arr[:, 1],
        h=arr[:, 2] if has_h and arr.shape[1] > 2 else None,
        m=float(meta["m"]), air=air, cx_ax=float(meta["cx_ax"]),
        direction=meta["direction"], kappa=float(meta.get("kappa", 0.0)),
        specimen=meta.get("specimen", Path(path).stem),
    )


def save_glide_csv(run_t, run_v, path, meta: dict, h=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in meta.items():
            fh.write(f"# {k} = {v}\n")
        fh.write("t,v,h\n" if h is not None else "t,v\n")
        for i in range(len(run_t)):
            cells = [repr(float(run_t[i])), repr(float(run_v[i]))]
            if h is not None:
                cells.append(repr(float(h[i])))
            fh.write(",".join(cells) + "\n")
