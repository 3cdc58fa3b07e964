"""Shared synthetic scenarios used across sim, evaluation, and acceptance tests."""

import numpy as np
import pytest

from sleddyn.aero import AeroModel, AirState
from sleddyn.friction import LateralFrictionParams
from sleddyn.kinematics import MountingOffset
from sleddyn.onetrack import BobParameters
from sleddyn.sim import ControlTrace, FrictionSetup, TrackProfile, step_steer, straight_track

LATERAL_FRONT = LateralFrictionParams(mu_zeta_y=2.577, c_y=0.024, k_y=10522.0, e_y=0.99)
LATERAL_REAR = LateralFrictionParams(mu_zeta_y=3.288, c_y=0.076, k_y=49776.0, e_y=0.99)


@pytest.fixture
def bob():
    return BobParameters(
        m=390.0, j_yy=350.0, j_zz=850.0, l_f=1.7, l_r=1.3, cx_ax=0.2,
        offset=MountingOffset(l_x=0.5, l_y=0.0, l_z=-0.1, l_s_f=1.2, l_s_r=-1.8),
    )


@pytest.fixture
def bob_sensor_at_cog():
    return BobParameters(
        m=390.0, j_yy=350.0, j_zz=850.0, l_f=1.7, l_r=1.3, cx_ax=0.2,
        offset=MountingOffset(l_s_f=1.7, l_s_r=-1.3),
    )


@pytest.fixture
def friction_setup():
    return FrictionSetup(lateral_front=LATERAL_FRONT, lateral_rear=LATERAL_REAR, mu_x=0.004)


@pytest.fixture
def aero_model():
    return AeroModel(cx_ax=0.2, air=AirState(p_air=94700.0, temperature=275.15))


def downhill_track(length=2000.0, kappa_deg=4.0):
    return straight_track(length, kappa=np.deg2rad(kappa_deg))


def corner_track(length=1500.0, kappa_deg=4.0):
    """Downhill run with one banked corner: smooth load-factor and pitch bumps."""
    s = np.linspace(0.0, length, 301)
    kappa = np.full(s.size, np.deg2rad(kappa_deg))
    bump = np.exp(-0.5 * ((s - 600.0) / 120.0) ** 2)
    n = 1.0 + 2.5 * bump
    inv_r = 0.02 * bump
    return TrackProfile(s=s, kappa=kappa, inv_r_y=inv_r, n=n)


def step_steer_controls(t_max=20.0):
    return step_steer(t_step=5.0, delta_deg=1.0, t_max=t_max)


def weaving_controls(t_max=30.0, amplitude_deg=1.5, period=4.0, gamma_amp_deg=0.0):
    t = np.linspace(0.0, t_max, 601)
    delta = np.deg2rad(amplitude_deg) * np.sin(2 * np.pi * t / period)
    ramp = np.clip(t / 2.0, 0.0, 1.0)  # ease in to keep the start clean
    gamma = np.deg2rad(gamma_amp_deg) * np.sin(2 * np.pi * t / (1.7 * period)) * ramp
    return ControlTrace(t=t, delta=delta * ramp, gamma=gamma)
