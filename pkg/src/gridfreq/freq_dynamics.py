"""Uniform (center-of-inertia) frequency response model.

Aggregates per-unit parameters into a single second-order model with a
turbine zero and evaluates the three post-contingency frequency metrics:
nadir, RoCoF and quasi-steady-state deviation.  A fixed-step RK4
integrator of the same model serves as an independent numerical oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .system import ConverterFleet, FrequencyLimits, SynchronousUnit


class FrequencyModelError(ValueError):
    """Raised when the aggregate model is outside its validity region."""


@dataclass
class AggregateParams:
    """System-level constants feeding every frequency formula.

    ``m`` is the synchronous inertia, ``m_v`` the converter virtual
    inertia; every formula uses the effective sum ``m_eff = m + m_v``.
    """

    m: float
    m_v: float
    d: float
    r_g: float
    f_g: float
    t_turbine: float
    s_base: float

    @property
    def m_eff(self) -> float:
        return self.m + self.m_v


@dataclass
class SecondOrderChar:
    omega_n: float
    zeta: float
    omega_d: float      # nan when zeta >= 1
    t_nadir: float
    overdamped: bool = False


@dataclass
class FrequencyMetrics:
    nadir_hz: float
    rocof_hz_s: float
    ss_dev_hz: float


@dataclass
class LimitGaps:
    """Relative constraint distances; gap <= 0 means the metric passes."""

    nadir: float
    rocof: float
    ss: float

    @property
    def ok(self) -> bool:
        return self.nadir <= 0 and self.rocof <= 0 and self.ss <= 0


def fleet_damping(units: list[SynchronousUnit], fleet: ConverterFleet,
                  s_base: float) -> float:
    """Constant aggregate damping computed from the full fleet.

    Damping and droop gains are prescribed within narrow ranges, so the
    aggregate damping is treated as commitment-independent throughout the
    scheduling pipeline.
    """
    d_sg = sum(u.damping * u.p_max for u in units)
    d_conv = (fleet.vsm_damping * fleet.vsm_capacity
              + (fleet.droop_gain / fleet.droop_droop) * fleet.droop_capacity)
    return (d_sg + d_conv) / s_base


def aggregate_params(units: list[SynchronousUnit],
                     online: list[bool] | np.ndarray,
                     fleet: ConverterFleet,
                     t_turbine: float,
                     d_override: float | None = None) -> AggregateParams:
    """Capacity-weighted aggregation of the online units plus converters.

    ``d_override`` substitutes a precomputed constant damping (see
    :func:`fleet_damping`); by default damping follows the online set.
    """
    if len(online) != len(units):
        raise FrequencyModelError("online mask length does not match units")
    s_base = (sum(u.p_max for u in units)
              + fleet.vsm_capacity + fleet.droop_capacity)
    if s_base <= 0 or (not units and fleet.vsm_capacity == 0
                       and fleet.droop_capacity == 0):
        raise FrequencyModelError("no frequency response resources")

    m = r_g = f_g = d_sg = 0.0
    for u, on in zip(units, online):
        if not on:
            continue
        k = u.p_max * u.gain_k / s_base
        r_g += k / u.droop
        f_g += u.turbine_fraction * k / u.droop
        m += 2.0 * u.inertia_h * k
        d_sg += u.damping * u.p_max
    m_v = 2.0 * fleet.vsm_inertia_h * fleet.vsm_gain * fleet.vsm_capacity / s_base
    if d_override is not None:
        d = d_override
    else:
        d = (d_sg + fleet.vsm_damping * fleet.vsm_capacity
             + (fleet.droop_gain / fleet.droop_droop) * fleet.droop_capacity
             ) / s_base
    return AggregateParams(m=m, m_v=m_v, d=d, r_g=r_g, f_g=f_g,
                           t_turbine=t_turbine, s_base=s_base)


def second_order_char(agg: AggregateParams) -> SecondOrderChar:
    """Natural frequency, damping ratio and time of the frequency nadir."""
    m_eff, d, r_g, f_g, t = agg.m_eff, agg.d, agg.r_g, agg.f_g, agg.t_turbine
    if m_eff <= 0:
        raise FrequencyModelError("nonpositive effective inertia")
    if d + r_g <= 0:
        raise FrequencyModelError("nonpositive aggregate damping plus droop")
    omega_n = math.sqrt((d + r_g) / (m_eff * t))
    zeta = (m_eff + t * (d + f_g)) / (2.0 * math.sqrt(m_eff * t * (d + r_g)))
    if zeta < 1.0:
        omega_d = omega_n * math.sqrt(1.0 - zeta * zeta)
        # First positive root of the step-response derivative; atan2 places
        # the angle in (0, pi) regardless of the sign of zeta*omega_n*T - 1.
        t_nadir = math.atan2(omega_d * t, zeta * omega_n * t - 1.0) / omega_d
        return SecondOrderChar(omega_n, zeta, omega_d, t_nadir)
    # Overdamped: no closed-form nadir time; locate the trajectory extremum.
    ts, df = simulate_step_response(agg, 1.0, horizon_s=60.0, dt=1e-3)
    t_nadir = float(ts[np.argmin(df)])
    return SecondOrderChar(omega_n, zeta, float("nan"), t_nadir,
                           overdamped=True)


def frequency_metrics(agg: AggregateParams, delta_p: float,
                      limits: FrequencyLimits) -> FrequencyMetrics:
    """Closed-form nadir, RoCoF and quasi-steady-state deviation in SI."""
    if delta_p < 0:
        raise FrequencyModelError("delta_p must be >= 0")
    if delta_p == 0:
        return FrequencyMetrics(0.0, 0.0, 0.0)
    m_eff, d, r_g, f_g, t = agg.m_eff, agg.d, agg.r_g, agg.f_g, agg.t_turbine
    if r_g < f_g:
        raise FrequencyModelError(
            "nadir expression invalid: r_g < f_g gives a negative "
            "square-root argument")
    char = second_order_char(agg)
    f_b = limits.f_base
    rocof = f_b * delta_p / m_eff
    ss = f_b * delta_p / (d + r_g)
    if char.overdamped:
        _, df = simulate_step_response(agg, delta_p, horizon_s=60.0, dt=1e-3,
                                       f_base=f_b)
        nadir = float(-df.min())
    else:
        amp = math.sqrt(t * (r_g - f_g) / m_eff)
        nadir = ss * (1.0 + amp * math.exp(-char.zeta * char.omega_n
                                           * char.t_nadir))
    return FrequencyMetrics(nadir_hz=nadir, rocof_hz_s=rocof, ss_dev_hz=ss)


def simulate_step_response(agg: AggregateParams, delta_p: float,
                           horizon_s: float = 60.0, dt: float = 1e-3,
                           f_base: float = 50.0) -> tuple[np.ndarray, np.ndarray]:
    """RK4 integration of the second-order model under a -delta_p step.

    Returns ``(t_s, delta_f_hz)``.  The model is the state-space
    realization of the transfer function with a turbine zero, so the
    initial slope equals the analytic RoCoF and the tail converges to the
    quasi-steady-state deviation.  For the constant-input LTI system the
    classical RK4 step reduces to a fixed 2x2 transition matrix, applied
    here once per step for determinism.
    """
    if dt <= 0:
        raise FrequencyModelError("dt must be > 0")
    if horizon_s < 20.0:
        raise FrequencyModelError("horizon_s must be >= 20 s")
    m_eff, d, r_g, t = agg.m_eff, agg.d, agg.r_g, agg.t_turbine
    if m_eff <= 0:
        raise FrequencyModelError("nonpositive effective inertia")
    wn2 = (d + r_g) / (m_eff * t)
    if wn2 <= 0:
        raise FrequencyModelError("unstable parameterization: omega_n^2 <= 0")
    two_zeta_wn = (m_eff + t * (d + agg.f_g)) / (m_eff * t)

    n = int(round(horizon_s / dt)) + 1
    ts = np.arange(n) * dt
    if delta_p == 0:
        return ts, np.zeros(n)

    # Controllable canonical form: x' = A x + B u with u = -delta_p,
    # y = (1/(m_eff*t)) * (x1 + t*x2).
    a = np.array([[0.0, 1.0], [-wn2, -two_zeta_wn]])
    b = np.array([0.0, -delta_p])
    # RK4 for x' = A x + b is x+ = Phi x + Gamma with the truncated
    # matrix-exponential series below.
    a2 = a @ a
    a3 = a2 @ a
    eye = np.eye(2)
    phi = eye + dt * a + dt**2 / 2 * a2 + dt**3 / 6 * a3 + dt**4 / 24 * a3 @ a
    gamma = (dt * eye + dt**2 / 2 * a + dt**3 / 6 * a2 + dt**4 / 24 * a3) @ b

    p11, p12 = phi[0]
    p21, p22 = phi[1]
    g1, g2 = gamma
    c1, c2 = 1.0 / (m_eff * t), 1.0 / m_eff
    x1 = x2 = 0.0
    y = np.empty(n)
    for i in range(n):
        y[i] = c1 * x1 + c2 * x2
        x1, x2 = p11 * x1 + p12 * x2 + g1, p21 * x1 + p22 * x2 + g2
    return ts, f_base * y


def check_limits(metrics: FrequencyMetrics,
                 limits: FrequencyLimits) -> LimitGaps:
    """Relative gap of each metric to its threshold (<= 0 passes)."""
    return LimitGaps(
        nadir=metrics.nadir_hz / limits.nadir_lim - 1.0,
        rocof=metrics.rocof_hz_s / limits.rocof_lim - 1.0,
        ss=metrics.ss_dev_hz / limits.ss_lim - 1.0,
    )
