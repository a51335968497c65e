"""Ground-truth simulation of the three-level NPC back-to-back PMSG system.

The plant integrates the machine dq currents, grid alpha/beta currents,
DC-link voltages and the mechanical speed with fixed-step explicit Euler,
holding the applied switch states constant over each controller period
(zero-order hold).  The integration itself runs in `_kernels.integrate_plant`
so the hot loop benefits from the numba path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as _k

TWO_PI = 2.0 * math.pi

#: allowed per-phase switch levels of the three-level bridge
LEVELS = (-1, 0, 1)


class SimulationBlowUpError(RuntimeError):
    """The integrated state became non-finite."""


@dataclass(frozen=True)
class SwitchState:
    """Per-phase levels of one converter side, each in {-1, 0, 1}."""

    s_a: int
    s_b: int
    s_c: int

    def __post_init__(self):
        for s in (self.s_a, self.s_b, self.s_c):
            if s not in LEVELS:
                raise ValueError(f"switch level {s} not in {{-1, 0, 1}}")

    def as_array(self) -> np.ndarray:
        return np.array([self.s_a, self.s_b, self.s_c], dtype=np.int64)

    @classmethod
    def zero(cls) -> "SwitchState":
        return cls(0, 0, 0)

    @classmethod
    def from_array(cls, arr) -> "SwitchState":
        return cls(int(arr[0]), int(arr[1]), int(arr[2]))


@dataclass(frozen=True)
class DcLinkState:
    """Total DC-link voltage, capacitor imbalance and capacitance."""

    v_dc: float
    v_imb: float
    c: float

    def __post_init__(self):
        if not (self.v_dc > 0.0 and self.c > 0.0):
            raise ValueError("v_dc and c must be positive")
        if not (math.isfinite(self.v_dc) and math.isfinite(self.v_imb)):
            raise ValueError("non-finite DC-link state")

    def validate_balanced(self):
        if abs(self.v_imb) >= self.v_dc:
            raise ValueError("capacitor imbalance exceeds total voltage")


@dataclass(frozen=True)
class MachineParams:
    r_s: float
    l_s: float
    psi_pm: float
    pole_pairs: int

    def __post_init__(self):
        if not (self.r_s >= 0 and self.l_s > 0 and self.psi_pm > 0 and self.pole_pairs >= 1):
            raise ValueError("invalid machine parameters")


@dataclass(frozen=True)
class GridParams:
    r_n: float
    l_n: float
    e_peak: float
    omega_n: float

    def __post_init__(self):
        if not (self.r_n >= 0 and self.l_n > 0 and self.e_peak >= 0 and self.omega_n > 0):
            raise ValueError("invalid grid parameters")


@dataclass(frozen=True)
class MechState:
    omega_m: float
    omega_e: float
    theta_e: float
    inertia_j: float
    t_m: float

    def __post_init__(self):
        if self.inertia_j <= 0:
            raise ValueError("inertia must be positive")


@dataclass(frozen=True)
class PlantState:
    """Full simulated system state at one instant."""

    i_m_dq: np.ndarray
    i_n_ab: np.ndarray
    dc: DcLinkState
    mech: MechState
    t: float

    @classmethod
    def initial(
        cls,
        machine: MachineParams,
        v_dc: float = 700.0,
        v_imb: float = 0.0,
        c: float = 1100e-6,
        inertia: float = 0.05,
        omega_m: float = 0.0,
        theta_e: float = 0.0,
        t_m: float = 0.0,
    ) -> "PlantState":
        mech = MechState(
            omega_m=omega_m,
            omega_e=machine.pole_pairs * omega_m,
            theta_e=theta_e % TWO_PI,
            inertia_j=inertia,
            t_m=t_m,
        )
        dc = DcLinkState(v_dc=v_dc, v_imb=v_imb, c=c)
        dc.validate_balanced()
        return cls(
            i_m_dq=np.zeros(2),
            i_n_ab=np.zeros(2),
            dc=dc,
            mech=mech,
            t=0.0,
        )

    def with_torque(self, t_m: float) -> "PlantState":
        return replace(self, mech=replace(self.mech, t_m=t_m))


# ---------------------------------------------------------------------------
# individual physics operations
# ---------------------------------------------------------------------------


def converter_voltage(s: SwitchState, dc: DcLinkState) -> np.ndarray:
    """Three-phase terminal voltage produced by one switch state."""
    return np.array(_k.converter_voltage3(s.s_a, s.s_b, s.s_c, dc.v_dc, dc.v_imb))


def converter_matrix(dc: DcLinkState) -> np.ndarray:
    """3x3 map from a switch vector to the three-phase voltage."""
    g = (dc.v_dc + dc.v_imb) / 6.0
    return g * np.array([[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]])


def dc_link_derivative(s_m: SwitchState, s_n: SwitchState, i_m_abc, i_n_abc, c: float):
    """Rates of change of the total DC voltage and of the imbalance."""
    dv_dc, dv_imb = _k.dc_link_deriv2(
        s_m.s_a, s_m.s_b, s_m.s_c, s_n.s_a, s_n.s_b, s_n.s_c,
        float(i_m_abc[0]), float(i_m_abc[1]), float(i_m_abc[2]),
        float(i_n_abc[0]), float(i_n_abc[1]), float(i_n_abc[2]),
        c,
    )
    return dv_dc, dv_imb


def machine_derivative(x_dq, u_dq, omega_e: float, p: MachineParams) -> np.ndarray:
    """dq current derivative of the PMSG stator including back-EMF."""
    return np.array(
        _k.machine_deriv2(
            float(x_dq[0]), float(x_dq[1]), float(u_dq[0]), float(u_dq[1]),
            omega_e, p.r_s, p.l_s, p.psi_pm,
        )
    )


def grid_derivative(x_ab, u_ab, e_ab, p: GridParams) -> np.ndarray:
    """alpha/beta current derivative of the RL grid filter."""
    return np.array(
        _k.grid_deriv2(
            float(x_ab[0]), float(x_ab[1]), float(u_ab[0]), float(u_ab[1]),
            float(e_ab[0]), float(e_ab[1]), p.r_n, p.l_n,
        )
    )


def grid_emf(t: float, p: GridParams) -> np.ndarray:
    """Grid EMF in alpha/beta at time `t` (balanced three-phase source)."""
    return np.array(_k.grid_emf2(t, p.e_peak, p.omega_n))


def power_output(x_ab, e_ab):
    """Active and reactive power delivered at the grid connection."""
    e_a, e_b = float(e_ab[0]), float(e_ab[1])
    i_a, i_b = float(x_ab[0]), float(x_ab[1])
    p = e_a * i_a + e_b * i_b
    q = e_b * i_a - e_a * i_b
    return p, q


def electromagnetic_torque(i_q: float, p: MachineParams) -> float:
    return _k.torque_of_iq(float(i_q), p.pole_pairs, p.psi_pm)


def mech_step(m: MechState, t_e: float, dt: float, pole_pairs: int) -> MechState:
    """One Euler step of the rotor speed; the angle integrates the new speed."""
    omega_m = m.omega_m + dt * (m.t_m - t_e) / m.inertia_j
    omega_e = pole_pairs * omega_m
    theta_e = (m.theta_e + dt * omega_e) % TWO_PI
    return replace(m, omega_m=omega_m, omega_e=omega_e, theta_e=theta_e)


def plant_step(
    st: PlantState,
    s_m: SwitchState,
    s_n: SwitchState,
    machine: MachineParams,
    grid: GridParams,
    dt: float,
    substeps: int = 10,
) -> PlantState:
    """Advance the plant by one controller period under constant switches."""
    if dt <= 0 or substeps < 1:
        raise ValueError("dt must be positive and substeps >= 1")
    out = _k.integrate_plant(
        float(st.i_m_dq[0]), float(st.i_m_dq[1]),
        float(st.i_n_ab[0]), float(st.i_n_ab[1]),
        st.dc.v_dc, st.dc.v_imb,
        st.mech.omega_m, st.mech.theta_e, st.t,
        s_m.s_a, s_m.s_b, s_m.s_c, s_n.s_a, s_n.s_b, s_n.s_c,
        machine.r_s, machine.l_s, machine.psi_pm, machine.pole_pairs,
        grid.r_n, grid.l_n, grid.e_peak, grid.omega_n,
        st.dc.c, st.mech.inertia_j, st.mech.t_m,
        dt, substeps,
    )
    i_md, i_mq, i_na, i_nb, v_dc, v_imb, omega_m, theta_e, t = out
    for v in out:
        if not math.isfinite(v):
            raise SimulationBlowUpError("plant state became non-finite")
    if v_dc <= 0.0:
        raise SimulationBlowUpError("DC-link voltage collapsed")
    return PlantState(
        i_m_dq=np.array([i_md, i_mq]),
        i_n_ab=np.array([i_na, i_nb]),
        dc=DcLinkState(v_dc=v_dc, v_imb=v_imb, c=st.dc.c),
        mech=replace(
            st.mech,
            omega_m=omega_m,
            omega_e=machine.pole_pairs * omega_m,
            theta_e=theta_e,
        ),
        t=t,
    )
