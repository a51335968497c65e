"""Scenario definitions, the closed-loop driver, metrics and sweeps.

A scenario bundles the plant parameters, initial conditions, piecewise
reference profiles and the controller configuration(s).  `run_scenario`
alternates the controller and the plant for the requested duration and
returns a uniformly sampled record of everything; metric helpers reduce a
record to THD / RMSE / switching-frequency / node-count figures; `sweep`
crosses controller-parameter lists and collects one metrics row per
configuration.  Runs are fully deterministic for a given configuration.
"""

from __future__ import annotations

import configparser
import csv
import io
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import ClassVar

import numpy as np

from .controller import ControllerConfig, ReferenceState, build_references, control_step
from .plant import (
    GridParams,
    MachineParams,
    PlantState,
    SimulationBlowUpError,
    SwitchState,
    electromagnetic_torque,
    grid_emf,
    plant_step,
    power_output,
)

RPM_TO_RAD_S = 2.0 * math.pi / 60.0

#: CSV floats are printed with this format for byte-stable output
FLOAT_FMT = "%.9g"

#: any state magnitude beyond this is treated as a diverged simulation
_DIVERGENCE_LIMIT = 1e9


class ConfigError(ValueError):
    """A scenario configuration file or override is invalid."""


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment: plant constants, profiles and controller grid.

    `horizons`/`n_ks`/`n_ls`/`lambdas`/`modes` hold lists so the same type
    drives both single runs (singletons) and sweeps (cross product).
    """

    duration: float = 0.5
    t_s: float = 50e-6
    substeps: int = 10
    seed: int = 1

    # plant constants
    r_s: float = 0.1379
    l_s: float = 0.019
    psi_pm: float = 0.42675
    pole_pairs: int = 3
    r_n: float = 0.156
    l_n: float = 0.020
    e_peak: float = 250.0
    omega_n: float = 100.0 * math.pi
    c_dc: float = 1100e-6
    inertia: float = 0.05
    v_dc_ref: float = 700.0

    # initial state
    v_dc0: float = 700.0
    v_imb0: float = 0.0
    omega_m0: float = 0.0
    theta_e0: float = 0.0

    # reference profiles: ((time, value), ...) sorted by time
    speed_rpm: tuple = ((0.0, 1125.0),)
    torque_nm: tuple = ((0.0, 25.0),)

    # outer loops
    speed_kp: float = 1.0
    t_e_max: float = 60.0
    pi_kp: float = -0.5
    pi_ki: float = -20.0
    pi_clamp: float = 50.0

    # controller grid
    horizons: tuple = (3,)
    n_ks: tuple = (4,)
    n_ls: tuple = (4,)
    lambdas: tuple = (0.1,)
    modes: tuple = ("sequential",)
    lambda_v: float = 0.02  # accepted for config compatibility; unused here

    # metrics
    thd_periods: int = 5
    steady_fraction: float = 0.4

    def __post_init__(self):
        if self.duration <= 0 or self.t_s <= 0:
            raise ConfigError("duration and t_s must be positive")
        if self.substeps < 1:
            raise ConfigError("substeps must be >= 1")
        for prof in (self.speed_rpm, self.torque_nm):
            times = [t for t, _ in prof]
            if times != sorted(times):
                raise ConfigError("profiles must be sorted by time")

    def machine(self) -> MachineParams:
        return MachineParams(self.r_s, self.l_s, self.psi_pm, self.pole_pairs)

    def grid(self) -> GridParams:
        return GridParams(self.r_n, self.l_n, self.e_peak, self.omega_n)

    def controller(self) -> ControllerConfig:
        for name in ("horizons", "n_ks", "n_ls", "lambdas", "modes"):
            if len(getattr(self, name)) != 1:
                raise ConfigError(f"`run` needs a single value for {name}")
        return ControllerConfig(
            n_h=self.horizons[0],
            n_k=self.n_ks[0],
            n_l=self.n_ls[0],
            lam=self.lambdas[0],
            t_s=self.t_s,
            mode=self.modes[0],
        )

    def controller_grid(self):
        combos = itertools.product(
            self.horizons, self.n_ks, self.n_ls, self.lambdas, self.modes
        )
        return [
            ControllerConfig(n_h=h, n_k=nk, n_l=nl, lam=lam, t_s=self.t_s, mode=mode)
            for h, nk, nl, lam, mode in combos
        ]

    def n_steps(self) -> int:
        return int(round(self.duration / self.t_s))

    def fundamental_hz(self) -> float:
        """Machine electrical frequency implied by the final speed reference."""
        rpm = self.speed_rpm[-1][1]
        return self.pole_pairs * rpm / 60.0


def profile_value(profile, t: float) -> float:
    value = profile[0][1]
    for t_i, v_i in profile:
        if t_i <= t + 1e-15:
            value = v_i
        else:
            break
    return value


# ---------------------------------------------------------------------------
# time series
# ---------------------------------------------------------------------------

TS_COLUMNS = (
    "t", "i_m_d", "i_m_q", "i_m_a", "i_m_b", "i_m_c",
    "i_n_al", "i_n_be", "v_dc", "v_imb",
    "omega_m", "t_e", "t_e_ref", "i_q_ref",
    "p", "q", "p_ref", "q_ref",
    "s_m_a", "s_m_b", "s_m_c", "s_n_a", "s_n_b", "s_n_c",
    "j_m", "j_n", "j_o", "nodes_m", "nodes_n",
)


@dataclass
class TimeSeries:
    """Column store of per-step records, sampled at the controller period."""

    t_s: float
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.data:
            self.data = {name: [] for name in TS_COLUMNS}

    def append(self, **kwargs):
        for name in TS_COLUMNS:
            self.data[name].append(kwargs[name])

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.data[name])

    def __len__(self):
        return len(self.data["t"])

    def steady_slice(self, fraction: float) -> slice:
        n = len(self)
        return slice(int(round(n * (1.0 - fraction))), n)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            _write_rows(fh, TS_COLUMNS, zip(*(self.data[c] for c in TS_COLUMNS)))


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return FLOAT_FMT % float(value)


def _write_rows(fh, header, rows):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# closed loop
# ---------------------------------------------------------------------------


def run_scenario(cfg: ScenarioConfig, controller: ControllerConfig | None = None) -> TimeSeries:
    """Simulate the closed loop and record every controller period.

    Raises SimulationBlowUpError (annotated with the step index) if the
    plant state leaves the finite range.
    """
    ctrl = controller if controller is not None else cfg.controller()
    machine = cfg.machine()
    grid = cfg.grid()
    state = PlantState.initial(
        machine,
        v_dc=cfg.v_dc0,
        v_imb=cfg.v_imb0,
        c=cfg.c_dc,
        inertia=cfg.inertia,
        omega_m=cfg.omega_m0,
        theta_e=cfg.theta_e0,
    )
    refs = ReferenceState(
        pi_kp=cfg.pi_kp,
        pi_ki=cfg.pi_ki,
        pi_clamp=cfg.pi_clamp,
        v_dc_ref=cfg.v_dc_ref,
    )
    u_prev_m = SwitchState.zero()
    u_prev_n = SwitchState.zero()
    series = TimeSeries(t_s=cfg.t_s)

    for step in range(cfg.n_steps()):
        scale = max(
            np.abs(state.i_m_dq).max(), np.abs(state.i_n_ab).max(),
            abs(state.dc.v_dc), abs(state.mech.omega_m),
        )
        if scale > _DIVERGENCE_LIMIT:
            raise SimulationBlowUpError(f"step {step}: state diverged (|x| > {_DIVERGENCE_LIMIT:g})")
        t = step * cfg.t_s
        omega_ref = profile_value(cfg.speed_rpm, t) * RPM_TO_RAD_S
        t_mech = profile_value(cfg.torque_nm, t)
        state = state.with_torque(t_mech)

        # proportional speed loop with load feedforward supplies the torque
        # reference; positive gain brakes above the speed reference
        t_e_ref = cfg.speed_kp * (state.mech.omega_m - omega_ref) + t_mech
        t_e_ref = float(np.clip(t_e_ref, -cfg.t_e_max, cfg.t_e_max))
        refs = replace(refs, t_e_ref=t_e_ref, omega_m_ref=omega_ref)
        refs = build_references(state, machine, refs, cfg.t_s)

        try:
            decision = control_step(
                state, ctrl, refs, machine, grid, u_prev_m, u_prev_n
            )
            e_ab = grid_emf(state.t, grid)
            p, q = power_output(state.i_n_ab, e_ab)
            i_m_abc = _machine_abc(state)
            series.append(
                t=t,
                i_m_d=state.i_m_dq[0], i_m_q=state.i_m_dq[1],
                i_m_a=i_m_abc[0], i_m_b=i_m_abc[1], i_m_c=i_m_abc[2],
                i_n_al=state.i_n_ab[0], i_n_be=state.i_n_ab[1],
                v_dc=state.dc.v_dc, v_imb=state.dc.v_imb,
                omega_m=state.mech.omega_m,
                t_e=electromagnetic_torque(state.i_m_dq[1], machine),
                t_e_ref=refs.t_e_ref, i_q_ref=refs.i_dq_ref[1],
                p=p, q=q, p_ref=refs.pq_ref[0], q_ref=refs.pq_ref[1],
                s_m_a=decision.s_m.s_a, s_m_b=decision.s_m.s_b, s_m_c=decision.s_m.s_c,
                s_n_a=decision.s_n.s_a, s_n_b=decision.s_n.s_b, s_n_c=decision.s_n.s_c,
                j_m=decision.j_m, j_n=decision.j_n, j_o=decision.j_o,
                nodes_m=decision.nodes_m, nodes_n=decision.nodes_n,
            )
            state = plant_step(
                state, decision.s_m, decision.s_n, machine, grid,
                cfg.t_s, cfg.substeps,
            )
        except SimulationBlowUpError as exc:
            raise SimulationBlowUpError(f"step {step}: {exc}") from exc
        u_prev_m, u_prev_n = decision.s_m, decision.s_n
    return series


def _machine_abc(state: PlantState) -> np.ndarray:
    from .transforms import clarke_pinv, park_inv

    return clarke_pinv(park_inv(state.i_m_dq, state.mech.theta_e))


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunMetrics:
    thd_machine: float
    rmse_te: float
    rmse_q: float
    rmse_p: float
    rmse_v_imb: float
    rmse_v_dc: float
    f_sw_machine: float
    f_sw_grid: float
    avg_nodes: float

    FIELDS: ClassVar[tuple] = (
        "thd_machine", "rmse_te", "rmse_q", "rmse_p", "rmse_v_imb",
        "rmse_v_dc", "f_sw_machine", "f_sw_grid", "avg_nodes",
    )

    def as_row(self):
        return [getattr(self, name) for name in self.FIELDS]


def compute_rmse(series, ref_series) -> float:
    series = np.asarray(series, float)
    ref = np.asarray(ref_series, float)
    if series.size == 0:
        raise ValueError("empty series")
    if series.shape != ref.shape:
        raise ValueError("series lengths differ")
    return float(np.sqrt(np.mean((series - ref) ** 2)))


def compute_thd(signal, t_s: float, fundamental_hz: float, window_periods: int = 5):
    """Total harmonic distortion over a trailing integer-period window.

    The window length is rounded to the nearest whole number of samples, the
    fundamental lands on DFT bin `window_periods`, and only integer harmonic
    bins up to Nyquist enter the distortion sum.
    """
    signal = np.asarray(signal, float)
    if fundamental_hz <= 0:
        raise ValueError("fundamental frequency must be positive")
    n = int(round(window_periods / (fundamental_hz * t_s)))
    if n < 2 * window_periods or n > signal.size:
        raise ValueError("window does not fit the signal")
    window = signal[-n:]
    spectrum = np.abs(np.fft.rfft(window))
    fund = spectrum[window_periods]
    if fund == 0.0:
        raise ValueError("zero fundamental magnitude")
    harmonics = np.arange(2 * window_periods, spectrum.size, window_periods)
    return float(np.sqrt(np.sum(spectrum[harmonics] ** 2)) / fund)


def thd_spectrum(signal, t_s: float, fundamental_hz: float, window_periods: int = 5):
    """(frequency, magnitude) arrays of the THD window, amplitude-scaled."""
    signal = np.asarray(signal, float)
    n = int(round(window_periods / (fundamental_hz * t_s)))
    if n > signal.size:
        raise ValueError("window does not fit the signal")
    window = signal[-n:]
    mags = np.abs(np.fft.rfft(window)) * 2.0 / n
    freqs = np.fft.rfftfreq(n, t_s)
    return freqs, mags


def compute_switching_frequency(switch_series, t_s: float) -> float:
    """Per-phase average switching rate; a -1 -> 1 jump counts two changes."""
    levels = np.asarray(switch_series)
    if levels.ndim != 2 or levels.shape[1] != 3:
        raise ValueError("expected an (n, 3) level array")
    n = levels.shape[0]
    if n < 2:
        return 0.0
    changes = np.abs(np.diff(levels, axis=0)).sum()
    return float(changes / (3.0 * (n - 1) * t_s))


def compute_metrics(series: TimeSeries, cfg: ScenarioConfig) -> RunMetrics:
    """Steady-state metrics over the trailing fraction of the run."""
    sl = series.steady_slice(cfg.steady_fraction)
    f1 = cfg.fundamental_hz()
    thd = compute_thd(series.column("i_m_a"), cfg.t_s, f1, cfg.thd_periods)
    sw_m = np.stack(
        [series.column("s_m_a"), series.column("s_m_b"), series.column("s_m_c")], axis=1
    )[sl]
    sw_n = np.stack(
        [series.column("s_n_a"), series.column("s_n_b"), series.column("s_n_c")], axis=1
    )[sl]
    nodes = series.column("nodes_m") + series.column("nodes_n")
    return RunMetrics(
        thd_machine=thd,
        rmse_te=compute_rmse(series.column("t_e")[sl], series.column("t_e_ref")[sl]),
        rmse_q=compute_rmse(series.column("q")[sl], series.column("q_ref")[sl]),
        rmse_p=compute_rmse(series.column("p")[sl], series.column("p_ref")[sl]),
        rmse_v_imb=compute_rmse(
            series.column("v_imb")[sl], np.zeros_like(series.column("v_imb")[sl])
        ),
        rmse_v_dc=compute_rmse(
            series.column("v_dc")[sl],
            np.full(series.column("v_dc")[sl].shape, cfg.v_dc_ref),
        ),
        f_sw_machine=compute_switching_frequency(sw_m, cfg.t_s),
        f_sw_grid=compute_switching_frequency(sw_n, cfg.t_s),
        avg_nodes=float(np.mean(nodes)),
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("n_h", "n_k", "n_l", "lambda", "mode", "status") + RunMetrics.FIELDS


def sweep(cfg: ScenarioConfig):
    """Run every controller configuration of the grid; failures become rows.

    Returns a list of row dicts keyed by SWEEP_COLUMNS.
    """
    grid = cfg.controller_grid()
    if not grid:
        raise ConfigError("empty controller grid")
    rows = []
    for ctrl in grid:
        row = {
            "n_h": ctrl.n_h, "n_k": ctrl.n_k, "n_l": ctrl.n_l,
            "lambda": ctrl.lam, "mode": ctrl.mode,
        }
        try:
            series = run_scenario(cfg, ctrl)
            metrics = compute_metrics(series, cfg)
            row["status"] = "ok"
            for name in RunMetrics.FIELDS:
                row[name] = getattr(metrics, name)
        except Exception as exc:  # noqa: BLE001 - sweep must survive bad cells
            row["status"] = f"error: {exc}"
            for name in RunMetrics.FIELDS:
                row[name] = math.nan
        rows.append(row)
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        _write_rows(fh, SWEEP_COLUMNS, ([row[c] for c in SWEEP_COLUMNS] for row in rows))


def write_metrics_csv(metrics: RunMetrics, ctrl: ControllerConfig, path):
    header = ("n_h", "n_k", "n_l", "lambda", "mode") + RunMetrics.FIELDS
    row = [ctrl.n_h, ctrl.n_k, ctrl.n_l, ctrl.lam, ctrl.mode] + metrics.as_row()
    with open(path, "w", newline="") as fh:
        _write_rows(fh, header, [row])


def write_spectrum_csv(series: TimeSeries, cfg: ScenarioConfig, path):
    f1 = cfg.fundamental_hz()
    freqs, mag_a = thd_spectrum(series.column("i_m_a"), cfg.t_s, f1, cfg.thd_periods)
    _, mag_b = thd_spectrum(series.column("i_m_b"), cfg.t_s, f1, cfg.thd_periods)
    _, mag_c = thd_spectrum(series.column("i_m_c"), cfg.t_s, f1, cfg.thd_periods)
    with open(path, "w", newline="") as fh:
        _write_rows(fh, ("freq_hz", "mag_a", "mag_b", "mag_c"), zip(freqs, mag_a, mag_b, mag_c))


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------

_SECTIONS = {
    "scenario": ("duration", "t_s", "substeps", "seed"),
    "plant": (
        "r_s", "l_s", "psi_pm", "pole_pairs", "r_n", "l_n", "e_peak",
        "omega_n", "c_dc", "inertia", "v_dc_ref",
    ),
    "initial": ("v_dc0", "v_imb0", "omega_m0", "theta_e0"),
    "references": (
        "speed_rpm", "torque_nm", "speed_kp", "t_e_max", "pi_kp", "pi_ki", "pi_clamp",
    ),
    "controller": ("horizons", "n_ks", "n_ls", "lambdas", "modes", "lambda_v"),
    "metrics": ("thd_periods", "steady_fraction"),
}

_INT_FIELDS = {"substeps", "seed", "pole_pairs", "thd_periods"}
_PROFILE_FIELDS = {"speed_rpm", "torque_nm"}
_INT_LIST_FIELDS = {"horizons", "n_ks", "n_ls"}
_FLOAT_LIST_FIELDS = {"lambdas"}
_STR_LIST_FIELDS = {"modes"}


def _parse_profile(raw: str):
    try:
        pairs = []
        for item in raw.split(","):
            t_str, v_str = item.split(":")
            pairs.append((float(t_str), float(v_str)))
        return tuple(pairs)
    except ValueError as exc:
        raise ConfigError(f"bad profile {raw!r}; expected 't:value, t:value'") from exc


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    try:
        if name in _PROFILE_FIELDS:
            return _parse_profile(raw)
        if name in _INT_LIST_FIELDS:
            return tuple(int(v) for v in raw.split(","))
        if name in _FLOAT_LIST_FIELDS:
            return tuple(float(v) for v in raw.split(","))
        if name in _STR_LIST_FIELDS:
            return tuple(v.strip() for v in raw.split(","))
        if name in _INT_FIELDS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def load_config(path) -> ScenarioConfig:
    """Parse a flat key-value scenario file into a ScenarioConfig."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    known = {name: section for section, names in _SECTIONS.items() for name in names}
    overrides = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for name, raw in parser.items(section):
            if name not in known or known[name] != section:
                raise ConfigError(f"unknown key {name!r} in [{section}]")
            overrides[name] = _parse_value(name, raw)
    try:
        return ScenarioConfig(**overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def dump_config(cfg: ScenarioConfig) -> str:
    """Render a ScenarioConfig back to the flat key-value format."""
    parser = configparser.ConfigParser()
    for section, names in _SECTIONS.items():
        parser[section] = {}
        for name in names:
            value = getattr(cfg, name)
            if name in _PROFILE_FIELDS:
                text = ", ".join(f"{t:.12g}:{v:.12g}" for t, v in value)
            elif isinstance(value, tuple):
                text = ", ".join(str(v) for v in value)
            else:
                text = str(value)
            parser[section][name] = text
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()
