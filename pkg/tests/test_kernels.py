"""The numba path and the pure-Python path must agree bit for bit."""

import os
import subprocess
import sys

import pytest

import seqmpc

# computes a digest of decoder outputs and plant trajectories; float values
# are hex-formatted so any single-ulp difference shows up
PROBE = r"""
import numpy as np
import seqmpc
from seqmpc.verify import random_qp_instance
from seqmpc.solver import k_best
from seqmpc.plant import GridParams, MachineParams, PlantState, SwitchState, plant_step
import math

print("jit", seqmpc.JIT_ENABLED)
rng = np.random.default_rng(7)
for n_h in (1, 2):
    for _ in range(5):
        qp = random_qp_instance(rng, n_h)
        cands = k_best(qp, 4)
        for seq, cost in cands.items:
            print("seq", seq.as_tuple(), float(cost).hex())
        print("nodes", cands.nodes_visited)

machine = MachineParams(0.1379, 0.019, 0.42675, 3)
grid = GridParams(0.156, 0.020, 250.0, 100.0 * math.pi)
st = PlantState.initial(machine, t_m=12.0)
for k in range(200):
    s_m = SwitchState(*(int(v) for v in rng.integers(-1, 2, 3)))
    s_n = SwitchState(*(int(v) for v in rng.integers(-1, 2, 3)))
    st = plant_step(st, s_m, s_n, machine, grid, 50e-6, 3)
for v in (*st.i_m_dq, *st.i_n_ab, st.dc.v_dc, st.dc.v_imb, st.mech.omega_m, st.mech.theta_e):
    print("state", float(v).hex())
"""


def _probe(numba_flag: str) -> str:
    env = dict(os.environ, SEQMPC_NUMBA=numba_flag)
    out = subprocess.run(
        [sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, timeout=600
    )
    assert out.returncode == 0, out.stderr
    return out.stdout


@pytest.mark.skipif(not seqmpc.JIT_ENABLED, reason="numba unavailable or disabled")
def test_pure_fallback_matches_jit_exactly():
    jit_out = _probe("1")
    pure_out = _probe("0")
    assert jit_out.splitlines()[0] == "jit True"
    assert pure_out.splitlines()[0] == "jit False"
    assert jit_out.splitlines()[1:] == pure_out.splitlines()[1:]


def test_env_flag_disables_jit():
    out = _probe("0")
    assert out.splitlines()[0] == "jit False"
