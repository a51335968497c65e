"""Condensed integer least-squares subproblems and the k-best sphere decoder.

Each outer-loop subproblem  min ||Y - Yref||^2 + lambda ||dU||^2  over switch
sequences in {-1,0,1}^(3N) is condensed to an equivalent triangular form
min ||target - factor @ U||^2 with `factor` lower triangular, then solved
exactly by depth-first branch and bound (`sphere_decode`).  `k_best` repeats
the search, excluding each returned sequence, to produce the ordered k
cheapest candidates; `brute_force_kbest` is the independent enumeration
oracle.  The inner loop (`select_pair`) scores every machine/grid candidate
pair by its predicted DC-link imbalance and keeps the minimizer.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from . import _kernels as _k
from .plant import GridParams, MachineParams, PlantState, SwitchState, grid_emf
from .prediction import (
    HorizonMismatchError,
    MultistepModel,
    SwitchSequence,
    build_grid_subsystem,
    build_machine_subsystem,
    discretize,
    imbalance_contributions,
    imbalance_path,
)
from .transforms import CLARKE_PINV_MAT, park_matrix

#: guard for exhaustive enumeration (27**4 = 531441 sequences)
MAX_BRUTE_HORIZON = 4

_RHO_TRACE_LEN = 4096


class SolverError(RuntimeError):
    """Base class for decoder-level failures."""


class NotPositiveDefiniteError(SolverError):
    def __init__(self, pivot: int):
        super().__init__(f"matrix is not positive definite (pivot {pivot})")
        self.pivot = pivot


class RadiusTooSmallError(SolverError):
    """The provided search radius contains no admissible sequence."""


class EmptyCandidateSpaceError(SolverError):
    """Every sequence of the alphabet has been excluded."""


@dataclass(frozen=True)
class QpForm:
    """Condensed quadratic subproblem in both raw and triangular form.

    Invariants: factor is lower triangular with positive diagonal,
    factor.T @ factor == quad, quad @ unconstrained == lin, and
    target == factor @ unconstrained.
    """

    quad: np.ndarray
    lin: np.ndarray
    factor: np.ndarray
    unconstrained: np.ndarray
    target: np.ndarray
    weight: float
    horizon: int


@dataclass(frozen=True)
class DecodeResult:
    best: SwitchSequence
    best_cost: float
    runner_up: Optional[SwitchSequence]
    runner_cost: float
    nodes: int
    rho_trace: np.ndarray


@dataclass
class CandidateList:
    """Ordered k-best sequences with costs and search statistics."""

    items: list  # list[(SwitchSequence, float)]
    k: int
    nodes_visited: int = 0

    def __post_init__(self):
        costs = [c for _, c in self.items]
        if any(b < a for a, b in zip(costs, costs[1:])):
            raise ValueError("candidate costs must be nondecreasing")

    @property
    def sequences(self) -> list:
        return [s for s, _ in self.items]

    @property
    def costs(self) -> list:
        return [c for _, c in self.items]

    def __len__(self):
        return len(self.items)


# ---------------------------------------------------------------------------
# factorization
# ---------------------------------------------------------------------------


def _pivot_floor(q: np.ndarray) -> float:
    # reject numerically singular matrices, not just indefinite ones
    return float(q.shape[0] * np.finfo(np.float64).eps * max(np.abs(np.diag(q)).max(), 1e-300))


def cholesky(q: np.ndarray) -> np.ndarray:
    """Standard lower Cholesky factor L with L @ L.T == q."""
    q = np.ascontiguousarray(q, dtype=np.float64)
    out = np.zeros_like(q)
    pivot = _k.cholesky_lower(q, out, _pivot_floor(q))
    if pivot >= 0:
        raise NotPositiveDefiniteError(int(pivot))
    return out


def reverse_cholesky(q: np.ndarray) -> np.ndarray:
    """Lower-triangular H with H.T @ H == q.

    Obtained by factoring the index-reversed matrix; this is the orientation
    the decoder needs so that row k of H touches only entries 1..k and the
    layer-by-layer residual accumulation over 1..3N is exact.
    """
    qf = np.ascontiguousarray(q[::-1, ::-1], dtype=np.float64)
    out = np.zeros_like(qf)
    pivot = _k.cholesky_lower(qf, out, _pivot_floor(q))
    if pivot >= 0:
        raise NotPositiveDefiniteError(int(q.shape[0] - 1 - pivot))
    return np.ascontiguousarray(out.T[::-1, ::-1])


# ---------------------------------------------------------------------------
# condensation
# ---------------------------------------------------------------------------


def condense(
    m: MultistepModel, x0, y_ref, u_prev: SwitchState, weight: float
):
    """Quadratic coefficients (quad, lin) of the subproblem cost.

    The cost ||forced U + free x0 + drift - y_ref||^2
    + weight ||diff U - prev u_prev||^2 expands to
    U' quad U - 2 lin' U + const.
    """
    if weight < 0:
        raise ValueError("effort weight must be nonnegative")
    x0 = np.asarray(x0, float)
    y_ref = np.asarray(y_ref, float)
    residual = m.free_map @ x0 + m.drift_vec - y_ref
    quad = m.forced_map.T @ m.forced_map + weight * (m.diff_mat.T @ m.diff_mat)
    lin = -(m.forced_map.T @ residual) + weight * (
        m.diff_mat.T @ (m.prev_sel @ u_prev.as_array())
    )
    return quad, lin


def assemble_qp(
    m: MultistepModel, x0, y_ref, u_prev: SwitchState, weight: float
) -> QpForm:
    """Condense one subproblem and bring it to triangular decoding form."""
    quad, lin = condense(m, x0, y_ref, u_prev, weight)
    factor = reverse_cholesky(quad)
    unconstrained = np.linalg.solve(quad, lin)
    target = factor @ unconstrained
    return QpForm(
        quad=quad,
        lin=lin,
        factor=np.ascontiguousarray(factor),
        unconstrained=unconstrained,
        target=np.ascontiguousarray(target),
        weight=weight,
        horizon=m.horizon,
    )


def residual_cost(qp: QpForm, seq: SwitchSequence) -> float:
    """Decoder-metric cost of one sequence (same arithmetic as the search)."""
    return float(_k.sequence_cost(qp.factor, qp.target, seq.levels))


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------


def _babai_point(qp: QpForm) -> SwitchSequence:
    rounded = np.clip(np.rint(qp.unconstrained), -1, 1).astype(np.int64)
    return SwitchSequence(levels=rounded, horizon=qp.horizon)


def _exclude_array(exclude, n: int) -> np.ndarray:
    rows = [np.asarray(seq.levels, np.int64) for seq in exclude]
    if not rows:
        return np.empty((0, n), np.int64)
    return np.ascontiguousarray(np.stack(rows))


def sphere_decode(
    qp: QpForm,
    radius_sq: float = np.inf,
    exclude: Iterable[SwitchSequence] = (),
    warm_start: Optional[tuple] = None,
) -> DecodeResult:
    """Exact minimizer of the triangular form over non-excluded sequences.

    `warm_start` is an optional (sequence, cost) pair used to seed the
    incumbent (and hence the initial radius).  Without a warm start and with
    an infinite radius, the search seeds itself with the alphabet-clamped
    rounding of the unconstrained solution, which is always admissible.

    Raises RadiusTooSmallError if a finite radius admits no sequence, and
    EmptyCandidateSpaceError if the exclusions cover the whole alphabet.
    """
    n = qp.factor.shape[0]
    exclude = set(exclude)
    if len(exclude) >= 3 ** n:
        raise EmptyCandidateSpaceError("all sequences excluded")
    excl_arr = _exclude_array(exclude, n)

    have_seed = False
    seed_levels = np.zeros(n, np.int64)
    seed_cost = 0.0
    explicit_radius = np.isfinite(radius_sq)
    if warm_start is not None:
        seq, cost = warm_start
        if seq not in exclude:
            have_seed = True
            seed_levels = np.asarray(seq.levels, np.int64)
            seed_cost = float(cost)
    elif not explicit_radius:
        babai = _babai_point(qp)
        if babai not in exclude:
            have_seed = True
            seed_levels = babai.levels
            seed_cost = float(_k.sequence_cost(qp.factor, qp.target, babai.levels))

    rho_trace = np.zeros(_RHO_TRACE_LEN)
    best, best_cost, found, runner, runner_cost, have_runner, nodes, n_trace = _k.sd_search(
        qp.factor, qp.target, excl_arr,
        seed_levels, have_seed, seed_cost, float(radius_sq), rho_trace,
    )
    if not found:
        if explicit_radius:
            raise RadiusTooSmallError(
                f"no sequence within squared radius {radius_sq}"
            )
        raise EmptyCandidateSpaceError("search exhausted without a candidate")
    return DecodeResult(
        best=SwitchSequence(levels=best, horizon=qp.horizon),
        best_cost=float(best_cost),
        runner_up=SwitchSequence(levels=runner, horizon=qp.horizon) if have_runner else None,
        runner_cost=float(runner_cost),
        nodes=int(nodes),
        rho_trace=rho_trace[: int(n_trace)].copy(),
    )


def k_best(qp: QpForm, k: int) -> CandidateList:
    """The k cheapest sequences in cost order, exact against enumeration.

    Each round excludes the sequences already returned and warm-starts the
    next search from the previous round's runner-up; the runner-up is a
    feasible point of the shrunken problem, so its cost is a valid radius
    that can never prune the true next-best.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = qp.factor.shape[0]
    total = 3 ** n
    exclude: set = set()
    items = []
    nodes = 0
    warm = None
    for _ in range(min(k, total)):
        res = sphere_decode(qp, exclude=exclude, warm_start=warm)
        items.append((res.best, res.best_cost))
        exclude.add(res.best)
        nodes += res.nodes
        warm = (res.runner_up, res.runner_cost) if res.runner_up is not None else None
    return CandidateList(items=items, k=k, nodes_visited=nodes)


def all_sequences(n_h: int) -> np.ndarray:
    """Every switch sequence of the horizon in lexicographic order."""
    if n_h > MAX_BRUTE_HORIZON:
        raise ValueError(f"enumeration horizon capped at {MAX_BRUTE_HORIZON}")
    combos = itertools.product((-1, 0, 1), repeat=3 * n_h)
    return np.array(list(combos), dtype=np.int64)


def brute_force_kbest(
    qp_or_cost, k: int, n_h: int
) -> CandidateList:
    """Enumeration oracle: sort all sequences by (cost, lexicographic).

    Accepts either a QpForm (scored with the decoder's own residual metric)
    or an arbitrary cost callable on SwitchSequence.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    seqs = all_sequences(n_h)
    if isinstance(qp_or_cost, QpForm):
        costs = np.empty(seqs.shape[0])
        _k.sequence_costs_batch(qp_or_cost.factor, qp_or_cost.target, seqs, costs)
    else:
        cost_fn: Callable = qp_or_cost
        costs = np.array(
            [cost_fn(SwitchSequence(levels=row, horizon=n_h)) for row in seqs]
        )
    ranked = sorted(
        range(seqs.shape[0]), key=lambda i: (costs[i], tuple(seqs[i]))
    )
    items = [
        (SwitchSequence(levels=seqs[i], horizon=n_h), float(costs[i]))
        for i in ranked[:k]
    ]
    return CandidateList(items=items, k=k, nodes_visited=seqs.shape[0])


# ---------------------------------------------------------------------------
# inner loop: DC-link imbalance pair selection
# ---------------------------------------------------------------------------


def select_pair(
    st: PlantState,
    machine_cands: CandidateList,
    grid_cands: CandidateList,
    machine: MachineParams,
    grid: GridParams,
    t_s: float,
):
    """Candidate pair minimizing the predicted squared imbalance norm.

    All len(machine_cands) * len(grid_cands) pairs are evaluated; ties keep
    the pair with the lowest (machine index, grid index).
    """
    if not machine_cands.items or not grid_cands.items:
        raise ValueError("candidate lists must be nonempty")
    hor_m = machine_cands.sequences[0].horizon
    hor_n = grid_cands.sequences[0].horizon
    if hor_m != hor_n:
        raise HorizonMismatchError(f"horizons differ: {hor_m} vs {hor_n}")

    model_m = discretize(
        build_machine_subsystem(machine, st.mech.omega_e, st.dc, st.mech.theta_e), t_s
    )
    model_n = discretize(build_grid_subsystem(grid, grid_emf(st.t, grid), st.dc), t_s)
    gain = t_s / st.dc.c
    proj_m = CLARKE_PINV_MAT @ park_matrix(st.mech.theta_e).T

    contribs_m = [
        imbalance_contributions(st.i_m_dq, model_m, seq, proj_m, gain)
        for seq in machine_cands.sequences
    ]
    contribs_n = [
        imbalance_contributions(st.i_n_ab, model_n, seq, CLARKE_PINV_MAT, gain)
        for seq in grid_cands.sequences
    ]

    best = None
    for im, cm in enumerate(contribs_m):
        for il, cn in enumerate(contribs_n):
            path = imbalance_path(st.dc.v_imb, cm, cn)
            j_o = float(path @ path)
            if best is None or j_o < best[0]:
                best = (j_o, im, il)
    j_o, im, il = best
    return machine_cands.sequences[im], grid_cands.sequences[il], j_o
