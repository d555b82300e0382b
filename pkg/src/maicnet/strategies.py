"""Per-iteration update rules for distributed LMS over clustered graphs.

Every rule follows the same skeleton. Each node first adapts its iterate
with a stochastic-gradient correction from its own observation, then the
iterates are merged. The variants differ in how information crosses
cluster borders:

* no cooperation: merge only within the cluster,
* regularized adaptation: pull the gradient step toward inter-cluster
  neighbors before the intra-cluster merge,
* cooperation weights: convex-combine adapted iterates over the
  inter-cluster support (self included) and then merge intra-cluster,
  either with a fixed matrix or with per-iteration weights learned from
  online moment estimates.

All operations accept stacked states of shape ``(..., N, M)`` so a
single run and a batch of runs share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import weight_opt
from .topology import ClusteredTopology

__all__ = [
    "StrategyState",
    "init_state",
    "adapt",
    "inter_cluster_combine",
    "intra_cluster_combine",
    "atc_step",
    "mdlms_step",
    "maic_step",
    "maic_adaptive_step",
]


@dataclass
class StrategyState:
    """Mutable per-strategy iterate storage.

    ``weights`` holds the post-combine iterates from the previous
    iteration. The adaptive variant additionally tracks the smoothed
    squared adaptation increments and the last solved cooperation
    weights; ``fallback_count`` counts weight solves that fell back to
    the self-only column.
    """

    weights: np.ndarray  # (..., N, M)
    adapted: "np.ndarray | None" = None
    cooperated: "np.ndarray | None" = None
    increment_power: "np.ndarray | None" = None  # (..., N, N)
    learned_weights: "np.ndarray | None" = None  # (..., N, N)
    fallback_count: int = 0


def init_state(
    n_nodes: int,
    dim: int,
    batch_shape: tuple[int, ...] = (),
    adaptive: bool = False,
) -> StrategyState:
    """Zero-initialized state, matching the reference initialization."""
    weights = np.zeros(batch_shape + (n_nodes, dim))
    state = StrategyState(weights=weights)
    if adaptive:
        state.increment_power = np.zeros(batch_shape + (n_nodes, n_nodes))
        state.learned_weights = np.zeros(batch_shape + (n_nodes, n_nodes))
    return state


def adapt(
    weights: np.ndarray, regressors: np.ndarray, responses: np.ndarray, step_sizes: np.ndarray
) -> np.ndarray:
    """LMS adaptation step at every node.

    ``psi_k = w_k + mu_k * u_k * (d_k - u_k . w_k)``
    """
    error = responses - np.einsum("...nm,...nm->...n", regressors, weights)
    mu = np.atleast_1d(np.asarray(step_sizes, dtype=float))
    return weights + mu[..., :, None] * regressors * error[..., :, None]


def inter_cluster_combine(adapted: np.ndarray, cooperation: np.ndarray) -> np.ndarray:
    """Convex combination of adapted iterates over the cooperation support.

    ``cooperation`` may be a fixed (N, N) matrix or a batch ``(..., N, N)``
    of per-run matrices; entry (l, k) weighs node l's iterate in node k's
    result.
    """
    if cooperation.ndim == 2:
        return np.einsum("...lm,lk->...km", adapted, cooperation)
    return np.einsum("...lm,...lk->...km", adapted, cooperation)


def intra_cluster_combine(cooperated: np.ndarray, combine: np.ndarray) -> np.ndarray:
    """Intra-cluster merge; entry (l, k) weighs node l's iterate at node k."""
    return np.einsum("...lm,lk->...km", cooperated, combine)


def atc_step(
    state: StrategyState,
    regressors: np.ndarray,
    responses: np.ndarray,
    combine: np.ndarray,
    step_sizes: np.ndarray,
) -> np.ndarray:
    """Adapt then combine, no information crossing cluster borders."""
    psi = adapt(state.weights, regressors, responses, step_sizes)
    new = intra_cluster_combine(psi, combine)
    state.adapted = psi
    state.cooperated = psi
    state.weights = new
    return new


def mdlms_step(
    state: StrategyState,
    regressors: np.ndarray,
    responses: np.ndarray,
    combine: np.ndarray,
    regularizer: np.ndarray,
    strength: float,
    step_sizes: np.ndarray,
) -> np.ndarray:
    """Adaptation regularized toward inter-cluster neighbors, then combine.

    With zero strength this reduces bitwise to the no-cooperation rule.
    """
    psi = adapt(state.weights, regressors, responses, step_sizes)
    pull = np.einsum("...lm,lk->...km", state.weights, regularizer)
    pull -= regularizer.sum(axis=0)[:, None] * state.weights
    mu = np.atleast_1d(np.asarray(step_sizes, dtype=float))
    psi = psi + mu[..., :, None] * strength * pull
    new = intra_cluster_combine(psi, combine)
    state.adapted = psi
    state.cooperated = psi
    state.weights = new
    return new


def maic_step(
    state: StrategyState,
    regressors: np.ndarray,
    responses: np.ndarray,
    combine: np.ndarray,
    cooperation: np.ndarray,
    step_sizes: np.ndarray,
) -> np.ndarray:
    """Adapt, cooperate across clusters, combine within the cluster."""
    psi = adapt(state.weights, regressors, responses, step_sizes)
    phi = inter_cluster_combine(psi, cooperation)
    new = intra_cluster_combine(phi, combine)
    state.adapted = psi
    state.cooperated = phi
    state.weights = new
    return new


def _solve_learned_columns(
    state: StrategyState,
    psi: np.ndarray,
    topology: ClusteredTopology,
    alpha: float,
    qp_solver,
) -> np.ndarray:
    """Update increment-power estimates and solve one weight column per node."""
    w_prev = state.weights
    batch_shape = w_prev.shape[:-2]
    n, dim = w_prev.shape[-2:]
    flat_w = w_prev.reshape(-1, n, dim)
    flat_psi = psi.reshape(-1, n, dim)
    batch = flat_w.shape[0]

    # Smoothed squared distance between each adapted iterate and the
    # receiving node's previous iterate, tracked on neighborhood pairs.
    psi_sq = np.einsum("bnm,bnm->bn", flat_psi, flat_psi)
    w_sq = np.einsum("bnm,bnm->bn", flat_w, flat_w)
    cross = np.einsum("blm,bkm->blk", flat_psi, flat_w)
    sq_dist = psi_sq[:, :, None] + w_sq[:, None, :] - 2.0 * cross
    flat_power = state.increment_power.reshape(-1, n, n)
    mask = topology.adjacency
    flat_power[:, mask] = alpha * flat_power[:, mask] + (1.0 - alpha) * sq_dist[:, mask]

    learned = np.zeros((batch, n, n))
    fallbacks = 0
    for k in range(n):
        support = list(topology.inter_plus[k])
        size = len(support)
        if size == 1:
            learned[:, k, k] = 1.0
            continue
        candidates = flat_w[:, support, :]
        quad = np.einsum("bim,bjm->bij", candidates, candidates)
        idx = np.arange(size)
        quad[:, idx, idx] += flat_power[:, support, k]
        lin = np.einsum("bim,bm->bi", candidates, flat_w[:, k, :])
        column, ok = qp_solver(quad, lin)
        bad = ~ok
        if bad.any():
            column[bad] = 0.0
            column[bad, support.index(k)] = 1.0
            fallbacks += int(bad.sum())
        learned[np.ix_(np.arange(batch), support, [k])] = column[:, :, None]

    state.fallback_count += fallbacks
    state.increment_power = flat_power.reshape(batch_shape + (n, n))
    return learned.reshape(batch_shape + (n, n))


def maic_adaptive_step(
    state: StrategyState,
    regressors: np.ndarray,
    responses: np.ndarray,
    combine: np.ndarray,
    topology: ClusteredTopology,
    alpha: float,
    step_sizes: np.ndarray,
    qp_solver=None,
) -> np.ndarray:
    """Cooperation rule with weights learned online.

    Each iteration re-solves, per node, the local simplex program built
    from instantaneous moment estimates: the smoothed squared adaptation
    increments stand in for gradient-noise power and the current iterates
    stand in for the unknown parameters. A node whose solve fails keeps
    only its own iterate for that iteration.
    """
    if qp_solver is None:
        qp_solver = weight_opt.solve_simplex_qp_batch
    psi = adapt(state.weights, regressors, responses, step_sizes)
    learned = _solve_learned_columns(state, psi, topology, alpha, qp_solver)
    phi = inter_cluster_combine(psi, learned)
    new = intra_cluster_combine(phi, combine)
    state.adapted = psi
    state.cooperated = phi
    state.learned_weights = learned
    state.weights = new
    return new
