"""Closed-form first- and second-moment analysis of cooperation rules.

The analysis works on network-stacked quantities: parameter errors of all
nodes concatenated into one vector of length N*M. Conditioned on fixed
combine and cooperation weights, the stacked error follows a linear
recursion whose transition matrix determines mean stability, and whose
second-order lift determines the steady-state mean-square deviation. The
forcing has three parts: gradient noise, the spread of the random
parameters across clusters, and a cross term that couples the error with
that spread; dropping the cross term gives the cheaper approximate MSD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_model import SignalModel
from .topology import ClusteredTopology, kron_expand

__all__ = [
    "vec",
    "mean_transition",
    "variance_transition",
    "sampled_variance_transition",
    "spectral_radius",
    "mean_stability_bounds",
    "contraction_bound",
    "mean_bias_vector",
    "mean_error_trajectory",
    "msd_forcing_terms",
    "steady_state_msd",
    "TheoryReport",
    "analyze",
]

SIZE_CAP = 64
SOLVE_RESIDUAL_TOL = 1e-10


def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization, consistent with kron identities."""
    return np.asarray(matrix).reshape(-1, order="F")


def _stack_block_diag(blocks: np.ndarray) -> np.ndarray:
    n, dim, _ = blocks.shape
    out = np.zeros((n * dim, n * dim))
    for k in range(n):
        out[k * dim : (k + 1) * dim, k * dim : (k + 1) * dim] = blocks[k]
    return out


def regressor_moment(model: SignalModel) -> np.ndarray:
    """Block-diagonal stacked regressor covariance."""
    return _stack_block_diag(model.reg_cov)


def step_size_matrix(model: SignalModel) -> np.ndarray:
    return np.diag(np.repeat(model.step_sizes, model.dim))


def gradient_noise_moment(model: SignalModel) -> np.ndarray:
    """Block-diagonal covariance of the stacked gradient noise."""
    return _stack_block_diag(model.noise_var[:, None, None] * model.reg_cov)


def mean_transition(
    combine: np.ndarray, cooperation: np.ndarray, model: SignalModel
) -> np.ndarray:
    """Stacked mean-error transition matrix of the cooperation recursion."""
    dim = model.dim
    big_combine = kron_expand(combine, dim)
    big_coop = kron_expand(cooperation, dim)
    identity = np.eye(model.n_nodes * dim)
    return big_combine.T @ big_coop.T @ (identity - step_size_matrix(model) @ regressor_moment(model))


def spectral_radius(matrix: np.ndarray, dense_cutoff: int = 256) -> float:
    """Largest eigenvalue magnitude; power iteration above the cutoff."""
    n = matrix.shape[0]
    if n <= dense_cutoff:
        return float(np.max(np.abs(np.linalg.eigvals(matrix))))
    rng = np.random.default_rng(0)
    vector = rng.standard_normal(n)
    vector /= np.linalg.norm(vector)
    estimate = 0.0
    for _ in range(500):
        nxt = matrix @ vector
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            return 0.0
        vector = nxt / norm
        estimate = norm
    return float(estimate)


def variance_transition(transition: np.ndarray, size_cap: int = SIZE_CAP) -> np.ndarray:
    """Second-order lift ``kron(B', B')`` of the mean transition.

    Guarded by a size cap because the result is quadratically larger.
    """
    n = transition.shape[0]
    if n > size_cap:
        raise ValueError(
            f"stacked dimension {n} exceeds the size cap {size_cap} for squared-size operators"
        )
    return np.kron(transition.T, transition.T)


def sampled_variance_transition(
    combine: np.ndarray,
    cooperation: np.ndarray,
    model: SignalModel,
    n_samples: int,
    rng: np.random.Generator,
    n_batches: int = 20,
    size_cap: int = SIZE_CAP,
) -> tuple[np.ndarray, float, float]:
    """Monte-Carlo estimate of the exact second-order transition.

    Draws per-iteration regressor matrices, lifts each instantaneous
    transition, and averages. Returns the averaged operator, its spectral
    radius, and a spread estimate from batch means.
    """
    dim, n = model.dim, model.n_nodes
    if n * dim > size_cap:
        raise ValueError(f"stacked dimension {n * dim} exceeds the size cap {size_cap}")
    big = kron_expand(combine, dim).T @ kron_expand(cooperation, dim).T
    mu = step_size_matrix(model)
    identity = np.eye(n * dim)

    n_batches = max(1, min(n_batches, n_samples))
    batch_sizes = np.full(n_batches, n_samples // n_batches)
    batch_sizes[: n_samples % n_batches] += 1
    batch_means = []
    total = np.zeros(((n * dim) ** 2, (n * dim) ** 2))
    for size in batch_sizes:
        batch_sum = np.zeros_like(total)
        for _ in range(int(size)):
            u = np.einsum(
                "nij,nj->ni", model._reg_sqrt, rng.standard_normal((n, dim))
            )
            inst_cov = _stack_block_diag(np.einsum("ni,nj->nij", u, u))
            inst = big @ (identity - mu @ inst_cov)
            batch_sum += np.kron(inst.T, inst.T)
        batch_means.append(batch_sum / size)
        total += batch_sum
    estimate = total / n_samples
    rho = spectral_radius(estimate)
    if len(batch_means) > 1:
        batch_rhos = [spectral_radius(m) for m in batch_means]
        spread = float(np.std(batch_rhos, ddof=1) / np.sqrt(len(batch_rhos)))
    else:
        spread = float("nan")
    return estimate, rho, spread


def mean_stability_bounds(model: SignalModel) -> tuple[np.ndarray, bool]:
    """Per-node step-size bounds ``2 / max eigenvalue`` and whether all hold."""
    bounds = np.array([2.0 / np.linalg.eigvalsh(c)[-1] for c in model.reg_cov])
    return bounds, bool(np.all(model.step_sizes < bounds))


def contraction_bound(model: SignalModel) -> float:
    """Block-diagonal contraction factor bounding the mean transition radius.

    Left-stochastic merges cannot expand the block maximum norm, so the
    worst per-node factor of the adaptation step is an upper bound.
    """
    worst = 0.0
    for k in range(model.n_nodes):
        factor = np.eye(model.dim) - model.step_sizes[k] * model.reg_cov[k]
        worst = max(worst, float(np.max(np.abs(np.linalg.eigvalsh(factor)))))
    return worst


def mean_bias_vector(
    combine: np.ndarray, cooperation: np.ndarray, model: SignalModel
) -> np.ndarray:
    """Constant driving term of the stacked mean-error recursion.

    Vanishes when every cluster shares the same mean parameter.
    """
    dim = model.dim
    big_combine = kron_expand(combine, dim)
    big_coop = kron_expand(cooperation, dim)
    identity = np.eye(model.n_nodes * dim)
    return big_combine.T @ (identity - big_coop.T) @ model.mean_stack


def mean_error_trajectory(
    transition: np.ndarray, bias: np.ndarray, start: np.ndarray, n_iters: int
) -> np.ndarray:
    """Iterates of ``e <- transition e + bias``, start included, (T+1, N*M)."""
    out = np.empty((n_iters + 1, start.shape[0]))
    out[0] = start
    current = np.asarray(start, dtype=float)
    for i in range(1, n_iters + 1):
        current = transition @ current + bias
        out[i] = current
    return out


@dataclass(frozen=True)
class ForcingTerms:
    gradient_noise: np.ndarray  # vectorized, (N*M)**2
    parameter_spread: np.ndarray
    cross_limit: np.ndarray


def msd_forcing_terms(
    combine: np.ndarray, cooperation: np.ndarray, model: SignalModel
) -> ForcingTerms:
    """Vectorized forcing terms of the steady-state variance relation.

    The cross term is the steady-state limit of the error/spread coupling
    recursion, written in closed form through the mean transition.
    Requires a mean-stable configuration.
    """
    dim = model.dim
    big_combine = kron_expand(combine, dim)
    big_coop = kron_expand(cooperation, dim)
    identity = np.eye(model.n_nodes * dim)
    mu = step_size_matrix(model)

    merged = big_combine.T @ big_coop.T
    noise_mat = merged @ mu @ gradient_noise_moment(model) @ mu @ merged.T
    leak = big_combine.T @ (identity - big_coop.T)
    spread_mat = leak @ model.parameter_second_moment @ leak.T

    transition = mean_transition(combine, cooperation, model)
    rho = spectral_radius(transition)
    if rho >= 1.0:
        raise ValueError(f"mean-unstable configuration, spectral radius {rho!r}")
    # geometric series limit of the error/spread coupling, no explicit inverse
    geometric = np.linalg.solve((identity - transition).T, transition.T).T
    cross_mat = spread_mat @ geometric.T
    return ForcingTerms(
        gradient_noise=vec(noise_mat),
        parameter_spread=vec(spread_mat),
        cross_limit=2.0 * vec(cross_mat),
    )


def _cluster_indicators(model: SignalModel) -> list[np.ndarray]:
    indicators = []
    for p in range(model.n_clusters):
        diag = np.zeros(model.n_nodes * model.dim)
        for k in np.flatnonzero(model.cluster_of == p):
            diag[k * model.dim : (k + 1) * model.dim] = 1.0
        indicators.append(np.diag(diag))
    return indicators


def steady_state_msd(
    combine: np.ndarray,
    cooperation: np.ndarray,
    model: SignalModel,
    size_cap: int = SIZE_CAP,
    per_cluster: bool = False,
) -> "tuple[float, float] | tuple[float, float, np.ndarray]":
    """Closed-form network MSD and its cross-term-free approximation.

    Solves the steady-state weighted-variance relation by LU-backed
    linear solves with a relative-residual check; the inverse is never
    formed. With ``per_cluster`` the deviation is also split per cluster.
    """
    transition = mean_transition(combine, cooperation, model)
    lifted = variance_transition(transition, size_cap=size_cap)
    rho_lifted = spectral_radius(lifted)
    if rho_lifted >= 1.0:
        raise ValueError(f"mean-square-unstable configuration, lifted radius {rho_lifted!r}")
    terms = msd_forcing_terms(combine, cooperation, model)

    n_stack = transition.shape[0]
    system = np.eye(lifted.shape[0]) - lifted
    rhs = [vec(np.eye(n_stack))]
    if per_cluster:
        rhs.extend(vec(ind) for ind in _cluster_indicators(model))
    rhs_mat = np.stack(rhs, axis=1)
    solution = np.linalg.solve(system, rhs_mat)
    residual = np.linalg.norm(system @ solution - rhs_mat) / np.linalg.norm(rhs_mat)
    if residual > SOLVE_RESIDUAL_TOL:
        raise ArithmeticError(f"variance solve residual {residual!r} exceeds tolerance")

    full = terms.gradient_noise + terms.parameter_spread + terms.cross_limit
    approx = terms.gradient_noise + terms.parameter_spread
    n_nodes = model.n_nodes
    msd = float(full @ solution[:, 0]) / n_nodes
    msd_approx = float(approx @ solution[:, 0]) / n_nodes
    if not per_cluster:
        return msd, msd_approx
    sizes = np.bincount(model.cluster_of, minlength=model.n_clusters)
    cluster_msd = np.array(
        [float(full @ solution[:, 1 + p]) / sizes[p] for p in range(model.n_clusters)]
    )
    return msd, msd_approx, cluster_msd


@dataclass(frozen=True)
class TheoryReport:
    """Summary of the closed-form analysis for one weight configuration."""

    rho_mean: float
    rho_variance: float
    contraction: float
    step_bounds: np.ndarray
    mean_stable: bool
    mean_square_stable: bool
    msd: "float | None"
    msd_approx: "float | None"
    cluster_msd: "np.ndarray | None"

    @property
    def msd_db(self) -> "float | None":
        return None if self.msd is None else 10.0 * float(np.log10(self.msd))

    @property
    def msd_approx_db(self) -> "float | None":
        return None if self.msd_approx is None else 10.0 * float(np.log10(self.msd_approx))

    def to_dict(self) -> dict:
        return {
            "rho_mean": self.rho_mean,
            "rho_variance": self.rho_variance,
            "contraction_bound": self.contraction,
            "step_size_bounds": self.step_bounds.tolist(),
            "mean_stable": self.mean_stable,
            "mean_square_stable": self.mean_square_stable,
            "msd": self.msd,
            "msd_db": self.msd_db,
            "msd_approx": self.msd_approx,
            "msd_approx_db": self.msd_approx_db,
            "cluster_msd": None if self.cluster_msd is None else self.cluster_msd.tolist(),
        }


def analyze(
    combine: np.ndarray,
    cooperation: np.ndarray,
    model: SignalModel,
    size_cap: int = SIZE_CAP,
    per_cluster: bool = True,
) -> TheoryReport:
    """Full report: stability characterization plus steady-state deviations."""
    transition = mean_transition(combine, cooperation, model)
    rho_mean = spectral_radius(transition)
    bounds, mean_stable = mean_stability_bounds(model)
    lifted_rho = spectral_radius(variance_transition(transition, size_cap=size_cap))
    stable = lifted_rho < 1.0 and rho_mean < 1.0
    msd = msd_approx = None
    cluster_msd = None
    if stable:
        if per_cluster:
            msd, msd_approx, cluster_msd = steady_state_msd(
                combine, cooperation, model, size_cap=size_cap, per_cluster=True
            )
        else:
            msd, msd_approx = steady_state_msd(combine, cooperation, model, size_cap=size_cap)
    return TheoryReport(
        rho_mean=rho_mean,
        rho_variance=lifted_rho,
        contraction=contraction_bound(model),
        step_bounds=bounds,
        mean_stable=mean_stable,
        mean_square_stable=lifted_rho < 1.0,
        msd=msd,
        msd_approx=msd_approx,
        cluster_msd=cluster_msd,
    )
