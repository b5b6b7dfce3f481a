"""Confident-region Bayesian optimization for VQE, plus the NFT baseline.

One iteration sweeps a single parameter axis: the incumbent's angle on that
axis is replaced by ``n_grid`` equally spaced values, ``points_per_iter`` of
those grid points are chosen for measurement by expected maximum improvement
over the confident region (CR), and the incumbent moves to the lowest
posterior mean among CR members, the fresh observations and itself.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .ansatz import (
    TWO_PI,
    AnsatzCircuit,
    EnergyObservation,
    eval_first_harmonic,
    exact_energy,
    fit_first_harmonic,
    harmonic_argmin,
    measure_energy,
    param_vector,
)
from .config import RunConfig
from .gp import JITTER_START, GpModel, KernelParams, draw_gaussian
from .hamiltonian import PauliHamiltonian, build_hamiltonian, ground_energy
from .records import IterationEntry, RunRecord
from .threshold import ThresholdState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfidentRegion:
    candidates: np.ndarray
    member_flags: np.ndarray
    kappa_used: float

    @property
    def members(self) -> np.ndarray:
        return self.candidates[self.member_flags]

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.member_flags))


@dataclass(frozen=True)
class BoState:
    gp: GpModel
    threshold: ThresholdState
    incumbent: np.ndarray
    incumbent_energy: float
    iteration: int = 0
    axis_cursor: int = 0


@dataclass(frozen=True)
class IterationOutcome:
    observed_points: List[Tuple[np.ndarray, EnergyObservation]]
    cr_size: int
    kappa: float
    best_energy: float
    emi_score: float


def candidate_grid(incumbent, axis: int, n_grid: int) -> np.ndarray:
    """``n_grid`` copies of ``incumbent`` with ``axis`` set to an equally spaced
    angle grid that starts at the incumbent's own angle."""
    incumbent = np.asarray(incumbent, dtype=float)
    if not 0 <= axis < len(incumbent):
        raise IndexError(f"axis {axis} out of range for {len(incumbent)} parameters")
    if n_grid < 1:
        raise ValueError("n_grid must be positive")
    grid = np.repeat(incumbent[None, :], n_grid, axis=0)
    grid[:, axis] = param_vector(incumbent[axis] + TWO_PI * np.arange(n_grid) / n_grid)
    return grid


def _membership(variances: np.ndarray, kappa: float, noise: float) -> np.ndarray:
    # with observation noise every true variance is positive, so kappa = 0
    # admits nothing; clamped round-off zeros must not sneak in
    if kappa <= 0.0 and noise > 0.0:
        return np.zeros(variances.shape, dtype=bool)
    return np.sqrt(variances) <= kappa


def confident_region(gp: GpModel, pending, candidates, kappa: float) -> ConfidentRegion:
    """Candidates whose posterior std, after hypothetically observing ``pending``,
    is at most ``kappa``."""
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    var = gp.hypothetical_variances(pending, candidates)
    return ConfidentRegion(candidates, _membership(var, kappa, gp.noise_diag), float(kappa))


def _emi_from_samples(samples: np.ndarray, mask: np.ndarray, best_energy: float) -> float:
    if not mask.any():
        return 0.0
    lowest = samples[:, mask].min(axis=1)
    return float(np.mean(np.maximum(0.0, best_energy - lowest)))


def emi_score(
    gp: GpModel,
    cr: ConfidentRegion,
    best_energy: float,
    n_samples: int,
    rng: np.random.Generator,
) -> float:
    """Monte-Carlo ``E[max(0, best - min_{x in CR} f(x))]`` under the joint posterior."""
    if cr.size == 0:
        return 0.0
    samples = gp.sample_joint(cr.members, n_samples, rng)
    return _emi_from_samples(samples, np.ones(cr.size, dtype=bool), best_energy)


def _subsets(m: int, p: int, max_subsets: int, rng: np.random.Generator) -> np.ndarray:
    total = math.comb(m, p)
    if total <= max_subsets:
        return np.array(list(itertools.combinations(range(m), p)), dtype=int).reshape(-1, p)
    if total <= 100_000:
        every = list(itertools.combinations(range(m), p))
        pick = np.sort(rng.choice(total, size=max_subsets, replace=False))
        return np.array([every[i] for i in pick], dtype=int)
    chosen = set()
    while len(chosen) < max_subsets:
        chosen.add(tuple(sorted(rng.choice(m, size=p, replace=False).tolist())))
    return np.array(sorted(chosen), dtype=int)


@dataclass(frozen=True)
class Selection:
    indices: Tuple[int, ...]
    points: np.ndarray
    score: float
    cr: ConfidentRegion


def select_observations(
    gp: GpModel,
    candidates,
    kappa: float,
    points_per_iter: int,
    n_samples: int,
    rng: np.random.Generator,
    best_energy: float,
    max_subsets: int = 200,
) -> Selection:
    """Pick the candidate subset whose induced CR has the largest EMI score.

    Every subset is scored against the same joint posterior draws over the
    whole grid, so score differences reflect CR membership rather than Monte
    Carlo noise. Ties go to the subset with the lowest posterior mean, then the
    lexicographically smallest grid indices.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    m = len(candidates)
    if m == 0:
        raise ValueError("no candidates")
    p = min(points_per_iter, m)
    mean, cov = gp.posterior_joint(candidates)
    samples = draw_gaussian(mean, cov, n_samples, rng, gp.kernel.sigma0)
    subsets = _subsets(m, p, max_subsets, rng)

    # variance of every candidate after noisy observation of each subset
    noise = gp.noise_diag
    c_pp = cov[subsets[:, :, None], subsets[:, None, :]] + noise * np.eye(p)
    c_xp = cov[:, subsets].transpose(1, 0, 2)  # (S, m, p)
    # eigen-directions below the jitter floor carry no information (already-known points)
    evals, evecs = np.linalg.eigh(c_pp)
    keep = evals > JITTER_START * gp.kernel.sigma0 ** 2
    inv_evals = np.where(keep, 1.0 / np.where(keep, evals, 1.0), 0.0)
    proj = np.einsum("smp,spk->smk", c_xp, evecs)  # (S, m, p)
    reduction = np.einsum("smk,sk->sm", proj * proj, inv_evals)
    var = np.maximum(np.diag(cov)[None, :] - reduction, 0.0)
    masks = _membership(var, kappa, noise)

    scores = np.array([_emi_from_samples(samples, mk, best_energy) for mk in masks])
    subset_means = mean[subsets].min(axis=1)
    order = sorted(
        range(len(subsets)), key=lambda i: (-scores[i], subset_means[i], tuple(subsets[i]))
    )
    best = order[0]
    idx = tuple(int(i) for i in subsets[best])
    cr = ConfidentRegion(candidates, masks[best], float(kappa))
    return Selection(idx, candidates[list(idx)], float(scores[best]), cr)


@dataclass
class Problem:
    """Everything a run needs besides the loop state."""

    config: RunConfig
    hamiltonian: PauliHamiltonian
    circuit: AnsatzCircuit

    @classmethod
    def from_config(cls, config: RunConfig) -> "Problem":
        hs = config.hamiltonian
        h = build_hamiltonian(hs.family, hs.n, hs.j, hs.h)
        circuit = AnsatzCircuit.hardware_efficient(hs.n, config.ansatz.layers)
        return cls(config, h, circuit)

    @property
    def n_params(self) -> int:
        return self.circuit.n_params

    @property
    def n_init(self) -> int:
        return self.config.loop.n_init or self.n_params + 1

    def measure(self, x, rng) -> EnergyObservation:
        return measure_energy(self.circuit, x, self.hamiltonian, self.config.ansatz.shots, rng)

    def exact(self, x) -> float:
        return exact_energy(self.circuit, x, self.hamiltonian)


def bo_step(state: BoState, problem: Problem, rng: np.random.Generator) -> Tuple[BoState, IterationOutcome]:
    loop = problem.config.loop
    axis = state.axis_cursor % problem.n_params
    grid = candidate_grid(state.incumbent, axis, loop.n_grid)
    kappa = state.threshold.current_kappa
    sel = select_observations(
        state.gp, grid, kappa, loop.points_per_iter, loop.n_samples, rng,
        best_energy=state.incumbent_energy, max_subsets=loop.max_subsets,
    )

    gp = state.gp
    observed = []
    for x in sel.points:
        obs = problem.measure(x, rng)
        observed.append((x.copy(), obs))
        gp = gp.update(x, obs.value)

    region = confident_region(gp, [], grid, kappa)
    pool = np.vstack([state.incumbent[None, :], region.members, sel.points])
    means, _ = gp.posterior_batch(pool)
    best = int(np.argmin(means))
    incumbent = pool[best].copy()
    mu = float(means[best])

    threshold = state.threshold.update(mu, iteration=state.iteration + 1)
    new_state = BoState(gp, threshold, incumbent, mu, state.iteration + 1, state.axis_cursor + 1)
    outcome = IterationOutcome(observed, sel.cr.size, kappa, mu, sel.score)
    return new_state, outcome


def _noise_sigma(config: RunConfig, observations: Sequence[EnergyObservation]) -> float:
    floor = config.gp.sigma_n_floor
    if config.ansatz.shots == 0:
        return floor
    mean_var = float(np.mean([o.noise_variance for o in observations]))
    return max(floor, math.sqrt(mean_var))


def _initial_points(problem: Problem, rng) -> Tuple[np.ndarray, List[EnergyObservation]]:
    xs = rng.uniform(0.0, TWO_PI, size=(problem.n_init, problem.n_params))
    xs = param_vector(xs)
    return xs, [problem.measure(x, rng) for x in xs]


def init_bo(problem: Problem, rng: np.random.Generator) -> Tuple[BoState, dict]:
    config = problem.config
    xs, obs = _initial_points(problem, rng)
    kernel = KernelParams(config.sigma0, config.gp.gamma, _noise_sigma(config, obs))
    gp = GpModel.fit(kernel, xs, [o.value for o in obs], center=config.gp.center)
    means, _ = gp.posterior_batch(xs)
    best = int(np.argmin(means))
    thr = config.threshold
    threshold = ThresholdState(
        sigma0=config.sigma0,
        t_avg=thr.t_avg,
        variant=thr.variant,
        constants=thr.constants,
        warmup_kappa=thr.warmup_kappa,
    ).update(float(means[best]), iteration=0)
    state = BoState(gp, threshold, xs[best].copy(), float(means[best]))
    init = {
        "n_init": len(xs),
        "observed_energies": [o.value for o in obs],
        "best_energy": float(means[best]),
        "true_energy": problem.exact(xs[best]),
        "sigma_n": kernel.sigma_n,
    }
    return state, init


def _oracle(problem: Problem) -> float:
    return ground_energy(problem.hamiltonian).ground_energy


def run_bo(config: RunConfig, seed: int, *, oracle: Optional[float] = None) -> RunRecord:
    """Full seeded BO run. Runtime failures return a partial record with
    ``status="aborted"`` rather than raising."""
    problem = Problem.from_config(config)
    rng = np.random.default_rng(seed)
    state, init = init_bo(problem, rng)
    record = RunRecord(
        config=config.to_dict(), seed=seed, variant=config.variant_label, init=init,
        oracle_energy=oracle if oracle is not None else _oracle(problem),
    )
    try:
        for _ in range(config.loop.iterations):
            t0 = time.perf_counter()
            state, out = bo_step(state, problem, rng)
            entry = state.threshold.trace[-1]
            record.entries.append(
                IterationEntry(
                    iteration=state.iteration,
                    best_energy=out.best_energy,
                    true_energy=problem.exact(state.incumbent),
                    kappa=entry.kappa,
                    delta_e=entry.delta_e,
                    cr_size=out.cr_size,
                    emi_score=out.emi_score,
                    n_observations=len(out.observed_points),
                    wall_ms=(time.perf_counter() - t0) * 1e3,
                )
            )
    except Exception as exc:  # noqa: BLE001
        log.exception("BO run aborted at iteration %d", state.iteration + 1)
        record.status = "aborted"
        record.error = f"{type(exc).__name__}: {exc}"
    record.final_params = [float(v) for v in state.incumbent]
    record.final_energy = problem.exact(state.incumbent)
    return record


def nft_step(x: np.ndarray, axis: int, problem: Problem, rng) -> Tuple[np.ndarray, float, int]:
    """Minimize the fitted first harmonic along ``axis`` from three measurements.

    Returns the new point, the fitted minimum value and the number of
    measurements used.
    """
    theta0 = x[axis]
    angles = theta0 + np.array([0.0, TWO_PI / 3, 2 * TWO_PI / 3])
    values = []
    for a in angles:
        p = x.copy()
        p[axis] = a
        values.append(problem.measure(param_vector(p), rng).value)
    coef = fit_first_harmonic(angles, values)
    theta = harmonic_argmin(coef)
    new = x.copy()
    new[axis] = theta
    return new, float(eval_first_harmonic(coef, [theta])[0]), len(angles)


def run_nft_baseline(config: RunConfig, seed: int, *, oracle: Optional[float] = None) -> RunRecord:
    """Sequential per-axis analytic minimization, started from the best of the
    same random initial points a BO run with this seed would draw."""
    problem = Problem.from_config(config)
    rng = np.random.default_rng(seed)
    xs, obs = _initial_points(problem, rng)
    values = [o.value for o in obs]
    best = int(np.argmin(values))
    x = xs[best].copy()
    init = {
        "n_init": len(xs),
        "observed_energies": values,
        "best_energy": float(values[best]),
        "true_energy": problem.exact(x),
        "sigma_n": None,
    }
    record = RunRecord(
        config=config.to_dict(), seed=seed, variant=config.variant_label, init=init,
        oracle_energy=oracle if oracle is not None else _oracle(problem),
    )
    try:
        for it in range(1, config.loop.iterations + 1):
            t0 = time.perf_counter()
            x, fitted, n_obs = nft_step(x, (it - 1) % problem.n_params, problem, rng)
            record.entries.append(
                IterationEntry(
                    iteration=it,
                    best_energy=fitted,
                    true_energy=problem.exact(x),
                    kappa=None,
                    delta_e=None,
                    cr_size=0,
                    emi_score=None,
                    n_observations=n_obs,
                    wall_ms=(time.perf_counter() - t0) * 1e3,
                )
            )
    except Exception as exc:  # noqa: BLE001
        log.exception("NFT run aborted")
        record.status = "aborted"
        record.error = f"{type(exc).__name__}: {exc}"
    record.final_params = [float(v) for v in x]
    record.final_energy = problem.exact(x)
    return record


def run(config: RunConfig, seed: int, *, oracle: Optional[float] = None) -> RunRecord:
    if config.loop.optimizer == "nft":
        return run_nft_baseline(config, seed, oracle=oracle)
    return run_bo(config, seed, oracle=oracle)
