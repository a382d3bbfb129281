"""Improved differential evolution for average-SER minimization.

The search runs DE/best/1 mutation against a frozen snapshot of the
generation-best individual, repairs out-of-range entries (phase wrap, beam
clamp toward the parent), applies binomial crossover with one forced
dimension, and keeps the trial on ties or improvement, so the best fitness
never increases.  F and CR adapt through success-history memories: each
generation's improving (CR, F) pairs are folded into circular memory slots
by improvement-weighted means (arithmetic for CR, Lehmer for F).  After
selection, a fitness-proportional number of individuals receive a Gaussian
local-search probe that replaces them only when strictly better.

The joint mode searches phases and beamformers together (N + 2MK entries);
the passive-only mode shrinks the individual to the N phase entries and
recomputes a linear precoder inside the fitness.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from . import streams
from .channel import PhaseVector
from .encode import beams_from_segments, individual_length, repair
from .linkmath import MRT, RZF, ZF, BeamformerSet, ser_analytic

JOINT = "joint"
PASSIVE_ONLY = "passive_only"

AVG_SER = "avg_ser"
SUM_RATE = "sum_rate"
MIN_SINR = "min_sinr"
FITNESS_MODES = (AVG_SER, SUM_RATE, MIN_SINR)


@dataclass(frozen=True)
class SerProblem:
    """A fixed channel realization plus link budget and modulation order.

    ``csi_error`` (M x K), when given, is added to every aggregated channel
    the optimizer evaluates, modeling estimation error z + e: the search
    then runs on the estimate while the true channel stays available for
    external evaluation.
    """

    ch: object
    budget: object
    m: int
    csi_error: np.ndarray | None = None

    @property
    def dims(self):
        return self.ch.dims


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs of the improved DE run.

    ``pop_size`` needs at least four individuals (best + two distinct
    donors + the target).  ``mode`` selects the joint or passive-only
    search; the latter recomputes ``precoder`` beamformers inside the
    fitness.  Termination: generation cap, evaluation cap, or a best value
    unchanged (within ``stall_tol``) for ``stall_generations`` generations.
    """

    pop_size: int = 40
    memory_size: int = 5
    f_init: float = 0.1
    cr_init: float = 0.9
    g_max: int = 350
    nfe_max: int = 35000
    stall_generations: int = 50
    stall_tol: float = 1e-12
    sigma_local: float = 0.1
    seed: int = 0
    mode: str = JOINT
    precoder: str = RZF
    fitness_mode: str = AVG_SER

    def validate(self):
        if self.pop_size < 4:
            raise ValueError("population must have at least 4 individuals")
        if self.memory_size < 1:
            raise ValueError("memory length must be at least 1")
        if not (0 <= self.f_init <= 1 and 0 <= self.cr_init <= 1):
            raise ValueError("initial F and CR must lie in [0, 1]")
        if self.sigma_local <= 0:
            raise ValueError("local-search standard deviation must be positive")
        if self.g_max < 1 or self.nfe_max < 1 or self.stall_generations < 1:
            raise ValueError("termination limits must be positive")
        if self.mode not in (JOINT, PASSIVE_ONLY):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == PASSIVE_ONLY and self.precoder not in (MRT, ZF, RZF):
            raise ValueError(f"unknown precoder {self.precoder!r}")
        if self.fitness_mode not in FITNESS_MODES:
            raise ValueError(f"unknown fitness mode {self.fitness_mode!r}")


class Evaluator:
    """Batched decode-and-fitness path shared by the DE and all baselines.

    ``batch`` maps an (B, n_dim) array of individuals to B fitness values
    with vectorized linear algebra; it is pure, so population members may be
    evaluated concurrently or in any order without changing results.
    """

    def __init__(self, problem, mode=JOINT, precoder=RZF, fitness_mode=AVG_SER):
        self.problem = problem
        self.mode = mode
        self.precoder = precoder
        self.fitness_mode = fitness_mode
        dims = problem.dims
        self.n_phase = dims.N
        self.n_dim = dims.N if mode == PASSIVE_ONLY else individual_length(dims)

    def _aggregated(self, X):
        ch = self.problem.ch
        phases = np.exp(1j * np.pi * X[:, : self.n_phase])
        Z = ch.u[None, :, :] + np.einsum("mn,bn,nk->bmk", ch.H, phases, ch.g)
        if self.problem.csi_error is not None:
            Z = Z + self.problem.csi_error[None, :, :]
        return Z

    def _beams(self, X, Z):
        budget = self.problem.budget
        dims = self.problem.dims
        if self.mode == JOINT:
            seg = X[:, self.n_phase :].reshape(-1, dims.K, 2 * dims.M)
            return beams_from_segments(seg, budget)
        return _precode_batch(Z, self.precoder, budget)

    def _sinr(self, Z, W):
        budget = self.problem.budget
        G = np.einsum("bmk,bml->bkl", Z.conj(), W)
        power = np.abs(G) ** 2
        signal = np.diagonal(power, axis1=1, axis2=2)
        interference = power.sum(axis=2) - signal
        return budget.rho * signal / (budget.rho * interference + budget.sigma2)

    def batch(self, X):
        """Fitness of each row of ``X`` (lower is better for every mode)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_dim:
            raise ValueError(f"individuals must have length {self.n_dim}")
        Z = self._aggregated(X)
        W = self._beams(X, Z)
        g = self._sinr(Z, W)
        if self.fitness_mode == AVG_SER:
            return np.mean(ser_analytic(g, self.problem.m), axis=1)
        if self.fitness_mode == SUM_RATE:
            return -np.sum(np.log2(1.0 + g), axis=1)
        return -np.min(g, axis=1)

    def fitness(self, x):
        return float(self.batch(np.asarray(x)[None, :])[0])

    def decode(self, x):
        """(PhaseVector, BeamformerSet) for one individual."""
        x = np.asarray(x, dtype=float)[None, :]
        theta = PhaseVector(theta=np.pi * x[0, : self.n_phase])
        Z = self._aggregated(x)
        W = self._beams(x, Z)
        budget = self.problem.budget
        return theta, BeamformerSet(w=W[0], rho=budget.rho, pmax=budget.pmax)


def _precode_batch(Z, scheme, budget):
    """Batched linear precoding over stacked channels Z of shape (B, M, K)."""
    if scheme == MRT:
        raw = Z
    else:
        B, M, K = Z.shape
        if scheme == ZF and M < K:
            raise ValueError("zero-forcing needs M >= K")
        gram = np.einsum("bmk,bml->bkl", Z.conj(), Z)
        if scheme == RZF:
            gram = gram + budget.sigma2 * np.eye(K)[None, :, :]
        raw = Z @ np.linalg.solve(gram, np.broadcast_to(np.eye(K, dtype=complex), gram.shape))
    dirs = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    return dirs * np.sqrt(budget.beam_norm2)


# -- evolution operators ------------------------------------------------------


def sample_params(mcr, mf, cr_init, f_init, rng):
    """Draw (CR, F) from a random memory slot; out-of-range draws fall back
    to the initial values."""
    r = int(rng.integers(len(mcr)))
    cr = float(rng.normal(mcr[r], 0.1))
    f = float(rng.normal(mf[r], 0.1))
    if not 0.0 <= cr <= 1.0:
        cr = cr_init
    if not 0.0 <= f <= 1.0:
        f = f_init
    return cr, f


def mutate_best1(population, best, r1, r2, target, f, n_phase):
    """Repaired DE/best/1 mutant for the target individual.

    ``best``, ``r1``, ``r2`` and ``target`` index rows of ``population``;
    r1, r2 and target must be mutually distinct.  The raw mutant
    best + f (x_r1 - x_r2) is repaired entry-wise: the first ``n_phase``
    entries wrap, the rest clamp toward the target (parent) individual.
    """
    if len({int(r1), int(r2), int(target)}) < 3:
        raise ValueError("mutation indices r1, r2, target must be distinct")
    raw = population[best] + f * (population[r1] - population[r2])
    return repair(raw, population[target], n_phase)


def crossover_binomial(parent, mutant, cr, rng):
    """Binomial crossover: mutant entries with probability CR, plus one
    uniformly chosen forced dimension so the trial differs from the parent."""
    if not 0.0 <= cr <= 1.0:
        raise ValueError("CR must lie in [0, 1]")
    dim = parent.shape[0]
    mask = rng.uniform(size=dim) <= cr
    mask[rng.integers(dim)] = True
    return np.where(mask, mutant, parent)


def keep_trial(trial_fitness, parent_fitness):
    """Elitist selection rule: the trial survives on ties or improvement."""
    return trial_fitness <= parent_fitness


def local_search_count(f_c, f_best_prev, g, g_max, pop_size):
    """Number of local-search probes for generation ``g``.

    floor(f_c (g_max - g) I / (f_best_prev g_max)), clamped to [0, I]; a
    zero previous best means the run has converged and no probes are spent.
    """
    if f_best_prev <= 0.0:
        return 0
    lam = np.floor(f_c * (g_max - g) * pop_size / (f_best_prev * g_max))
    return int(np.clip(lam, 0, pop_size))


def perturb(x, sigma, rng, n_phase):
    """Gaussian neighborhood probe with the standard entry repairs."""
    if sigma <= 0:
        raise ValueError("perturbation standard deviation must be positive")
    return repair(x + rng.normal(0.0, sigma, size=x.shape), x, n_phase)


def update_memory(mcr, mf, position, successes):
    """Fold one generation's successes into the circular memories.

    ``successes`` is a sequence of (cr, f, improvement) triples with strictly
    positive improvements.  CR uses the improvement-weighted arithmetic mean,
    F the improvement-weighted Lehmer mean; an empty archive leaves the
    memories and the slot position unchanged.
    """
    if not successes:
        return position
    crs = np.array([s[0] for s in successes], dtype=float)
    fs = np.array([s[1] for s in successes], dtype=float)
    dw = np.array([s[2] for s in successes], dtype=float)
    w = dw / dw.sum()
    mcr[position] = float(np.sum(w * crs))
    denom = np.sum(w * fs)
    mf[position] = float(np.sum(w * fs**2) / denom) if denom > 0 else 0.0
    return (position + 1) % len(mcr)


# -- optimizer state, trace, and main loop ------------------------------------


@dataclass
class OptimizerState:
    """Everything needed to continue a run (RNG streams are stateless)."""

    population: np.ndarray
    fitness: np.ndarray
    mcr: np.ndarray
    mf: np.ndarray
    memory_pos: int
    generation: int
    nfe: int
    prev_best: float
    stall_count: int

    @property
    def best_index(self):
        return int(np.argmin(self.fitness))

    @property
    def best_fitness(self):
        return float(self.fitness[self.best_index])

    @property
    def best_x(self):
        return self.population[self.best_index]

    def save(self, path):
        np.savez(
            path,
            population=self.population,
            fitness=self.fitness,
            mcr=self.mcr,
            mf=self.mf,
            scalars=np.array(
                [self.memory_pos, self.generation, self.nfe, self.stall_count],
                dtype=np.int64,
            ),
            prev_best=np.array([self.prev_best]),
        )

    @classmethod
    def load(cls, path):
        data = np.load(path)
        pos, gen, nfe, stall = (int(v) for v in data["scalars"])
        return cls(
            population=data["population"],
            fitness=data["fitness"],
            mcr=data["mcr"],
            mf=data["mf"],
            memory_pos=pos,
            generation=gen,
            nfe=nfe,
            prev_best=float(data["prev_best"][0]),
            stall_count=stall,
        )


@dataclass(frozen=True)
class TraceRow:
    """Per-generation progress record."""

    generation: int
    best: float
    worst: float
    mean: float
    lambda_g: int
    nfe: int


TRACE_CSV_FIELDS = ("generation", "best", "worst", "mean", "lambda_g", "nfe")


def trace_to_csv(trace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_CSV_FIELDS)
        for row in trace:
            writer.writerow(
                [row.generation, row.best, row.worst, row.mean, row.lambda_g, row.nfe]
            )


@dataclass(frozen=True)
class OptimizeResult:
    """Decoded best solution plus the run's trace and final state."""

    theta: PhaseVector
    beams: BeamformerSet
    fitness: float
    trace: tuple
    state: OptimizerState
    termination: str

    @property
    def nfe(self):
        return self.state.nfe


def _init_state(evaluator, cfg):
    rng = streams.substream(cfg.seed, streams.INIT_POPULATION)
    population = rng.uniform(-1.0, 1.0, size=(cfg.pop_size, evaluator.n_dim))
    fitness = evaluator.batch(population)
    return OptimizerState(
        population=population,
        fitness=fitness,
        mcr=np.full(cfg.memory_size, cfg.cr_init, dtype=float),
        mf=np.full(cfg.memory_size, cfg.f_init, dtype=float),
        memory_pos=0,
        generation=0,
        nfe=cfg.pop_size,
        prev_best=float(fitness.min()),
        stall_count=0,
    )


def _pick_donors(rng, pop_size, target):
    order = rng.permutation(pop_size)
    picked = [int(j) for j in order if j != target][:2]
    return picked[0], picked[1]


def optimize(problem, cfg, state=None):
    """Run the improved DE on ``problem`` until a termination criterion fires.

    Returns an :class:`OptimizeResult` with the decoded best individual, the
    per-generation trace, and the final state (reusable to continue the run;
    continuation reproduces an uninterrupted run exactly because every
    random stream is keyed by (seed, generation, individual)).
    """
    cfg.validate()
    ev = Evaluator(problem, mode=cfg.mode, precoder=cfg.precoder, fitness_mode=cfg.fitness_mode)
    if state is None:
        state = _init_state(ev, cfg)

    population = state.population.copy()
    fitness = state.fitness.copy()
    mcr = state.mcr.copy()
    mf = state.mf.copy()
    memory_pos = state.memory_pos
    generation = state.generation
    nfe = state.nfe
    prev_best = state.prev_best
    stall = state.stall_count
    pop_size = cfg.pop_size
    trace = []
    termination = None

    while True:
        if generation >= cfg.g_max:
            termination = "g_max"
            break
        if nfe >= cfg.nfe_max:
            termination = "nfe_max"
            break
        if stall >= cfg.stall_generations:
            termination = "stalled"
            break
        generation += 1

        best_idx = int(np.argmin(fitness))  # frozen snapshot of this generation
        trials = np.empty_like(population)
        crs = np.empty(pop_size)
        fs = np.empty(pop_size)
        for i in range(pop_size):
            rng = streams.substream(cfg.seed, streams.DE_INDIVIDUAL, generation, i)
            crs[i], fs[i] = sample_params(mcr, mf, cfg.cr_init, cfg.f_init, rng)
            r1, r2 = _pick_donors(rng, pop_size, i)
            mutant = mutate_best1(population, best_idx, r1, r2, i, fs[i], ev.n_phase)
            trials[i] = crossover_binomial(population[i], mutant, crs[i], rng)

        n_eval = min(pop_size, cfg.nfe_max - nfe)
        trial_fit = ev.batch(trials[:n_eval])
        nfe += n_eval
        successes = []
        for i in range(n_eval):
            if keep_trial(trial_fit[i], fitness[i]):
                if trial_fit[i] < fitness[i]:
                    successes.append((crs[i], fs[i], fitness[i] - trial_fit[i]))
                population[i] = trials[i]
                fitness[i] = trial_fit[i]
        memory_pos = update_memory(mcr, mf, memory_pos, successes)

        f_c = float(fitness.min())
        lam = local_search_count(f_c, prev_best, generation, cfg.g_max, pop_size)
        lam = min(lam, max(0, cfg.nfe_max - nfe))
        if lam > 0:
            chooser = streams.substream(cfg.seed, streams.LOCAL_SEARCH, generation)
            chosen = chooser.permutation(pop_size)[:lam]
            probes = np.stack(
                [
                    perturb(
                        population[j],
                        cfg.sigma_local,
                        streams.substream(cfg.seed, streams.LOCAL_SEARCH, generation, int(j)),
                        ev.n_phase,
                    )
                    for j in chosen
                ]
            )
            probe_fit = ev.batch(probes)
            nfe += lam
            for pos, j in enumerate(chosen):
                if probe_fit[pos] < fitness[j]:
                    population[j] = probes[pos]
                    fitness[j] = probe_fit[pos]

        gen_best = float(fitness.min())
        stall = stall + 1 if abs(prev_best - gen_best) < cfg.stall_tol else 0
        prev_best = gen_best
        trace.append(
            TraceRow(
                generation=generation,
                best=gen_best,
                worst=float(fitness.max()),
                mean=float(fitness.mean()),
                lambda_g=int(lam),
                nfe=nfe,
            )
        )

    final = OptimizerState(
        population=population,
        fitness=fitness,
        mcr=mcr,
        mf=mf,
        memory_pos=memory_pos,
        generation=generation,
        nfe=nfe,
        prev_best=prev_best,
        stall_count=stall,
    )
    theta, beams = ev.decode(final.best_x)
    return OptimizeResult(
        theta=theta,
        beams=beams,
        fitness=final.best_fitness,
        trace=tuple(trace),
        state=final,
        termination=termination,
    )
