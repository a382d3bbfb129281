"""Comparison optimizers sharing the improved DE's encoding and fitness.

All baselines evaluate candidates through the exact same
:class:`~risbeam.de_opt.Evaluator` path, so benchmark gaps measure the
search strategy alone:

* ``canonical_de`` -- DE/best/1 with fixed F and CR, elitist selection, no
  success-history adaptation and no local search;
* ``ga`` -- a real-coded genetic algorithm with tournament selection, blend
  crossover, per-entry Gaussian mutation, and single-individual elitism;
* ``random_rzf`` -- one non-iterative draw: uniform phases plus RZF
  precoding.
"""

from dataclasses import dataclass

import numpy as np

from . import streams
from .channel import PhaseVector
from .de_opt import (
    AVG_SER,
    JOINT,
    PASSIVE_ONLY,
    Evaluator,
    TraceRow,
    crossover_binomial,
    keep_trial,
    mutate_best1,
)
from .encode import repair
from .linkmath import RZF

CANONICAL_DE = "canonical_de"
GA = "ga"
RANDOM_RZF = "random_rzf"
KINDS = (CANONICAL_DE, GA, RANDOM_RZF)


@dataclass(frozen=True)
class BaselineConfig:
    """Settings for one baseline run.

    The evaluation budget (``g_max``, ``nfe_max``) should match the improved
    DE's for fair comparisons.  GA mutation probability defaults to 1/dim
    when left as None.
    """

    kind: str
    pop_size: int = 40
    g_max: int = 350
    nfe_max: int = 35000
    de_f: float = 0.1
    de_cr: float = 0.9
    ga_crossover_prob: float = 0.9
    ga_mutation_prob: float | None = None
    ga_mutation_sigma: float = 0.1
    ga_tournament: int = 2
    ga_blend_alpha: float = 0.5
    stall_generations: int = 50
    stall_tol: float = 1e-12
    seed: int = 0
    mode: str = JOINT
    precoder: str = RZF
    fitness_mode: str = AVG_SER

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.pop_size < 4:
            raise ValueError("population must have at least 4 individuals")
        if self.ga_tournament < 1:
            raise ValueError("tournament size must be positive")


@dataclass(frozen=True)
class BaselineResult:
    theta: PhaseVector
    beams: object
    fitness: float
    trace: tuple
    nfe: int


def run_baseline(problem, cfg):
    """Run the selected baseline under the configured evaluation budget."""
    cfg.validate()
    ev = Evaluator(problem, mode=cfg.mode, precoder=cfg.precoder, fitness_mode=cfg.fitness_mode)
    if cfg.kind == RANDOM_RZF:
        return _random_rzf(problem, cfg)
    if cfg.kind == CANONICAL_DE:
        return _canonical_de(ev, cfg)
    return _real_coded_ga(ev, cfg)


def _random_rzf(problem, cfg):
    """Uniform random phases plus RZF precoding; one fitness evaluation."""
    ev = Evaluator(problem, mode=PASSIVE_ONLY, precoder=RZF, fitness_mode=cfg.fitness_mode)
    rng = streams.substream(cfg.seed, streams.RANDOM_PHASES)
    x = rng.uniform(-1.0, 1.0, size=ev.n_dim)
    fit = ev.fitness(x)
    theta, beams = ev.decode(x)
    trace = (TraceRow(generation=1, best=fit, worst=fit, mean=fit, lambda_g=0, nfe=1),)
    return BaselineResult(theta=theta, beams=beams, fitness=fit, trace=trace, nfe=1)


def _canonical_de(ev, cfg):
    """DE/best/1 with fixed F and CR and elitist selection."""
    rng0 = streams.substream(cfg.seed, streams.INIT_POPULATION)
    population = rng0.uniform(-1.0, 1.0, size=(cfg.pop_size, ev.n_dim))
    fitness = ev.batch(population)
    nfe = cfg.pop_size
    prev_best = float(fitness.min())
    stall = 0
    trace = []
    generation = 0
    while generation < cfg.g_max and nfe < cfg.nfe_max and stall < cfg.stall_generations:
        generation += 1
        best_idx = int(np.argmin(fitness))
        trials = np.empty_like(population)
        for i in range(cfg.pop_size):
            rng = streams.substream(cfg.seed, streams.DE_INDIVIDUAL, generation, i)
            order = rng.permutation(cfg.pop_size)
            r1, r2 = [int(j) for j in order if j != i][:2]
            mutant = mutate_best1(population, best_idx, r1, r2, i, cfg.de_f, ev.n_phase)
            trials[i] = crossover_binomial(population[i], mutant, cfg.de_cr, rng)
        n_eval = min(cfg.pop_size, cfg.nfe_max - nfe)
        trial_fit = ev.batch(trials[:n_eval])
        nfe += n_eval
        for i in range(n_eval):
            if keep_trial(trial_fit[i], fitness[i]):
                population[i] = trials[i]
                fitness[i] = trial_fit[i]
        gen_best = float(fitness.min())
        stall = stall + 1 if abs(prev_best - gen_best) < cfg.stall_tol else 0
        prev_best = gen_best
        trace.append(
            TraceRow(
                generation=generation,
                best=gen_best,
                worst=float(fitness.max()),
                mean=float(fitness.mean()),
                lambda_g=0,
                nfe=nfe,
            )
        )
    best = int(np.argmin(fitness))
    theta, beams = ev.decode(population[best])
    return BaselineResult(
        theta=theta,
        beams=beams,
        fitness=float(fitness[best]),
        trace=tuple(trace),
        nfe=nfe,
    )


def _tournament(rng, fitness, size):
    contenders = rng.integers(len(fitness), size=size)
    return int(contenders[np.argmin(fitness[contenders])])


def _real_coded_ga(ev, cfg):
    """Generational real-coded GA with single-individual elitism."""
    dim = ev.n_dim
    p_mut = cfg.ga_mutation_prob if cfg.ga_mutation_prob is not None else 1.0 / max(dim, 1)
    rng0 = streams.substream(cfg.seed, streams.INIT_POPULATION)
    population = rng0.uniform(-1.0, 1.0, size=(cfg.pop_size, dim))
    fitness = ev.batch(population)
    nfe = cfg.pop_size
    prev_best = float(fitness.min())
    stall = 0
    trace = []
    generation = 0
    while generation < cfg.g_max and nfe < cfg.nfe_max and stall < cfg.stall_generations:
        generation += 1
        elite_idx = int(np.argmin(fitness))
        elite_x = population[elite_idx].copy()
        elite_fit = float(fitness[elite_idx])
        children = np.empty_like(population)
        for i in range(cfg.pop_size):
            rng = streams.substream(cfg.seed, streams.GA_INDIVIDUAL, generation, i)
            p1 = population[_tournament(rng, fitness, cfg.ga_tournament)]
            p2 = population[_tournament(rng, fitness, cfg.ga_tournament)]
            if rng.uniform() <= cfg.ga_crossover_prob:
                lo = np.minimum(p1, p2)
                hi = np.maximum(p1, p2)
                span = cfg.ga_blend_alpha * (hi - lo)
                child = rng.uniform(lo - span, hi + span)
            else:
                child = p1.copy()
            mutate = rng.uniform(size=dim) < p_mut
            child = np.where(
                mutate, child + rng.normal(0.0, cfg.ga_mutation_sigma, size=dim), child
            )
            children[i] = repair(child, p1, ev.n_phase)
        n_eval = min(cfg.pop_size, cfg.nfe_max - nfe)
        child_fit_eval = ev.batch(children[:n_eval])
        nfe += n_eval
        # unevaluated children (budget exhausted) are dropped in favor of parents
        population[:n_eval] = children[:n_eval]
        fitness[:n_eval] = child_fit_eval
        worst = int(np.argmax(fitness))
        if elite_fit < fitness.min():
            population[worst] = elite_x
            fitness[worst] = elite_fit
        gen_best = float(fitness.min())
        stall = stall + 1 if abs(prev_best - gen_best) < cfg.stall_tol else 0
        prev_best = gen_best
        trace.append(
            TraceRow(
                generation=generation,
                best=gen_best,
                worst=float(fitness.max()),
                mean=float(fitness.mean()),
                lambda_g=0,
                nfe=nfe,
            )
        )
    best = int(np.argmin(fitness))
    theta, beams = ev.decode(population[best])
    return BaselineResult(
        theta=theta,
        beams=beams,
        fitness=float(fitness[best]),
        trace=tuple(trace),
        nfe=nfe,
    )
