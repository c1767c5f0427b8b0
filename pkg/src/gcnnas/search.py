"""Cross-entropy evolution strategy with importance mixing.

The architecture matrix is searched as a flattened vector under a
diagonal Gaussian. Each iteration trains the shared network weights at
the distribution mean, then refreshes the population: old samples are
retained when their density under the new distribution justifies it, new
draws are admitted by the complementary rule, the set is trimmed or
backfilled to size, every member is evaluated on the validation split,
and the rank-weighted samples update the mean and per-dimension variance
(the variance is taken around the previous mean).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .rng import spawn_rng

LOG_TWO_PI = math.log(2.0 * math.pi)


@dataclass
class SearchDistribution:
    """Diagonal Gaussian over flattened architecture parameters."""

    mu: np.ndarray
    sigma2: np.ndarray
    epsilon: float

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma2 = np.asarray(self.sigma2, dtype=np.float64)
        if self.epsilon <= 0:
            raise ArgumentError(f"epsilon must be positive, got {self.epsilon}")
        if self.mu.shape != self.sigma2.shape or self.mu.ndim != 1:
            raise ArgumentError("mu and sigma2 must be 1-D vectors of equal length")
        if (self.sigma2 < self.epsilon).any():
            raise ArgumentError("variances must respect the epsilon floor")

    @property
    def dims(self) -> int:
        return self.mu.shape[0]

    def logpdf(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(
            -0.5 * np.sum(LOG_TWO_PI + np.log(self.sigma2) + (x - self.mu) ** 2 / self.sigma2)
        )


def init_distribution(dims: int, mu_init: float = 0.125, sigma2_init: float = 0.25,
                      epsilon: float = 1e-3) -> SearchDistribution:
    return SearchDistribution(
        mu=np.full(dims, mu_init, dtype=np.float64),
        sigma2=np.full(dims, sigma2_init, dtype=np.float64),
        epsilon=epsilon,
    )


def sample_population(dist: SearchDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent draws, one per row."""
    noise = rng.standard_normal((n, dist.dims))
    return dist.mu[None, :] + noise * np.sqrt(dist.sigma2)[None, :]


def _log_ratio(alpha, num: SearchDistribution, den: SearchDistribution) -> float:
    diff = num.logpdf(alpha) - den.logpdf(alpha)
    if not math.isfinite(diff):
        return 0.0  # degenerate densities count as ratio 1
    return diff


def keep_old_sample(alpha, pi_old: SearchDistribution, pi_new: SearchDistribution,
                    r1: float) -> bool:
    """Retain an old sample iff min(1, p_new/p_old) exceeds the draw."""
    log_ratio = _log_ratio(alpha, pi_new, pi_old)
    if log_ratio >= 0.0:
        return r1 < 1.0
    if r1 <= 0.0:
        return True
    return log_ratio > math.log(r1)


def keep_new_sample(alpha, pi_old: SearchDistribution, pi_new: SearchDistribution,
                    r2: float) -> bool:
    """Admit a fresh draw iff max(0, 1 - p_old/p_new) exceeds the draw."""
    log_ratio = _log_ratio(alpha, pi_old, pi_new)
    if log_ratio >= 0.0:
        return 0.0 > r2
    return 1.0 - math.exp(log_ratio) > r2


@dataclass
class ScoredSample:
    alpha: np.ndarray
    fitness: float | None = None
    origin: str = "new"


def trim_backfill(samples: list[ScoredSample], n: int, dist: SearchDistribution,
                  rng: np.random.Generator) -> list[ScoredSample]:
    """Force the population to exactly ``n``: uniform random removal when
    over, fresh draws from the current distribution when under."""
    out = list(samples)
    while len(out) > n:
        out.pop(int(rng.integers(len(out))))
    while len(out) < n:
        out.append(ScoredSample(alpha=sample_population(dist, 1, rng)[0], origin="new"))
    return out


def rank_weights(n: int) -> np.ndarray:
    """Positive, strictly decreasing weights proportional to 1/rank.

    The log(1+N) factor of the definition cancels in the normalization.
    """
    if n < 1:
        raise ArgumentError(f"population size must be >= 1, got {n}")
    lam = 1.0 / np.arange(1, n + 1, dtype=np.float64)
    return lam / lam.sum()


def update_distribution(sorted_alphas: np.ndarray, lam: np.ndarray,
                        dist: SearchDistribution) -> SearchDistribution:
    """Rank-weighted mean and variance update.

    ``sorted_alphas`` rows must be ordered best-first; the variance is
    computed around the incoming (old) mean, then floored by epsilon.
    """
    sorted_alphas = np.asarray(sorted_alphas, dtype=np.float64)
    if sorted_alphas.shape[0] != lam.shape[0]:
        raise ArgumentError("one weight per sample required")
    mu_new = lam @ sorted_alphas
    sigma2_new = lam @ (sorted_alphas - dist.mu[None, :]) ** 2 + dist.epsilon
    return SearchDistribution(mu=mu_new, sigma2=sigma2_new, epsilon=dist.epsilon)


@dataclass
class SearchConfig:
    epochs: int = 30
    warmup: int = 8
    population: int = 16
    epsilon: float = 1e-3
    mu_init: float = 0.125
    sigma2_init: float = 0.25
    seed: int = 0
    threads: int = 1


@dataclass
class IterationRecord:
    iteration: int
    phase: str
    retained_old: int = 0
    fresh_draws: int = 0
    best_fitness: float | None = None
    median_fitness: float | None = None
    mu_min: float | None = None
    mu_mean: float | None = None
    mu_max: float | None = None
    sigma2_mean: float | None = None

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "phase": self.phase,
            "retained_old": self.retained_old,
            "fresh_draws": self.fresh_draws,
            "best_fitness": self.best_fitness,
            "median_fitness": self.median_fitness,
            "mu_min": self.mu_min,
            "mu_mean": self.mu_mean,
            "mu_max": self.mu_max,
            "sigma2_mean": self.sigma2_mean,
        }


@dataclass
class SearchResult:
    best_alpha: np.ndarray
    best_fitness: float
    mu: np.ndarray
    sigma2: np.ndarray
    history: list[IterationRecord] = field(default_factory=list)


def run_search(dims: int, fitness_fn, config: SearchConfig,
               theta_update_fn=None, log_fn=None) -> SearchResult:
    """Full search loop over a ``dims``-dimensional architecture vector.

    ``fitness_fn(alpha, rng) -> float`` scores one sample (larger is
    better) and must not depend on evaluation order. ``theta_update_fn``
    receives ``(epoch, mu_or_None)``: ``None`` marks a warmup epoch, in
    which no distribution bookkeeping happens at all.
    """
    dist = init_distribution(dims, config.mu_init, config.sigma2_init, config.epsilon)
    prev_dist = dist
    s_old: list[ScoredSample] = []
    rng_draw = spawn_rng(config.seed, "search-draw")
    rng_mix = spawn_rng(config.seed, "search-mix")
    rng_trim = spawn_rng(config.seed, "search-trim")
    history: list[IterationRecord] = []

    def emit(record: IterationRecord) -> None:
        history.append(record)
        if log_fn is not None:
            log_fn(record)

    for epoch in range(config.epochs):
        if epoch < config.warmup:
            if theta_update_fn is not None:
                theta_update_fn(epoch, None)
            emit(IterationRecord(iteration=epoch, phase="warmup"))
            continue

        if theta_update_fn is not None:
            theta_update_fn(epoch, dist.mu.copy())

        selected: list[ScoredSample] = []
        if s_old:
            r1 = float(rng_mix.random())
            r2 = float(rng_mix.random())
            for i in range(config.population):
                old = s_old[i]
                if keep_old_sample(old.alpha, prev_dist, dist, r1):
                    selected.append(ScoredSample(alpha=old.alpha.copy(), origin="old"))
                cand = sample_population(dist, 1, rng_draw)[0]
                if keep_new_sample(cand, prev_dist, dist, r2):
                    selected.append(ScoredSample(alpha=cand, origin="new"))
        population = trim_backfill(selected, config.population, dist, rng_trim)
        retained_old = sum(1 for s in population if s.origin == "old")
        fresh_draws = config.population - retained_old

        eval_rngs = [spawn_rng(config.seed, "fitness", epoch, i)
                     for i in range(config.population)]
        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                fits = list(pool.map(
                    lambda pair: float(fitness_fn(pair[0].alpha, pair[1])),
                    zip(population, eval_rngs),
                ))
        else:
            fits = [float(fitness_fn(s.alpha, r)) for s, r in zip(population, eval_rngs)]
        for s, f in zip(population, fits):
            s.fitness = f

        order = sorted(range(config.population), key=lambda i: (-fits[i], i))
        sorted_alphas = np.stack([population[i].alpha for i in order])
        lam = rank_weights(config.population)
        prev_dist = dist
        dist = update_distribution(sorted_alphas, lam, dist)
        s_old = population

        top = population[order[0]]
        emit(IterationRecord(
            iteration=epoch,
            phase="search",
            retained_old=retained_old,
            fresh_draws=fresh_draws,
            best_fitness=float(top.fitness),
            median_fitness=float(np.median(fits)),
            mu_min=float(dist.mu.min()),
            mu_mean=float(dist.mu.mean()),
            mu_max=float(dist.mu.max()),
            sigma2_mean=float(dist.sigma2.mean()),
        ))

    # answer: best member of the last evaluated population (fitness values
    # from different iterations score different network snapshots, so only
    # the final population is comparable); a warmup-only run answers mu
    if s_old:
        best = min(s_old, key=lambda s: -s.fitness)
        best_alpha, best_fitness = best.alpha.copy(), float(best.fitness)
    else:
        best_alpha, best_fitness = dist.mu.copy(), -math.inf
    return SearchResult(
        best_alpha=best_alpha,
        best_fitness=best_fitness,
        mu=dist.mu.copy(),
        sigma2=dist.sigma2.copy(),
        history=history,
    )
