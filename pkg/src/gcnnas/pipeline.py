"""Glue between the search strategy, the network, and the data harness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import data as data_mod
from . import search as search_mod
from .errors import ConfigError
from .modules import NUM_MODULES
from .optim import SGD, StepSchedule, scaled_milestones
from .rng import spawn_rng
from .supernet import Network, clamp_search_alpha


@dataclass
class ArchSearchSettings:
    epochs: int = 30
    warmup: int = 8
    population: int = 16
    epsilon: float = 1e-3
    mode: str = "continuous"  # forward mode for theta updates and fitness
    fitness: str = "accuracy"  # or "neg_loss"
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 16
    seed: int = 0
    threads: int = 1


@dataclass
class TrainSettings:
    epochs: int = 30
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 6e-4
    batch_size: int = 16
    seed: int = 0


def topk_for(classes: int) -> int:
    return min(5, classes)


def run_architecture_search(net: Network, split: data_mod.DatasetSplit,
                            settings: ArchSearchSettings,
                            log_fn=None) -> search_mod.SearchResult:
    """Search the supernet's architecture weights on the given split.

    Warmup epochs train the shared weights with one uniformly sampled
    module per block and touch no distribution state; afterwards each
    iteration trains at the mean architecture and scores the mixed
    population on the validation split.
    """
    if not split.validation:
        raise ConfigError("architecture search needs a non-empty validation split")
    if net.selection is not None:
        raise ConfigError("architecture search requires a supernet")
    blocks = net.config.blocks
    dims = blocks * NUM_MODULES
    optimizer = SGD(net.parameters(), lr=settings.lr, momentum=settings.momentum,
                    weight_decay=settings.weight_decay)
    schedule = StepSchedule(settings.lr, scaled_milestones(settings.epochs))
    uniform = np.ones((blocks, NUM_MODULES))

    def theta_update(epoch: int, mu: np.ndarray | None) -> None:
        optimizer.lr = schedule.lr_at(epoch)
        batch_rng = spawn_rng(settings.seed, "search-batches", epoch)
        if mu is None:
            draw_rng = spawn_rng(settings.seed, "search-warmup-draw", epoch)
            data_mod.train_epoch(net, split.train, optimizer, settings.batch_size,
                                 batch_rng, alpha=uniform, mode="sampled",
                                 sample_rng=draw_rng)
            return
        alpha = clamp_search_alpha(mu).reshape(blocks, NUM_MODULES)
        draw_rng = spawn_rng(settings.seed, "search-theta-draw", epoch)
        data_mod.train_epoch(net, split.train, optimizer, settings.batch_size,
                             batch_rng, alpha=alpha, mode=settings.mode,
                             sample_rng=draw_rng)

    def fitness(alpha_vec: np.ndarray, rng: np.random.Generator) -> float:
        alpha = clamp_search_alpha(alpha_vec).reshape(blocks, NUM_MODULES)
        if settings.fitness == "neg_loss":
            return -data_mod.mean_loss(net, split.validation, alpha=alpha,
                                       mode=settings.mode, rng=rng)
        accs = data_mod.evaluate(net, split.validation, k_list=(1,), alpha=alpha,
                                 mode=settings.mode, rng=rng)
        return accs[1]

    cfg = search_mod.SearchConfig(
        epochs=settings.epochs, warmup=settings.warmup,
        population=settings.population, epsilon=settings.epsilon,
        seed=settings.seed, threads=settings.threads,
    )
    return search_mod.run_search(dims, fitness, cfg, theta_update_fn=theta_update,
                                 log_fn=log_fn)


def train_network(net: Network, split: data_mod.DatasetSplit,
                  settings: TrainSettings) -> tuple[SGD, list[dict]]:
    """Train a fixed-architecture network; one metrics row per epoch."""
    optimizer = SGD(net.parameters(), lr=settings.lr, momentum=settings.momentum,
                    weight_decay=settings.weight_decay)
    schedule = StepSchedule(settings.lr, scaled_milestones(settings.epochs))
    k_eff = topk_for(net.config.classes)
    rows = []
    for epoch in range(settings.epochs):
        optimizer.lr = schedule.lr_at(epoch)
        rng = spawn_rng(settings.seed, "train-batches", epoch)
        loss = data_mod.train_epoch(net, split.train, optimizer, settings.batch_size, rng)
        accs = data_mod.evaluate(net, split.validation, k_list=(1, k_eff),
                                 batch_size=settings.batch_size)
        rows.append({
            "epoch": epoch,
            "train_loss": loss,
            "val_top1": accs[1],
            "val_top5": accs[k_eff],
        })
    return optimizer, rows
