"""SGD with Nesterov momentum and the step-decay learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError
from .tensor import Parameter

# drop points of the reference 70-epoch recipe, kept as fractions so that
# shorter runs scale proportionally
MILESTONE_FRACTIONS = (30 / 70, 45 / 70, 60 / 70)


def scaled_milestones(total_epochs: int) -> list[int]:
    """Map the reference drop epochs onto a run of ``total_epochs``."""
    if total_epochs < 1:
        raise ArgumentError(f"total_epochs must be >= 1, got {total_epochs}")
    seen = []
    for frac in MILESTONE_FRACTIONS:
        e = round(frac * total_epochs)
        if 0 < e < total_epochs and e not in seen:
            seen.append(e)
    return seen


class StepSchedule:
    """lr(epoch) = base * gamma^(number of milestones passed)."""

    def __init__(self, base_lr: float, milestones, gamma: float = 0.1):
        self.base_lr = base_lr
        self.milestones = sorted(milestones)
        self.gamma = gamma

    def lr_at(self, epoch: int) -> float:
        drops = sum(1 for m in self.milestones if epoch >= m)
        return self.base_lr * self.gamma**drops


class SGD:
    """Nesterov-momentum SGD with per-parameter weight-decay opt-in.

    Update per step (d = grad + wd * p when the parameter decays):
        v   <- momentum * v + d
        p   <- p - lr * (d + momentum * v)      (Nesterov)
        p   <- p - lr * v                        (plain momentum)
    """

    def __init__(self, params, lr: float, momentum: float = 0.9,
                 weight_decay: float = 0.0, nesterov: bool = True):
        self.params: list[Parameter] = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.nesterov = nesterov
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        m = self.momentum
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            d = p.grad
            if self.weight_decay and p.decay:
                d = d + self.weight_decay * p.data
            v *= m
            v += d
            if self.nesterov and m:
                p.data -= self.lr * (d + m * v)
            else:
                p.data -= self.lr * v

    def state_entries(self, prefix: str = "opt") -> dict[str, np.ndarray]:
        entries = {f"{prefix}.lr": np.asarray([self.lr], dtype=np.float64)}
        for p, v in zip(self.params, self.velocity):
            entries[f"{prefix}.velocity.{p.name}"] = v
        return entries

    def load_state_entries(self, entries: dict[str, np.ndarray], prefix: str = "opt") -> None:
        key = f"{prefix}.lr"
        if key in entries:
            self.lr = float(entries[key][0])
        for i, p in enumerate(self.params):
            vkey = f"{prefix}.velocity.{p.name}"
            if vkey in entries:
                self.velocity[i] = np.asarray(entries[vkey], dtype=p.data.dtype).reshape(p.shape).copy()
