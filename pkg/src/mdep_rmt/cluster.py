"""Cluster shapes: the extremal index paired with a sampler for the normalized
cluster array Q (sup-norm 1) and its singular values."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass
class ClusterShapeSpec:
    theta: float
    q_sampler: Callable[[np.random.Generator], np.ndarray] = field(repr=False)
    width: int
    sigma_bound: float
    sv_batch: Optional[Callable[[np.random.Generator, int], np.ndarray]] = field(
        default=None, repr=False)
    theta_stderr: Optional[float] = None
    source: str = "closed-form"

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")

    def sample_q(self, rng):
        return self.q_sampler(rng)

    def sample_sv(self, rng, size):
        """``size`` draws of the descending singular values, shape (size, width)."""
        if self.sv_batch is not None:
            return self.sv_batch(rng, size)
        from .spectra import singular_values

        out = np.zeros((size, self.width))
        for i in range(size):
            s = singular_values(self.q_sampler(rng))[: self.width]
            out[i, : s.size] = s
        return out
