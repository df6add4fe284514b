"""Shared domain types: fractional parameters, the uniform time grid and
phase-space samples.

All types are frozen dataclasses; array fields are made read-only so that
instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridReachesSingularity, NonPositiveStep, ZeroSteps

# The grid must stop this many steps short of the kernel evaluation time
# t_eval: (t - s)^(beta - alpha) is unbounded as s -> t_eval when beta < alpha.
EPSILON_GUARD_STEPS = 10


def _frozen_vector(x) -> np.ndarray:
    a = np.array(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1)
    if a.ndim != 1:
        raise ValueError("expected a 1-d vector")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FractionalParams:
    """The triple (alpha, beta, t_eval) parameterizing every fractional kernel.

    Both orders live in (0, 1]; the closed right endpoint is accepted because
    alpha = beta = 1 is the classical limit used throughout the tests.
    """

    alpha: float
    beta: float
    t_eval: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name}={v} outside (0, 1]")
        if not self.t_eval > 0.0:
            raise ValueError(f"t_eval={self.t_eval} must be positive")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_start + k*h for k = 0..n_steps."""

    t_start: float
    h: float
    n_steps: int

    def __post_init__(self):
        if self.h <= 0.0:
            raise NonPositiveStep(f"h={self.h}")
        if self.n_steps < 1:
            raise ZeroSteps(f"n_steps={self.n_steps}")

    @property
    def t_end(self) -> float:
        return self.t_start + self.n_steps * self.h

    def point(self, k: int) -> float:
        # Direct formula, never cumulative summation: point(N) is exact to
        # one rounding of t_start + N*h.
        return self.t_start + k * self.h

    @property
    def points(self) -> np.ndarray:
        p = self.t_start + np.arange(self.n_steps + 1) * self.h
        p.setflags(write=False)
        return p


def make_grid(t_start: float, h: float, n_steps: int,
              params: FractionalParams) -> TimeGrid:
    """Build a grid and validate it against the kernel singularity guard.

    The grid must end at least EPSILON_GUARD_STEPS * h before params.t_eval.
    """
    grid = TimeGrid(t_start, h, n_steps)
    guard = EPSILON_GUARD_STEPS * h
    if grid.t_end > params.t_eval - guard:
        raise GridReachesSingularity(
            f"grid ends at {grid.t_end}, must stay below "
            f"t_eval - {EPSILON_GUARD_STEPS}h = {params.t_eval - guard}")
    return grid


@dataclass(frozen=True)
class PhaseState:
    """One (q, v, p) sample of the Hamilton-Pontryagin state."""

    q: np.ndarray
    v: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _frozen_vector(self.q))
        object.__setattr__(self, "v", _frozen_vector(self.v))
        object.__setattr__(self, "p", _frozen_vector(self.p))
        n = self.q.shape[0]
        if self.v.shape[0] != n or self.p.shape[0] != n:
            raise ValueError("q, v, p must share the same dimension")

    @property
    def dim(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class SeedRecord:
    """Provenance of the noise used to produce a trajectory."""

    seed: int
    channels: int


@dataclass(frozen=True)
class Trajectory:
    grid: TimeGrid
    states: tuple[PhaseState, ...]
    seed_record: SeedRecord = field(default=SeedRecord(0, 0))

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if len(self.states) != self.grid.n_steps + 1:
            raise ValueError(
                f"{len(self.states)} states for {self.grid.n_steps} steps")
        dims = {s.dim for s in self.states}
        if len(dims) != 1:
            raise ValueError("state dimension changes along trajectory")

    @property
    def dim(self) -> int:
        return self.states[0].dim

    def component(self, name: str) -> np.ndarray:
        """Stack q, v or p samples into an (N+1, n) array."""
        return np.array([getattr(s, name) for s in self.states])
