"""Trajectory containers: timed pose sequences and demonstration sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .liegroup import Space


@dataclass(frozen=True, eq=False)
class Trajectory:
    """An ordered pose sequence with a normalized time parameter on [0, 1].

    Times are strictly increasing with times[0] = 0 and times[-1] = 1; all
    poses share one space tag.
    """

    poses: tuple
    times: np.ndarray

    def __post_init__(self):
        poses = tuple(self.poses)
        times = np.array(self.times, dtype=float).reshape(-1)
        if len(poses) < 2:
            raise InvalidArgumentError("trajectory needs at least 2 poses")
        if len(poses) != times.shape[0]:
            raise InvalidArgumentError(
                f"{len(poses)} poses but {times.shape[0]} time stamps"
            )
        spaces = {p.space for p in poses}
        if len(spaces) != 1:
            raise InvalidArgumentError("all poses must share one space tag")
        if times[0] != 0.0 or times[-1] != 1.0:
            raise InvalidArgumentError("times must start at 0 and end at 1")
        if np.any(np.diff(times) <= 0.0):
            raise InvalidArgumentError("times must be strictly increasing")
        times.flags.writeable = False
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def space(self) -> Space:
        return self.poses[0].space

    def rotations(self) -> np.ndarray:
        """Stacked rotations, shape (len, 3, 3)."""
        return np.stack([p.rotation for p in self.poses])

    def translations(self) -> np.ndarray:
        """Stacked translations, shape (len, 3)."""
        return np.stack([p.translation for p in self.poses])


@dataclass(frozen=True, eq=False)
class DemoSet:
    """A set of demonstrations of equal length sharing one space tag."""

    demos: tuple

    def __post_init__(self):
        demos = tuple(self.demos)
        if not demos:
            raise InvalidArgumentError("demo set needs at least one trajectory")
        lengths = {len(d) for d in demos}
        if len(lengths) != 1:
            raise InvalidArgumentError(
                f"demonstrations have mixed lengths: {sorted(lengths)}"
            )
        spaces = {d.space for d in demos}
        if len(spaces) != 1:
            raise InvalidArgumentError("demonstrations must share one space tag")
        object.__setattr__(self, "demos", demos)

    def __len__(self) -> int:
        return len(self.demos)

    def __iter__(self):
        return iter(self.demos)

    def __getitem__(self, k) -> Trajectory:
        return self.demos[k]

    @property
    def n_points(self) -> int:
        return len(self.demos[0])

    @property
    def space(self) -> Space:
        return self.demos[0].space


def uniform_times(n: int) -> np.ndarray:
    """Uniform time grid on [0, 1] with exact endpoints."""
    return np.linspace(0.0, 1.0, n)
