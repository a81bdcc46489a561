"""
Greenwave Trajectory
Sampled (u, u_x, u_t) on a space-time grid
"""

from dataclasses import dataclass, replace
from typing import Iterator, Tuple

import numpy as np


@dataclass
class Trajectory:
    """
    Samples of u, u_x and u_t with shape (len(times), len(x)).

    `periodic` marks a ring grid; a closed ring grid also carries the
    point x = period so that u[:, -1] - u[:, 0] is the winding jump.
    """

    x: np.ndarray
    times: np.ndarray
    u: np.ndarray
    u_x: np.ndarray
    u_t: np.ndarray
    periodic: bool = False
    closed: bool = False

    def __post_init__(self):
        expected = (len(self.times), len(self.x))
        for name in ("u", "u_x", "u_t"):
            if getattr(self, name).shape != expected:
                raise ValueError(
                    f"Trajectory field '{name}' has shape "
                    f"{getattr(self, name).shape}, expected {expected}"
                )

    @property
    def dt(self) -> float:
        if len(self.times) < 2:
            return 0.0
        return float(self.times[1] - self.times[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.u.shape

    def same_grid(self, other: "Trajectory") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.times, other.times)
            and np.allclose(self.x, other.x, rtol=0.0, atol=1e-12)
        )

    def with_fields(self, u, u_x, u_t, x=None) -> "Trajectory":
        return replace(
            self, u=u, u_x=u_x, u_t=u_t, x=self.x if x is None else x
        )

    def close_ring(self, period: float, jump: float) -> "Trajectory":
        """Append the point x = period with u shifted by `jump`"""
        if not self.periodic or self.closed:
            return self
        x = np.append(self.x, period)
        u = np.concatenate([self.u, self.u[:, :1] + jump], axis=1)
        u_x = np.concatenate([self.u_x, self.u_x[:, :1]], axis=1)
        u_t = np.concatenate([self.u_t, self.u_t[:, :1]], axis=1)
        return replace(self, x=x, u=u, u_x=u_x, u_t=u_t, closed=True)

    def sup_norms(self) -> Tuple[float, float, float]:
        return (
            float(np.max(np.abs(self.u))),
            float(np.max(np.abs(self.u_x))),
            float(np.max(np.abs(self.u_t))),
        )

    def snapshot_rows(self, stride: int = 1) -> Iterator[tuple]:
        """(t, x, u, u_x, u_t) rows for every stride-th time level"""
        if stride < 1:
            raise ValueError("snapshot stride must be >= 1")
        last = len(self.times) - 1
        levels = list(range(0, len(self.times), stride))
        if levels[-1] != last:
            levels.append(last)
        for i in levels:
            for j in range(len(self.x)):
                yield (
                    float(self.times[i]),
                    float(self.x[j]),
                    float(self.u[i, j]),
                    float(self.u_x[i, j]),
                    float(self.u_t[i, j]),
                )
