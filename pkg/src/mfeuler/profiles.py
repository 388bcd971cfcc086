"""Initial-data profiles for density and bulk velocity.

Profiles are exactly periodic closed forms.  The density profile can be
normalized to unit mass (the probability-density convention both solvers
share); normalization constants come from a fine lattice quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DENSITY_FAMILIES = ("uniform", "bump", "sine")
VELOCITY_FAMILIES = ("zero", "constant", "sine")

_NORM_RESOLUTION = 2**13


@dataclass(frozen=True)
class DensityProfile:
    """Positive periodic density shape, optionally normalized to unit mass.

    * ``uniform``: 1
    * ``bump``: 1 + amplitude * exp(concentration * (cos(2 pi (x - L/2)/L) - 1))
      (a smooth periodic blob centered mid-box; product form in 2-d)
    * ``sine``: 1 + amplitude * sin(2 pi x_1 / L)
    """

    family: str = "bump"
    amplitude: float = 0.2
    concentration: float = 8.0
    period: float = 2.0 * np.pi
    dim: int = 1
    normalize: bool = True

    def __post_init__(self):
        if self.family not in DENSITY_FAMILIES:
            raise ValueError(f"unknown density family {self.family!r}")
        if self.family == "sine" and abs(self.amplitude) >= 1.0:
            raise ValueError("sine density amplitude must stay below 1 for positivity")
        if self.family == "bump" and self.amplitude <= -1.0:
            raise ValueError("bump density amplitude must exceed -1 for positivity")

    def shape_values(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        two_pi = 2.0 * np.pi / self.period
        if self.family == "uniform":
            return np.ones(pts.shape[0])
        if self.family == "sine":
            return 1.0 + self.amplitude * np.sin(two_pi * pts[:, 0])
        phases = np.cos(two_pi * (pts - 0.5 * self.period)) - 1.0
        return 1.0 + self.amplitude * np.exp(self.concentration * phases.sum(axis=1))

    @cached_property
    def mass(self):
        """Lattice quadrature of the raw shape over the torus."""
        n = _NORM_RESOLUTION if self.dim == 1 else 2**9
        h = self.period / n
        axis = np.arange(n) * h
        if self.dim == 1:
            return float(np.sum(self.shape_values(axis[:, None])) * h)
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
        return float(np.sum(self.shape_values(pts)) * h * h)

    def __call__(self, points):
        vals = self.shape_values(points)
        return vals / self.mass if self.normalize else vals

    def on_grid(self, grid):
        from .fields import GridField

        if grid.dim == 1:
            vals = self(grid.axis_coords[:, None])
        else:
            xx, yy = np.meshgrid(grid.axis_coords, grid.axis_coords, indexing="ij")
            vals = self(np.stack([xx.ravel(), yy.ravel()], axis=-1)).reshape(grid.shape)
        return GridField(grid, np.reshape(vals, grid.shape))


@dataclass(frozen=True)
class VelocityProfile:
    """Closed-form initial bulk velocity; component q varies along axis q."""

    family: str = "sine"
    amplitude: float = 0.1
    period: float = 2.0 * np.pi

    def __post_init__(self):
        if self.family not in VELOCITY_FAMILIES:
            raise ValueError(f"unknown velocity family {self.family!r}")

    def component(self, q, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.family == "zero":
            return np.zeros(pts.shape[0])
        if self.family == "constant":
            return np.full(pts.shape[0], self.amplitude)
        return self.amplitude * np.sin(2.0 * np.pi * pts[:, q] / self.period)

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.stack([self.component(q, pts) for q in range(pts.shape[1])], axis=-1)

    def component_on_grid(self, grid, q):
        from .fields import GridField

        if grid.dim == 1:
            vals = self.component(q, grid.axis_coords[:, None])
        else:
            xx, yy = np.meshgrid(grid.axis_coords, grid.axis_coords, indexing="ij")
            vals = self.component(q, np.stack([xx.ravel(), yy.ravel()], axis=-1)).reshape(grid.shape)
        return GridField(grid, np.reshape(vals, grid.shape))
