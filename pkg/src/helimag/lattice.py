"""Scaled square-lattice grids, domains, index sets and discrete calculus.

Grid functions are piecewise constant on the closed cells
Q(i, j) = [lam*i, lam*(i+1)] x [lam*j, lam*(j+1)].  Values are stored
row-major in an (ny, nx) array indexed [j, i] so that flattening gives rows
of constant j.  Discrete derivatives are forward differences divided by the
spacing; outputs shrink instead of padding, so every stored value is a true
stencil value.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# absolute slack for cell-inclusion tests, scaled by the coordinate magnitude
GEOM_TOL = 1e-12


def det_sum(a: np.ndarray) -> float:
    """Deterministic fixed-order pairwise summation of all entries."""
    return float(np.add.reduce(np.asarray(a, dtype=float).ravel()))


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle [x0, x0+width] x [y0, y0+height].

    General polygons can be emulated by supplying ``cell_test(i, j, lam)``,
    a predicate deciding whether the closed cell Q(i, j) lies in the domain;
    when present it overrides the rectangle test.
    """

    x0: float = 0.0
    y0: float = 0.0
    width: float = 1.0
    height: float = 1.0
    cell_test: Optional[Callable[[int, int, float], bool]] = None

    def __post_init__(self) -> None:
        if not (self.width > 0.0 and self.height > 0.0):
            raise ValueError("domain width and height must be positive")

    def cell_inside(self, i: int, j: int, lam: float) -> bool:
        """True when the closed cell Q(i, j) is contained in the closed domain."""
        if self.cell_test is not None:
            return bool(self.cell_test(i, j, lam))
        tol = GEOM_TOL * max(1.0, abs(self.x0) + self.width, abs(self.y0) + self.height)
        return (
            lam * i >= self.x0 - tol
            and lam * (i + 1) <= self.x0 + self.width + tol
            and lam * j >= self.y0 - tol
            and lam * (j + 1) <= self.y0 + self.height + tol
        )

    def corners(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x0 + self.width, self.y0 + self.height)


@dataclass(frozen=True)
class ModelParams:
    """Lattice spacing and frustration offset with the derived quantities.

    alpha = 4*(1 - delta) is the nearest-neighbour coupling of the reduced
    energy; epsilon = lam / sqrt(2*delta) is the phase-transition scale.
    The intended regime is lam/sqrt(delta) small; epsilon >= 1 only warns.
    """

    lam: float
    delta: float

    def __post_init__(self) -> None:
        if not self.lam > 0.0:
            raise ValueError("lattice spacing must be positive")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")
        if self.epsilon >= 1.0:
            warnings.warn(
                "epsilon = lam/sqrt(2*delta) >= 1: outside the intended scaling regime",
                stacklevel=2,
            )

    @property
    def alpha(self) -> float:
        return 4.0 * (1.0 - self.delta)

    @property
    def epsilon(self) -> float:
        return self.lam / math.sqrt(2.0 * self.delta)

    @property
    def helix_angle(self) -> float:
        """Optimal per-bond rotation arccos(1 - delta) of the ground-state helix."""
        return math.acos(1.0 - self.delta)


def index_set(domain: Domain, lam: float) -> list[tuple[int, int]]:
    """Indices (i, j) whose three closed cells Q(i,j), Q(i+1,j), Q(i,j+1)
    all lie inside the domain, in row-major (j outer, i inner) order.

    Returns an empty list when no cell fits; callers must handle zero-term
    sums.
    """
    if not lam > 0.0:
        raise ValueError("lam must be positive")
    x0, y0, x1, y1 = domain.corners()
    # bounding index ranges; the predicate does the exact work
    i_lo = math.floor(x0 / lam) - 1
    i_hi = math.ceil(x1 / lam) + 1
    j_lo = math.floor(y0 / lam) - 1
    j_hi = math.ceil(y1 / lam) + 1
    out: list[tuple[int, int]] = []
    for j in range(j_lo, j_hi):
        for i in range(i_lo, i_hi):
            if (
                domain.cell_inside(i, j, lam)
                and domain.cell_inside(i + 1, j, lam)
                and domain.cell_inside(i, j + 1, lam)
            ):
                out.append((i, j))
    return out


def index_mask(domain: Domain, lam: float, nx: int, ny: int) -> np.ndarray:
    """Boolean (ny, nx) mask of index_set entries with 0 <= i < nx, 0 <= j < ny."""
    mask = np.zeros((ny, nx), dtype=bool)
    for i, j in index_set(domain, lam):
        if 0 <= i < nx and 0 <= j < ny:
            mask[j, i] = True
    return mask


@dataclass
class ScalarGrid:
    """Real-valued grid function, one value per site (i, j)."""

    nx: int
    ny: int
    spacing: float
    values: np.ndarray  # shape (ny, nx), indexed [j, i]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.ny, self.nx):
            raise ValueError(
                f"values shape {self.values.shape} != (ny, nx) = {(self.ny, self.nx)}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @classmethod
    def from_values(cls, values: np.ndarray, spacing: float) -> "ScalarGrid":
        values = np.asarray(values, dtype=float)
        ny, nx = values.shape
        return cls(nx=nx, ny=ny, spacing=spacing, values=values)

    def to_json(self) -> str:
        return json.dumps(
            {
                "nx": self.nx,
                "ny": self.ny,
                "lambda": self.spacing,
                "values": self.values.ravel().tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ScalarGrid":
        doc = json.loads(text)
        nx, ny = int(doc["nx"]), int(doc["ny"])
        values = np.array(doc["values"], dtype=float).reshape(ny, nx)
        return cls(nx=nx, ny=ny, spacing=float(doc["lambda"]), values=values)


@dataclass
class SpinField:
    """Unit spin field stored as angles psi (a lifting); u = (cos psi, sin psi)."""

    nx: int
    ny: int
    spacing: float
    angles: np.ndarray  # shape (ny, nx), radians, unconstrained reals

    def __post_init__(self) -> None:
        self.angles = np.asarray(self.angles, dtype=float)
        if self.angles.shape != (self.ny, self.nx):
            raise ValueError(
                f"angles shape {self.angles.shape} != (ny, nx) = {(self.ny, self.nx)}"
            )
        if not np.all(np.isfinite(self.angles)):
            raise ValueError("spin angles must be finite")

    @classmethod
    def from_angles(cls, angles: np.ndarray, spacing: float) -> "SpinField":
        angles = np.asarray(angles, dtype=float)
        ny, nx = angles.shape
        return cls(nx=nx, ny=ny, spacing=spacing, angles=angles)

    def vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit vectors (ux, uy); |u| = 1 is forced by the representation."""
        return np.cos(self.angles), np.sin(self.angles)

    def to_json(self) -> str:
        return json.dumps(
            {
                "nx": self.nx,
                "ny": self.ny,
                "lambda": self.spacing,
                "angles": self.angles.ravel().tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SpinField":
        doc = json.loads(text)
        nx, ny = int(doc["nx"]), int(doc["ny"])
        angles = np.array(doc["angles"], dtype=float).reshape(ny, nx)
        return cls(nx=nx, ny=ny, spacing=float(doc["lambda"]), angles=angles)


_STENCILS = ("d1", "d2", "d11", "d12", "d22")


def discrete_derivative(g: ScalarGrid, which: str) -> ScalarGrid:
    """Forward-difference derivatives d1, d2 and their compositions.

    d1 g[j, i] = (g[j, i+1] - g[j, i]) / lam, d2 differences in j.  Second
    derivatives compose first differences; d1 and d2 commute exactly in
    exact arithmetic (within 1e-12 relative in floats).
    """
    if which not in _STENCILS:
        raise ValueError(f"unknown derivative {which!r}; expected one of {_STENCILS}")
    lam = g.spacing
    a = g.values

    def d1(v: np.ndarray) -> np.ndarray:
        if v.shape[1] < 2:
            raise ValueError("grid too small for a d1 stencil")
        return (v[:, 1:] - v[:, :-1]) / lam

    def d2(v: np.ndarray) -> np.ndarray:
        if v.shape[0] < 2:
            raise ValueError("grid too small for a d2 stencil")
        return (v[1:, :] - v[:-1, :]) / lam

    if which == "d1":
        out = d1(a)
    elif which == "d2":
        out = d2(a)
    elif which == "d11":
        out = d1(d1(a))
    elif which == "d22":
        out = d2(d2(a))
    else:  # d12
        out = d1(d2(a))
    return ScalarGrid.from_values(out, lam)


@dataclass
class AffineInterpolant:
    """Continuous piecewise-affine interpolation of grid data at lattice
    points (lam*i, lam*j).

    Each cell splits along its anti-diagonal into a lower-left triangle
    T-(i, j) and an upper-right triangle T+(i, j).  On T- the gradient is
    (d1 g[j, i], d2 g[j, i]); on T+ it is (d1 g[j+1, i], d2 g[j, i+1]).
    """

    grid: ScalarGrid

    def __call__(self, x, y):
        g = self.grid
        lam = g.spacing
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        tol = GEOM_TOL * max(1.0, (g.nx - 1) * lam, (g.ny - 1) * lam)
        if np.any(x < -tol) or np.any(x > (g.nx - 1) * lam + tol):
            raise ValueError("evaluation point outside the covered rectangle")
        if np.any(y < -tol) or np.any(y > (g.ny - 1) * lam + tol):
            raise ValueError("evaluation point outside the covered rectangle")
        sx = np.clip(x / lam, 0.0, g.nx - 1 - 1e-15)
        sy = np.clip(y / lam, 0.0, g.ny - 1 - 1e-15)
        i = np.minimum(sx.astype(int), g.nx - 2)
        j = np.minimum(sy.astype(int), g.ny - 2)
        fx = sx - i
        fy = sy - j
        v = g.values
        g00 = v[j, i]
        g10 = v[j, i + 1]
        g01 = v[j + 1, i]
        g11 = v[j + 1, i + 1]
        lower = g00 + fx * (g10 - g00) + fy * (g01 - g00)
        upper = g11 + (1.0 - fx) * (g01 - g11) + (1.0 - fy) * (g10 - g11)
        return np.where(fx + fy <= 1.0, lower, upper)

    def gradient_table(self) -> dict[str, np.ndarray]:
        """Per-triangle gradients, arrays of shape (ny-1, nx-1) per component."""
        g = self.grid
        d1 = discrete_derivative(g, "d1").values  # (ny, nx-1)
        d2 = discrete_derivative(g, "d2").values  # (ny-1, nx)
        return {
            "lower_dx": d1[:-1, :],
            "lower_dy": d2[:, :-1],
            "upper_dx": d1[1:, :],
            "upper_dy": d2[:, 1:],
        }


def affine_interpolate(g: ScalarGrid) -> AffineInterpolant:
    """Piecewise-affine interpolant; exact on affine data, matches g at
    lattice points."""
    if g.nx < 2 or g.ny < 2:
        raise ValueError("interpolation needs a grid of at least 2x2")
    return AffineInterpolant(grid=g)
