"""Oriented bond angles, the chirality order parameter transform, discrete
vorticity, and spin reconstruction from chirality data.

The horizontal oriented angle between adjacent spins is
theta = sign(u x v) * arccos(u . v) with the convention sign(0) = -1, so
theta lies in [-pi, pi).  The order parameters are

    w = sqrt(2/delta) * sin(theta_hor / 2),
    z = sqrt(2/delta) * sin(theta_ver / 2),

which equal +-1 exactly on the optimal helices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .lattice import ModelParams, ScalarGrid, SpinField

TWO_PI = 2.0 * math.pi

# plaquette sums of reconstructed bond angles must close to this tolerance
CLOSURE_TOL = 1e-8


@dataclass
class ThetaFields:
    """Oriented bond angles: theta_hor[j, i] for bond (i,j)->(i+1,j),
    theta_ver[j, i] for bond (i,j)->(i,j+1).  All values in [-pi, pi)."""

    theta_hor: ScalarGrid
    theta_ver: ScalarGrid


@dataclass
class ChiralityPair:
    """Chirality grids w (horizontal) and z (vertical); |w|, |z| <= sqrt(2/delta)."""

    w: ScalarGrid
    z: ScalarGrid
    delta: float

    def to_json(self) -> str:
        # w and z have different shapes; nx/ny refer to the underlying spin grid
        nx = self.w.nx + 1
        ny = self.z.ny + 1
        return json.dumps(
            {
                "nx": nx,
                "ny": ny,
                "lambda": self.w.spacing,
                "delta": self.delta,
                "w": self.w.values.ravel().tolist(),
                "z": self.z.values.ravel().tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ChiralityPair":
        doc = json.loads(text)
        nx, ny = int(doc["nx"]), int(doc["ny"])
        lam = float(doc["lambda"])
        w = np.array(doc["w"], dtype=float).reshape(ny, nx - 1)
        z = np.array(doc["z"], dtype=float).reshape(ny - 1, nx)
        return cls(
            w=ScalarGrid.from_values(w, lam),
            z=ScalarGrid.from_values(z, lam),
            delta=float(doc["delta"]),
        )


def _oriented_angle_arrays(
    ux: np.ndarray, uy: np.ndarray, vx: np.ndarray, vy: np.ndarray
) -> np.ndarray:
    """Oriented angle for arrays of unit vectors; +pi remaps to -pi so the
    antipodal case carries sign(0) = -1."""
    cross = ux * vy - uy * vx
    dot = ux * vx + uy * vy
    ang = np.arctan2(cross, dot)
    return np.where(ang >= math.pi, -math.pi, ang)


def oriented_angle(u, v) -> float:
    """sign(u x v) * arccos(u . v) with sign(0) = -1; value in [-pi, pi)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if abs(u[0] ** 2 + u[1] ** 2 - 1.0) > 2.5e-12 or abs(v[0] ** 2 + v[1] ** 2 - 1.0) > 2.5e-12:
        raise ValueError("oriented_angle requires unit vectors")
    return float(_oriented_angle_arrays(u[0], u[1], v[0], v[1]))


def transform(u: SpinField, params: ModelParams) -> tuple[ThetaFields, ChiralityPair]:
    """Order-parameter transform: spin field -> (theta fields, chirality pair).

    w has one fewer column and z one fewer row than the spin grid.
    """
    if u.nx < 2 or u.ny < 2:
        raise ValueError("transform needs a spin field of at least 2x2")
    ux, uy = u.vectors()
    th = _oriented_angle_arrays(ux[:, :-1], uy[:, :-1], ux[:, 1:], uy[:, 1:])
    tv = _oriented_angle_arrays(ux[:-1, :], uy[:-1, :], ux[1:, :], uy[1:, :])
    scale = math.sqrt(2.0 / params.delta)
    w = scale * np.sin(th / 2.0)
    z = scale * np.sin(tv / 2.0)
    lam = u.spacing
    theta = ThetaFields(
        theta_hor=ScalarGrid.from_values(th, lam),
        theta_ver=ScalarGrid.from_values(tv, lam),
    )
    pair = ChiralityPair(
        w=ScalarGrid.from_values(w, lam),
        z=ScalarGrid.from_values(z, lam),
        delta=params.delta,
    )
    return theta, pair


def vorticity(theta: ThetaFields, snap_tol: float = 1e-6) -> ScalarGrid:
    """Plaquette vorticity V[j, i] = th[j,i] + tv[j,i+1] - th[j+1,i] - tv[j,i],
    snapped to the nearest of {-2pi, 0, 2pi}.

    Raises when any plaquette value is farther than snap_tol from all three:
    such theta fields were not generated from a single spin field.
    """
    th = theta.theta_hor.values
    tv = theta.theta_ver.values
    raw = th[:-1, :] + tv[:, 1:] - th[1:, :] - tv[:, :-1]
    snapped = TWO_PI * np.round(raw / TWO_PI)
    bad = np.abs(raw - snapped) > snap_tol
    if np.any(bad) or np.any(np.abs(snapped) > TWO_PI + snap_tol):
        jj, ii = np.nonzero(bad | (np.abs(snapped) > TWO_PI + snap_tol))
        plaq = [(int(i), int(j)) for i, j in zip(ii, jj)]
        raise ValueError(f"inconsistent theta fields at plaquettes {plaq[:20]}")
    return ScalarGrid.from_values(snapped, theta.theta_hor.spacing)


def reconstruct_spin(
    pair: ChiralityPair, params: ModelParams, anchor: float = 0.0
) -> SpinField:
    """Rebuild a spin field whose transform equals the given pair, with
    psi[0, 0] = anchor; the pair determines the field up to this global
    rotation.

    The implied bond angles are theta = 2*arcsin(sqrt(delta/2)*w).  They must
    be path independent: every plaquette sum of implied angles must vanish
    exactly (values that close only modulo 2pi are rejected, since the row
    then column integration below would produce a multivalued lifting).
    """
    delta = params.delta
    bound = math.sqrt(2.0 / delta)
    w = pair.w.values
    z = pair.z.values
    if np.any(np.abs(w) > bound) or np.any(np.abs(z) > bound):
        raise ValueError("chirality values exceed the sqrt(2/delta) bound")
    s = math.sqrt(delta / 2.0)
    th = 2.0 * np.arcsin(np.clip(s * w, -1.0, 1.0))
    tv = 2.0 * np.arcsin(np.clip(s * z, -1.0, 1.0))
    closure = th[:-1, :] + tv[:, 1:] - th[1:, :] - tv[:, :-1]
    bad = np.abs(closure) > CLOSURE_TOL
    if np.any(bad):
        jj, ii = np.nonzero(bad)
        plaq = [(int(i), int(j)) for i, j in zip(ii, jj)]
        raise ValueError(
            f"plaquette closure violated (pair outside the transform's image "
            f"for a single-valued lifting) at {plaq[:20]}"
        )
    ny, nx = th.shape[0], tv.shape[1]
    psi = np.empty((ny, nx), dtype=float)
    # integrate along row 0, then up each column
    psi[0, 0] = anchor
    psi[0, 1:] = anchor + np.cumsum(th[0, :])
    psi[1:, :] = psi[0, :][None, :] + np.cumsum(tv, axis=0)
    return SpinField.from_angles(psi, pair.w.spacing)
