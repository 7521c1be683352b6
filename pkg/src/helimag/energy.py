"""Microscopic energies of the frustrated chain/lattice model and their exact
double-well decomposition.

The renormalized energy is

    H = 1/(sqrt(2)*lam*delta^(3/2)) * (1/2) * lam^2 *
        sum |u(i+2,j) - (alpha/2) u(i+1,j) + u(i,j)|^2   (+ vertical analogue)

summed over interior stencils only.  It splits exactly, bond pair by bond
pair, into a Modica-Mortola form

    (1/2 eps) lam^2 [W(w_i) + W(w_{i+1})] + eps lam^2 rho * |d1 w|^2

with W(s) = (1 - s^2)^2 and a correcting factor rho depending on the two
bond angles; the split is an identity in exact arithmetic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chirality import transform
from .lattice import Domain, ModelParams, ScalarGrid, SpinField, det_sum, index_mask

CSV_HEADER = "lambda,delta,epsilon,H_total,H_hor,H_ver,potential,gradient"


def W(s):
    """Double-well potential (1 - s^2)^2 with wells at s = +-1."""
    s = np.asarray(s, dtype=float)
    return (1.0 - s * s) ** 2


def tilde_W_n(s, delta: float):
    """n-dependent double-well (1 - (2/delta) sin^2(arccos(1-delta) s/2))^2.

    Satisfies W(s) >= tilde_W_n(s) for all real s.
    """
    s = np.asarray(s, dtype=float)
    beta = math.acos(1.0 - delta)
    return (1.0 - (2.0 / delta) * np.sin(beta * s / 2.0) ** 2) ** 2


@dataclass
class EnergyReport:
    """Total and per-part energies.  potential/gradient parts are present
    only when produced by the decomposition."""

    total: float
    horizontal: float
    vertical: float
    term_count: int
    potential_part: Optional[float] = None
    gradient_part: Optional[float] = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "total": self.total,
                "horizontal": self.horizontal,
                "vertical": self.vertical,
                "term_count": self.term_count,
                "potential_part": self.potential_part,
                "gradient_part": self.gradient_part,
            }
        )

    def csv_row(self, params: ModelParams) -> str:
        pot = "" if self.potential_part is None else repr(self.potential_part)
        grad = "" if self.gradient_part is None else repr(self.gradient_part)
        return (
            f"{params.lam!r},{params.delta!r},{params.epsilon!r},"
            f"{self.total!r},{self.horizontal!r},{self.vertical!r},{pot},{grad}"
        )


def _cell_mask(u: SpinField, domain: Domain) -> np.ndarray:
    mask = np.empty((u.ny, u.nx), dtype=bool)
    for j in range(u.ny):
        for i in range(u.nx):
            mask[j, i] = domain.cell_inside(i, j, u.spacing)
    return mask


def energy_E(u: SpinField, domain: Domain, alpha: float) -> float:
    """Reduced lattice energy: ferromagnetic nearest-neighbour rows/columns
    against antiferromagnetic third neighbours,

        -alpha lam^2 sum u.u(+1)  +  lam^2 sum u.u(+2),

    summed over bonds whose cells lie inside the domain.
    """
    lam = u.spacing
    ux, uy = u.vectors()
    c = _cell_mask(u, domain)
    nn = det_sum(
        (ux[:, :-1] * ux[:, 1:] + uy[:, :-1] * uy[:, 1:]) * (c[:, :-1] & c[:, 1:])
    ) + det_sum((ux[:-1, :] * ux[1:, :] + uy[:-1, :] * uy[1:, :]) * (c[:-1, :] & c[1:, :]))
    third = 0.0
    if u.nx >= 3:
        third += det_sum(
            (ux[:, :-2] * ux[:, 2:] + uy[:, :-2] * uy[:, 2:]) * (c[:, :-2] & c[:, 2:])
        )
    if u.ny >= 3:
        third += det_sum(
            (ux[:-2, :] * ux[2:, :] + uy[:-2, :] * uy[2:, :]) * (c[:-2, :] & c[2:, :])
        )
    return -alpha * lam * lam * nn + lam * lam * third


def _stencil_sums(u: SpinField, domain: Domain, params: ModelParams):
    """Horizontal/vertical renormalized summands restricted to the interior
    index set, plus the masks used (shared with the decomposition)."""
    lam = u.spacing
    half_alpha = params.alpha / 2.0
    ux, uy = u.vectors()
    mask = index_mask(domain, lam, u.nx, u.ny)
    s_hor = np.zeros((u.ny, max(u.nx - 2, 0)))
    s_ver = np.zeros((max(u.ny - 2, 0), u.nx))
    if u.nx >= 3:
        hx = ux[:, 2:] - half_alpha * ux[:, 1:-1] + ux[:, :-2]
        hy = uy[:, 2:] - half_alpha * uy[:, 1:-1] + uy[:, :-2]
        s_hor = hx * hx + hy * hy
    if u.ny >= 3:
        vx = ux[2:, :] - half_alpha * ux[1:-1, :] + ux[:-2, :]
        vy = uy[2:, :] - half_alpha * uy[1:-1, :] + uy[:-2, :]
        s_ver = vx * vx + vy * vy
    mask_hor = mask[:, : u.nx - 2] if u.nx >= 3 else np.zeros_like(s_hor, dtype=bool)
    mask_ver = mask[: u.ny - 2, :] if u.ny >= 3 else np.zeros_like(s_ver, dtype=bool)
    return s_hor, mask_hor, s_ver, mask_ver


def energy_H(u: SpinField, domain: Domain, params: ModelParams) -> EnergyReport:
    """Renormalized energy over the interior index set; zero exactly on the
    four helical ground states."""
    lam = u.spacing
    pf = 0.5 * lam * lam / (math.sqrt(2.0) * lam * params.delta ** 1.5)
    s_hor, mask_hor, s_ver, mask_ver = _stencil_sums(u, domain, params)
    hor = pf * det_sum(s_hor * mask_hor)
    ver = pf * det_sum(s_ver * mask_ver)
    count = int(np.count_nonzero(mask_hor)) + int(np.count_nonzero(mask_ver))
    return EnergyReport(total=hor + ver, horizontal=hor, vertical=ver, term_count=count)


def energy_H_1d(
    chain: SpinField, interval: tuple[float, float], params: ModelParams
) -> float:
    """One-dimensional renormalized energy of a single row of spins over an
    interval, with the 1D prefactor 1/(sqrt(2)*lam*delta^(3/2)) * lam/2."""
    if chain.ny != 1:
        raise ValueError("energy_H_1d expects a single-row spin field")
    lam = chain.spacing
    a, b = interval
    if not b > a:
        raise ValueError("empty interval")
    ux, uy = chain.vectors()
    ux, uy = ux[0], uy[0]
    half_alpha = params.alpha / 2.0
    tol = 1e-12 * max(1.0, abs(a), abs(b))
    total = 0.0
    terms = []
    for i in range(chain.nx - 2):
        # both cells [lam i, lam(i+1)] and [lam(i+1), lam(i+2)] inside [a, b]
        if lam * i >= a - tol and lam * (i + 2) <= b + tol:
            hx = ux[i + 2] - half_alpha * ux[i + 1] + ux[i]
            hy = uy[i + 2] - half_alpha * uy[i + 1] + uy[i]
            terms.append(hx * hx + hy * hy)
    if terms:
        total = det_sum(np.array(terms))
    pf = 0.5 * lam / (math.sqrt(2.0) * lam * params.delta ** 1.5)
    return pf * total


_RHO_METHODS = ("definition", "closed_form")
# closed_form is singular where cos((t1+t2)/4) = 0, i.e. the corners
# (pi, pi) and (-pi, -pi)
_RHO_SINGULAR_TOL = 1e-12


def rho(theta1, theta2, method: str = "closed_form"):
    """Correcting factor of the double-well decomposition.

    definition:  [-(1 - cos(t1+t2)) + sin^2 t1 + sin^2 t2]
                 / [2 (sin(t2/2) - sin(t1/2))^2],  with rho(t, t) = 1.
    closed_form: cos^2((t2-t1)/4) * cos(t1+t2) / cos^2((t1+t2)/4).

    Both agree wherever t1 != t2 and the closed form is defined; the closed
    form is the numerically stable one near the diagonal.  Accepts scalars
    or arrays; angles are expected in [-pi, pi].
    """
    if method not in _RHO_METHODS:
        raise ValueError(f"unknown rho method {method!r}")
    t1 = np.asarray(theta1, dtype=float)
    t2 = np.asarray(theta2, dtype=float)
    if np.any(np.abs(t1) > math.pi + 1e-12) or np.any(np.abs(t2) > math.pi + 1e-12):
        raise ValueError("rho expects angles in [-pi, pi]")
    if method == "definition":
        # numerator -(1-cos(t1+t2)) + sin^2 t1 + sin^2 t2 and denominator
        # 2 (sin(t2/2) - sin(t1/2))^2 in factored trigonometric form, which
        # is the same expression without the catastrophic cancellation near
        # the diagonal t1 = t2
        num = 2.0 * np.cos(t1 + t2) * np.sin((t2 - t1) / 2.0) ** 2
        den = 8.0 * np.cos((t1 + t2) / 4.0) ** 2 * np.sin((t2 - t1) / 4.0) ** 2
        # den underflows to 0 only when t2 - t1 is below float resolution;
        # fall back to the diagonal convention there
        diag = (t1 == t2) | (den == 0.0)
        out = np.where(diag, 1.0, num / np.where(diag, 1.0, den))
        return out if out.ndim else float(out)
    den = np.cos((t1 + t2) / 4.0) ** 2
    if np.any(den < _RHO_SINGULAR_TOL):
        raise ValueError("closed_form rho is singular at (pi, pi) and (-pi, -pi)")
    out = np.cos((t2 - t1) / 4.0) ** 2 * np.cos(t1 + t2) / den
    return out if out.ndim else float(out)


def mm_decomposition(u: SpinField, domain: Domain, params: ModelParams) -> EnergyReport:
    """Exact Modica-Mortola split of the renormalized energy.

    The gradient part is accumulated as eps/delta * sum of the rho numerator
    2 cos(t1+t2) sin^2((t2-t1)/2); this equals eps lam^2 sum rho |d w|^2
    identically (the chirality difference cancels against rho's denominator)
    and stays finite at the corner singularities.
    """
    lam = u.spacing
    eps = params.epsilon
    delta = params.delta
    theta, pair = transform(u, params)
    th = theta.theta_hor.values  # (ny, nx-1)
    tv = theta.theta_ver.values  # (ny-1, nx)
    w = pair.w.values
    z = pair.z.values
    mask = index_mask(domain, lam, u.nx, u.ny)

    pot = 0.0
    grad = 0.0
    hor = ver = 0.0
    count = 0
    if u.nx >= 3:
        m = mask[:, : u.nx - 2]
        t1, t2 = th[:, :-1], th[:, 1:]
        p = (0.5 / eps) * lam * lam * (W(w[:, :-1]) + W(w[:, 1:]))
        g = (eps / delta) * (
            2.0 * np.cos(t1 + t2) * np.sin((t2 - t1) / 2.0) ** 2
        )
        ph, gh = det_sum(p * m), det_sum(g * m)
        pot += ph
        grad += gh
        hor = ph + gh
        count += int(np.count_nonzero(m))
    if u.ny >= 3:
        m = mask[: u.ny - 2, :]
        t1, t2 = tv[:-1, :], tv[1:, :]
        p = (0.5 / eps) * lam * lam * (W(z[:-1, :]) + W(z[1:, :]))
        g = (eps / delta) * (
            2.0 * np.cos(t1 + t2) * np.sin((t2 - t1) / 2.0) ** 2
        )
        pv, gv = det_sum(p * m), det_sum(g * m)
        pot += pv
        grad += gv
        ver = pv + gv
        count += int(np.count_nonzero(m))
    return EnergyReport(
        total=pot + grad,
        horizontal=hor,
        vertical=ver,
        term_count=count,
        potential_part=pot,
        gradient_part=grad,
    )


def discrete_mm(g: ScalarGrid, epsilon: float, direction: int = 1) -> float:
    """Diagnostic discrete Modica-Mortola energy of a scalar grid,

        (1/2 eps) lam^2 sum [W(g) + W(g shifted)] + eps lam^2 sum |d_k g|^2,

    summed over all stencils present in the grid (no domain restriction).
    Nonnegative; used as a diagnostic and as the 1D minimization objective.
    """
    if direction not in (1, 2):
        raise ValueError("direction must be 1 or 2")
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    lam = g.spacing
    v = g.values
    if direction == 1:
        if g.nx < 2:
            raise ValueError("grid too small for the stencil")
        a, b = v[:, :-1], v[:, 1:]
    else:
        if g.ny < 2:
            raise ValueError("grid too small for the stencil")
        a, b = v[:-1, :], v[1:, :]
    pot = (0.5 / epsilon) * lam * lam * det_sum(W(a) + W(b))
    grad = epsilon * lam * lam * det_sum(((b - a) / lam) ** 2)
    return pot + grad
