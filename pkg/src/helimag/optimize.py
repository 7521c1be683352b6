"""Minimization of the renormalized lattice energy over spin angles under
chirality boundary conditions.

The optimization variable is the angle lifting psi, which makes the energy
smooth and unconstrained.  Boundary data freezes border layers two sites
deep (the three-point stencil needs two determined neighbors), encoding a
chirality pair per side through helical angle sequences.  A brute-force
enumeration over small chains serves as an oracle.
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .energy import EnergyReport, energy_H, energy_H_1d
from .lattice import Domain, ModelParams, SpinField, det_sum, index_mask

LOG_CSV_HEADER = "iter,energy,grad_norm,step"


@dataclass
class BoundaryCondition:
    """Frozen-site mask with prescribed angles; unfrozen entries of
    ``values`` are ignored."""

    mask: np.ndarray  # (ny, nx) bool, True = frozen
    values: np.ndarray  # (ny, nx) angles

    def __post_init__(self) -> None:
        self.mask = np.asarray(self.mask, dtype=bool)
        self.values = np.asarray(self.values, dtype=float)
        if self.mask.shape != self.values.shape:
            raise ValueError("mask and values must have matching shapes")

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = np.array(psi, dtype=float, copy=True)
        out[self.mask] = self.values[self.mask]
        return out


def chain_bc(n: int, params: ModelParams, left: int, right: int) -> BoundaryCondition:
    """Two frozen sites at each end of an n-site chain, following helices of
    chirality ``left`` and ``right`` (each +-1)."""
    if n < 5:
        raise ValueError("chain needs at least 5 sites for two free layers")
    if left not in (-1, 1) or right not in (-1, 1):
        raise ValueError("chiralities must be +-1")
    beta = params.helix_angle
    mask = np.zeros((1, n), dtype=bool)
    values = np.zeros((1, n))
    mask[0, :2] = True
    mask[0, -2:] = True
    values[0, 0] = 0.0
    values[0, 1] = left * beta
    # anchor the right helix so equal chiralities give one global helix and
    # opposite chiralities center the transition
    anchor = 0.5 * (left + right) * beta * (n - 1)
    values[0, n - 2] = anchor - right * beta
    values[0, n - 1] = anchor
    return BoundaryCondition(mask=mask, values=values)


def two_sided_bc(
    nx: int,
    ny: int,
    params: ModelParams,
    left_pair: tuple[int, int],
    right_pair: tuple[int, int],
) -> BoundaryCondition:
    """Freeze the left and right border layers (two columns deep) with the
    helical angles of the given chirality pairs; the vertical chirality of
    each side also fixes the angles along the frozen columns."""
    beta = params.helix_angle
    mask = np.zeros((ny, nx), dtype=bool)
    values = np.zeros((ny, nx))
    jj = np.arange(ny)[:, None]
    ii = np.arange(nx)[None, :]
    wl, zl = left_pair
    wr, zr = right_pair
    left_vals = beta * (wl * ii + zl * jj)
    anchor = 0.5 * (wl + wr) * beta * (nx - 1)
    right_vals = beta * (wr * (ii - (nx - 1)) + zr * jj) + anchor
    mask[:, :2] = True
    mask[:, -2:] = True
    values[:, :2] = left_vals[:, :2]
    values[:, -2:] = right_vals[:, -2:]
    return BoundaryCondition(mask=mask, values=values)


@dataclass
class MinimizeOptions:
    max_iter: int = 20000
    grad_tol: float = 1e-8  # max-norm of the gradient
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    init_step: float = 1.0
    anneal_steps: int = 0  # optional annealing pre-pass, off by default
    anneal_temp: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.grad_tol <= 0 or self.armijo <= 0 or not (0 < self.backtrack < 1):
            raise ValueError("tolerances must be positive, backtrack in (0, 1)")


def _objective(psi: np.ndarray, domain: Domain, params: ModelParams, lam: float):
    u = SpinField.from_angles(psi, lam)
    if psi.shape[0] == 1:
        return energy_H_1d(u, (domain.x0, domain.x0 + domain.width), params)
    return energy_H(u, domain, params).total


def energy_gradient(
    psi: np.ndarray,
    domain: Domain,
    params: ModelParams,
    bc: Optional[BoundaryCondition],
    lam: float,
) -> np.ndarray:
    """Analytic gradient of the renormalized energy with respect to the site
    angles; zero at frozen sites.  Single-row grids use the 1D energy."""
    psi = np.asarray(psi, dtype=float)
    ny, nx = psi.shape
    if bc is not None and bc.mask.shape != psi.shape:
        raise ValueError("boundary condition shape mismatch")
    half_alpha = params.alpha / 2.0
    cosp = np.cos(psi)
    sinp = np.sin(psi)
    g = np.zeros_like(psi)
    one_d = ny == 1
    if one_d:
        pf = 0.5 * lam / (math.sqrt(2.0) * lam * params.delta ** 1.5)
        x0 = domain.x0
        tol = 1e-12 * max(1.0, abs(x0) + domain.width)
        keep = np.zeros(nx - 2, dtype=bool)
        for i in range(nx - 2):
            keep[i] = (
                lam * i >= x0 - tol and lam * (i + 2) <= x0 + domain.width + tol
            )
        mask_hor = keep[None, :]
    else:
        pf = 0.5 * lam * lam / (math.sqrt(2.0) * lam * params.delta ** 1.5)
        mask = index_mask(domain, lam, nx, ny)
        mask_hor = mask[:, : nx - 2] if nx >= 3 else None
        mask_ver = mask[: ny - 2, :] if ny >= 3 else None
    if nx >= 3:
        hx = (cosp[:, 2:] - half_alpha * cosp[:, 1:-1] + cosp[:, :-2]) * mask_hor
        hy = (sinp[:, 2:] - half_alpha * sinp[:, 1:-1] + sinp[:, :-2]) * mask_hor
        # d|v|^2/dpsi_k = 2 v . u_perp(k) * coefficient of u_k in v
        g[:, :-2] += 2.0 * (-hx * sinp[:, :-2] + hy * cosp[:, :-2])
        g[:, 1:-1] += -params.alpha * (-hx * sinp[:, 1:-1] + hy * cosp[:, 1:-1])
        g[:, 2:] += 2.0 * (-hx * sinp[:, 2:] + hy * cosp[:, 2:])
    if not one_d and ny >= 3:
        vx = (cosp[2:, :] - half_alpha * cosp[1:-1, :] + cosp[:-2, :]) * mask_ver
        vy = (sinp[2:, :] - half_alpha * sinp[1:-1, :] + sinp[:-2, :]) * mask_ver
        g[:-2, :] += 2.0 * (-vx * sinp[:-2, :] + vy * cosp[:-2, :])
        g[1:-1, :] += -params.alpha * (-vx * sinp[1:-1, :] + vy * cosp[1:-1, :])
        g[2:, :] += 2.0 * (-vx * sinp[2:, :] + vy * cosp[2:, :])
    g *= pf
    if bc is not None:
        g[bc.mask] = 0.0
    return g


@dataclass
class MinimizeResult:
    psi: np.ndarray
    report: EnergyReport
    log: list[tuple[int, float, float, float]]
    converged: bool
    stalled: bool


def log_to_csv(log: list[tuple[int, float, float, float]]) -> str:
    buf = io.StringIO()
    buf.write(LOG_CSV_HEADER + "\n")
    for it, e, gn, st in log:
        buf.write(f"{it},{e!r},{gn!r},{st!r}\n")
    return buf.getvalue()


def _anneal(
    psi: np.ndarray,
    domain: Domain,
    params: ModelParams,
    bc: BoundaryCondition,
    lam: float,
    opts: MinimizeOptions,
) -> np.ndarray:
    """Optional Metropolis pre-pass with a linearly cooling temperature and a
    deterministic seed."""
    rng = np.random.default_rng(opts.seed)
    psi = psi.copy()
    free = np.argwhere(~bc.mask)
    e = _objective(psi, domain, params, lam)
    for step in range(opts.anneal_steps):
        temp = opts.anneal_temp * (1.0 - step / max(opts.anneal_steps, 1)) + 1e-12
        j, i = free[rng.integers(len(free))]
        old = psi[j, i]
        psi[j, i] = old + rng.normal(0.0, 0.5)
        e_new = _objective(psi, domain, params, lam)
        if e_new <= e or rng.random() < math.exp(-(e_new - e) / temp):
            e = e_new
        else:
            psi[j, i] = old
    return psi


def minimize_H(
    psi0: np.ndarray,
    domain: Domain,
    params: ModelParams,
    bc: BoundaryCondition,
    opts: Optional[MinimizeOptions] = None,
) -> MinimizeResult:
    """Backtracking gradient descent on the renormalized energy.

    Every accepted step strictly decreases the energy; terminates at the
    gradient tolerance or the iteration cap.  A line search that fails after
    max_backtracks reductions returns the best iterate with ``stalled`` set.
    """
    opts = opts if opts is not None else MinimizeOptions()
    psi = bc.apply(np.asarray(psi0, dtype=float))
    lam = params.lam
    if opts.anneal_steps > 0:
        psi = _anneal(psi, domain, params, bc, lam, opts)
    e = _objective(psi, domain, params, lam)
    step = opts.init_step
    log: list[tuple[int, float, float, float]] = []
    converged = False
    stalled = False
    for it in range(opts.max_iter):
        g = energy_gradient(psi, domain, params, bc, lam)
        gnorm = float(np.abs(g).max())
        log.append((it, e, gnorm, step))
        if gnorm <= opts.grad_tol:
            converged = True
            break
        gsq = float(det_sum(g * g))
        step = min(step * 2.0, 1e6)  # optimistic growth, then backtrack
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = psi - step * g
            e_trial = _objective(trial, domain, params, lam)
            if e_trial <= e - opts.armijo * step * gsq:
                psi, e = trial, e_trial
                accepted = True
                break
            step *= opts.backtrack
        if not accepted:
            stalled = True
            break
    u = SpinField.from_angles(psi, lam)
    if psi.shape[0] == 1:
        total = energy_H_1d(u, (domain.x0, domain.x0 + domain.width), params)
        report = EnergyReport(
            total=total, horizontal=total, vertical=0.0, term_count=psi.shape[1] - 2
        )
    else:
        report = energy_H(u, domain, params)
    return MinimizeResult(psi=psi, report=report, log=log, converged=converged, stalled=stalled)


def linear_init(bc: BoundaryCondition) -> np.ndarray:
    """Default initialization: per-row linear interpolation of the boundary
    lifting between the innermost frozen columns."""
    ny, nx = bc.mask.shape
    psi = np.array(bc.values, dtype=float, copy=True)
    for j in range(ny):
        frozen = np.nonzero(bc.mask[j])[0]
        if len(frozen) == 0:
            continue
        left = frozen[frozen < nx // 2]
        right = frozen[frozen >= nx // 2]
        if len(left) == 0 or len(right) == 0:
            continue
        a, b = left.max(), right.min()
        if b > a + 1:
            t = np.arange(a, b + 1) - a
            psi[j, a : b + 1] = psi[j, a] + (psi[j, b] - psi[j, a]) * t / (b - a)
    return psi


def profile_init(
    n: int, params: ModelParams, left: int, right: int
) -> np.ndarray:
    """Chain initialization from the optimal transition profile: chirality
    w(x) interpolating ``left`` to ``right`` through tanh(x/eps), integrated
    to angles, with a linear correction so both frozen ends are met."""
    lam = params.lam
    eps = params.epsilon
    beta = params.helix_angle
    x = lam * (np.arange(n - 1) + 0.5)
    c = 0.5 * lam * (n - 1)
    w = 0.5 * (left + right) - 0.5 * (left - right) * np.tanh((x - c) / eps)
    theta = 2.0 * np.arcsin(np.clip(math.sqrt(params.delta / 2.0) * w, -1.0, 1.0))
    psi = np.concatenate([[0.0], np.cumsum(theta)])
    # meet the right frozen anchor up to a spread-out slope fix
    target = 0.5 * (left + right) * beta * (n - 1) - right * beta
    err = target - psi[n - 2]
    psi += err * np.arange(n) / (n - 2)
    return psi[None, :]


def brute_force_1d(
    n_sites: int,
    m: int,
    params: ModelParams,
    bc: BoundaryCondition,
) -> tuple[float, np.ndarray, float]:
    """Exhaustive minimum of the 1D energy over an m-point angle grid per
    free site.

    Returns (minimum, argmin angle row, slack) where slack is the energy
    variation over the surrounding grid cell at the argmin.  Budget-limited
    to m**n_free <= 1e8 enumerations.
    """
    if bc.mask.shape != (1, n_sites):
        raise ValueError("boundary condition must cover a single chain row")
    free_idx = np.nonzero(~bc.mask[0])[0]
    n_free = len(free_idx)
    if n_free > 7:
        raise ValueError("brute force supports at most 7 free sites")
    if m ** max(n_free, 1) > 1e8:
        raise ValueError("enumeration budget exceeded")
    lam = params.lam
    domain = Domain(width=n_sites * lam, height=lam)
    base = bc.values[0].copy()
    if n_free == 0:
        u = SpinField.from_angles(base[None, :], lam)
        e = energy_H_1d(u, (0.0, n_sites * lam), params)
        return e, base, 0.0
    grid = -math.pi + 2.0 * math.pi * np.arange(m) / m
    combos = np.stack(
        np.meshgrid(*([grid] * n_free), indexing="ij"), axis=-1
    ).reshape(-1, n_free)
    psis = np.broadcast_to(base, (combos.shape[0], n_sites)).copy()
    psis[:, free_idx] = combos
    energies = _chain_energies(psis, params, lam, n_sites)
    k = int(np.argmin(energies))
    best = psis[k].copy()
    e_min = float(energies[k])
    # slack: variation over the surrounding grid cell
    h = 2.0 * math.pi / m
    neigh = []
    for offs in itertools.product((-h, 0.0, h), repeat=n_free):
        if all(o == 0.0 for o in offs):
            continue
        p = best.copy()
        p[free_idx] += np.array(offs)
        neigh.append(p)
    e_neigh = _chain_energies(np.array(neigh), params, lam, n_sites)
    slack = float(e_neigh.max() - e_min)
    return e_min, best, slack


def _chain_energies(
    psis: np.ndarray, params: ModelParams, lam: float, n_sites: int
) -> np.ndarray:
    """Vectorized 1D energies of many chains at once (all interior stencils)."""
    cosp = np.cos(psis)
    sinp = np.sin(psis)
    half_alpha = params.alpha / 2.0
    hx = cosp[:, 2:] - half_alpha * cosp[:, 1:-1] + cosp[:, :-2]
    hy = sinp[:, 2:] - half_alpha * sinp[:, 1:-1] + sinp[:, :-2]
    pf = 0.5 * lam / (math.sqrt(2.0) * lam * params.delta ** 1.5)
    return pf * (hx * hx + hy * hy).sum(axis=1)
