"""Recovery sequences: mollify a continuum potential, discretize it on the
lattice, lift to spins, and sweep the lattice energy against the limit.

The pipeline is

    phi (mesh)  ->  phi_bar (Lipschitz extension to the plane)
                ->  phi^eps(x) = int eta(z) phi_bar(x + a*eps*z) dz
                ->  phi_n(i,j) = phi^eps(lam*i, lam*j)
                ->  psi = arccos(1-delta) * phi_n / lam  ->  u = (cos, sin)(psi)

The mollifier eta is a fixed tensor-product bump; the smoothing scale a*eps
carries a width multiplier a chosen so that the smoothed-step chirality
profile nearly attains the optimal interfacial energy (see WALL_WIDTH
below).  The bond angles of the lifted field satisfy
theta_hor = arccos(1-delta) * d1 phi_n exactly wherever that value stays in
[-pi, pi]; violations are reported as overflows.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .chirality import ChiralityPair, ThetaFields, transform
from .continuum import MeshPotential, classify_triple, jump_set, limit_energy
from .energy import EnergyReport, energy_H
from .lattice import ModelParams, ScalarGrid, SpinField

# Width multiplier a for the smoothing scale a*eps.  The mollified step has
# chirality profile s(t) = 2K(t) - 1 (K the kernel CDF); the wall energy per
# unit length is a*int W(s) + (1/a)*int |s'|^2, minimized at
# a = sqrt(int |s'|^2 / int W(s)).  For the default bump this lands within
# 2.7% of the optimal 8/3.
WALL_WIDTH = 1.9724746408616411

# Diagonal walls see the kernel through the self-convolved profile
# s2 = 2*(K*k) - 1, which is wider; its own optimal multiplier (same formula,
# profile s2) lands within 0.7% of sqrt(2)*8/3.
DIAG_WALL_WIDTH = 1.4527824589214904

_BUMP_CLIP = 1.0 - 1e-12


def _bump(t: np.ndarray) -> np.ndarray:
    """Unnormalized C-infinity bump exp(-1/(1-t^2)) supported on [-1, 1]."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < _BUMP_CLIP
    tt = np.clip(t, -_BUMP_CLIP, _BUMP_CLIP)
    return np.where(inside, np.exp(-1.0 / (1.0 - tt * tt)), 0.0)


@dataclass
class Kernel:
    """Tensor-product mollifier eta(z1, z2) = k(z1) k(z2) built from a 1D
    profile supported on [-1, 1]; each factor is normalized to integral 1
    (within 1e-10 by high-order quadrature)."""

    profile: Callable[[np.ndarray], np.ndarray] = _bump
    norm_order: int = 200
    _norm: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        nodes, wts = np.polynomial.legendre.leggauss(self.norm_order)
        vals = np.asarray(self.profile(nodes), dtype=float)
        self._norm = float((wts * vals).sum())
        if not self._norm > 0.0:
            raise ValueError("kernel profile must have positive integral")

    def k1(self, t: np.ndarray) -> np.ndarray:
        """Normalized 1D factor."""
        return np.asarray(self.profile(t), dtype=float) / self._norm


@dataclass
class SweepSchedule:
    """Sequence of (lam, delta) steps; epsilon = lam/sqrt(2 delta) must be
    strictly decreasing and lam/sqrt(delta) must decrease to honor the
    scaling regime."""

    steps: list[ModelParams]

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("schedule must not be empty")
        eps = [p.epsilon for p in self.steps]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilon must be strictly decreasing along the schedule")
        reg = [p.lam / math.sqrt(p.delta) for p in self.steps]
        if any(b >= a for a, b in zip(reg, reg[1:])):
            raise ValueError("lam/sqrt(delta) must decrease along the schedule")

    @classmethod
    def default(
        cls, finest_n: int = 256, levels: int = 4, size: float = 1.0
    ) -> "SweepSchedule":
        """Halving lattice spacings ending at size/finest_n, with the coupling
        delta = lam^(2/3) (so eps = lam^(2/3)/sqrt(2) -> 0 and
        lam/sqrt(delta) = lam^(2/3) -> 0)."""
        steps = []
        for k in range(levels - 1, -1, -1):
            lam = size / (finest_n // (2 ** k))
            steps.append(ModelParams(lam=lam, delta=lam ** (2.0 / 3.0)))
        return cls(steps=steps)


def extend_potential(m: MeshPotential) -> Callable:
    """Extend the mesh potential to the whole plane, Lipschitz with constant
    at most sqrt(2).

    Each point maps to its nearest point of the closed (rectangular) domain;
    the affine map of the triangle found there is continued outward, so the
    extension is again piecewise affine with gradients in {+-1}^2.  Inside
    the domain the evaluator agrees with the mesh interpolant exactly.
    """
    x0, y0, x1, y1 = m.domain.corners()

    def ext(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        cx = np.clip(x, x0, x1)
        cy = np.clip(y, y0, y1)
        val, gx, gy = _evaluate_with_gradient(m, cx, cy)
        return val + gx * (x - cx) + gy * (y - cy)

    return ext


def _evaluate_with_gradient(m: MeshPotential, x, y):
    """Mesh interpolant value and per-triangle gradient at points inside the
    mesh (vectorized over points)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast(x, y).shape
    px = np.broadcast_to(x, shape).ravel()
    py = np.broadcast_to(y, shape).ravel()
    out = np.zeros(px.shape)
    ogx = np.zeros(px.shape)
    ogy = np.zeros(px.shape)
    filled = np.zeros(px.shape, dtype=bool)
    v = m.vertices
    h = m.heights
    grads = m.gradients()
    tol = 1e-9 * max(1.0, np.abs(v).max())
    for t in range(m.triangles.shape[0]):
        a, b, c = m.triangles[t]
        e1 = v[b] - v[a]
        e2 = v[c] - v[a]
        det = e1[0] * e2[1] - e1[1] * e2[0]
        rx = px - v[a][0]
        ry = py - v[a][1]
        s = (rx * e2[1] - ry * e2[0]) / det
        u = (ry * e1[0] - rx * e1[1]) / det
        inside = (s >= -tol) & (u >= -tol) & (s + u <= 1.0 + tol) & ~filled
        if np.any(inside):
            out[inside] = h[a] + s[inside] * (h[b] - h[a]) + u[inside] * (h[c] - h[a])
            ogx[inside] = grads[t, 0]
            ogy[inside] = grads[t, 1]
            filled[inside] = True
        if np.all(filled):
            break
    if not np.all(filled):
        raise ValueError("evaluation point outside the mesh")
    return out.reshape(shape), ogx.reshape(shape), ogy.reshape(shape)


def mollify(
    ext: Callable, kernel: Kernel, epsilon: float, order: int = 24
) -> Callable:
    """Smooth evaluator phi^eps(x) = int eta(z) phi_bar(x + eps z) dz by
    fixed-order Gauss-Legendre product quadrature on the kernel support
    square (deterministic).  Exact on affine inputs; on kinked piecewise
    affine inputs the quadrature error decays algebraically in the order
    (about 5e-5 at the default order 24)."""
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    nodes, wts = np.polynomial.legendre.leggauss(order)
    kv = kernel.k1(nodes)
    wk = wts * kv
    # renormalize at this order so the discrete rule has total mass exactly
    # 1: affine inputs are then reproduced exactly and the order dependence
    # drops below 1e-8
    wk = wk / wk.sum()

    def phi_eps(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for a in range(order):
            sx = x + epsilon * nodes[a]
            for b in range(order):
                out += (wk[a] * wk[b]) * ext(sx, y + epsilon * nodes[b])
        return out

    return phi_eps


@dataclass
class RecoveryResult:
    spin: SpinField
    theta: ThetaFields
    pair: ChiralityPair
    report: EnergyReport
    phi: ScalarGrid
    overflow_count: int
    overflow_bonds: list[tuple[str, int, int]]


def build_recovery(
    m: MeshPotential,
    params: ModelParams,
    kernel: Optional[Kernel] = None,
    width: float = WALL_WIDTH,
    order: int = 24,
) -> RecoveryResult:
    """Recovery spin field at one (lam, delta) with its chirality pair and
    energy report.

    Bond angles where |arccos(1-delta) * d phi_n| would exceed pi are
    counted and listed as overflows (the lifting identity fails there;
    a nonzero count signals eps too large for the mesh's gradient scale).
    """
    kernel = kernel if kernel is not None else Kernel()
    lam = params.lam
    x0, y0, _, _ = m.domain.corners()
    nx = int(round(m.domain.width / lam))
    ny = int(round(m.domain.height / lam))
    if nx < 3 or ny < 3:
        raise ValueError("lattice too coarse for the domain")
    ext = extend_potential(m)
    phi_eps = mollify(ext, kernel, width * params.epsilon, order=order)
    ii = np.arange(nx)
    jj = np.arange(ny)
    X = x0 + lam * ii[None, :]
    Y = y0 + lam * jj[:, None]
    phi = phi_eps(X + np.zeros((ny, 1)), Y + np.zeros((1, nx)))
    beta = params.helix_angle
    psi = beta * phi / lam
    u = SpinField.from_angles(psi, lam)
    theta, pair = transform(u, params)
    # overflow: discrete derivative of psi leaves [-pi, pi]
    tol = 1e-12
    over: list[tuple[str, int, int]] = []
    dpsi_h = psi[:, 1:] - psi[:, :-1]
    dpsi_v = psi[1:, :] - psi[:-1, :]
    for jjj, iii in zip(*np.nonzero(np.abs(dpsi_h) > math.pi + tol)):
        over.append(("hor", int(iii), int(jjj)))
    for jjj, iii in zip(*np.nonzero(np.abs(dpsi_v) > math.pi + tol)):
        over.append(("ver", int(iii), int(jjj)))
    report = energy_H(u, m.domain, params)
    phi_grid = ScalarGrid.from_values(phi, lam)
    return RecoveryResult(
        spin=u,
        theta=theta,
        pair=pair,
        report=report,
        phi=phi_grid,
        overflow_count=len(over),
        overflow_bonds=over,
    )


SWEEP_CSV_HEADER = (
    "epsilon,lambda,delta,H_n_total,H_n_hor,H_n_ver,H_limit,ratio,overflow_count"
)


@dataclass
class SweepRow:
    params: ModelParams
    h_total: float
    h_hor: float
    h_ver: float
    h_limit: float
    ratio: float
    overflow_count: int
    failed: bool = False
    error: str = ""


@dataclass
class SweepTable:
    rows: list[SweepRow]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(SWEEP_CSV_HEADER + "\n")
        for r in self.rows:
            if r.failed:
                buf.write(
                    f"{r.params.epsilon!r},{r.params.lam!r},{r.params.delta!r},"
                    f"failed,failed,failed,{r.h_limit!r},failed,0\n"
                )
            else:
                buf.write(
                    f"{r.params.epsilon!r},{r.params.lam!r},{r.params.delta!r},"
                    f"{r.h_total!r},{r.h_hor!r},{r.h_ver!r},{r.h_limit!r},"
                    f"{r.ratio!r},{r.overflow_count}\n"
                )
        return buf.getvalue()


def pick_width(m: MeshPotential) -> float:
    """Default smoothing width for a mesh: the diagonal multiplier when every
    wall is diagonal (class J3), the straight-wall multiplier otherwise."""
    segs = jump_set(m)
    if segs and all(
        classify_triple(s.plus, s.minus, s.nu) == "J3" for s in segs
    ):
        return DIAG_WALL_WIDTH
    return WALL_WIDTH


def gamma_sweep(
    m: MeshPotential,
    schedule: SweepSchedule,
    kernel: Optional[Kernel] = None,
    width: Optional[float] = None,
    order: int = 24,
) -> SweepTable:
    """Energy of the recovery field at each schedule step against the limit
    energy; ratio = H_n / H_limit (0 when the limit is 0).  Failed rows are
    marked and the sweep continues."""
    kernel = kernel if kernel is not None else Kernel()
    h_lim = limit_energy(m)
    w = width if width is not None else pick_width(m)
    rows: list[SweepRow] = []
    for params in schedule.steps:
        try:
            res = build_recovery(m, params, kernel=kernel, width=w, order=order)
        except (ValueError, ArithmeticError) as exc:
            rows.append(
                SweepRow(
                    params=params, h_total=math.nan, h_hor=math.nan, h_ver=math.nan,
                    h_limit=h_lim, ratio=math.nan, overflow_count=0,
                    failed=True, error=str(exc),
                )
            )
            continue
        ratio = res.report.total / h_lim if h_lim != 0.0 else 0.0
        rows.append(
            SweepRow(
                params=params,
                h_total=res.report.total,
                h_hor=res.report.horizontal,
                h_ver=res.report.vertical,
                h_limit=h_lim,
                ratio=ratio,
                overflow_count=res.overflow_count,
            )
        )
    return SweepTable(rows=rows)


def optimal_profile_1d(t):
    """Optimal transition profile tanh(t) of the scalar double-well problem."""
    return np.tanh(np.asarray(t, dtype=float)) if np.ndim(t) else math.tanh(t)


def profile_transition_energy(
    a: float = -20.0, b: float = 20.0, order: int = 400
) -> tuple[float, float, float]:
    """(total, potential, gradient) of the optimal profile on [a, b] by
    Gauss-Legendre quadrature; total = 8/3 within 1e-6, the two parts
    equipartition at 4/3 each."""
    nodes, wts = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    scale = 0.5 * (b - a)
    s = np.tanh(t)
    ds = 1.0 - s * s  # derivative of tanh
    pot = scale * float((wts * (1.0 - s * s) ** 2).sum())
    grad = scale * float((wts * ds * ds).sum())
    return pot + grad, pot, grad


@dataclass
class CurlProbe:
    """Smooth compactly supported test function with analytic derivatives,
    xi(x) = exp(-1/(1 - r^2/R^2)) inside the ball of radius R."""

    cx: float
    cy: float
    radius: float

    def _core(self, x, y):
        rx = (np.asarray(x, dtype=float) - self.cx) / self.radius
        ry = (np.asarray(y, dtype=float) - self.cy) / self.radius
        r2 = rx * rx + ry * ry
        inside = r2 < _BUMP_CLIP
        r2c = np.clip(r2, 0.0, _BUMP_CLIP)
        val = np.where(inside, np.exp(-1.0 / (1.0 - r2c)), 0.0)
        d = np.where(inside, -2.0 / (1.0 - r2c) ** 2 * val, 0.0)
        return val, d * rx / self.radius, d * ry / self.radius

    def __call__(self, x, y):
        return self._core(x, y)[0]

    def dx(self, x, y):
        return self._core(x, y)[1]

    def dy(self, x, y):
        return self._core(x, y)[2]


def curl_residual(pair: ChiralityPair, probe: CurlProbe) -> float:
    """Distributional curl of (w, z) against the probe by the midpoint rule:

        <curl(w, z), xi> = -int w d2(xi) + int z d1(xi),

    with each chirality treated as piecewise constant on its bond's cell.
    The probe support must lie inside the rectangle covered by the grids.
    """
    lam = pair.w.spacing
    w = pair.w.values  # (ny, nx-1), cell (i, j)
    z = pair.z.values  # (ny-1, nx)
    nx = z.shape[1]
    ny = w.shape[0]
    if (
        probe.cx - probe.radius < -1e-12
        or probe.cy - probe.radius < -1e-12
        or probe.cx + probe.radius > nx * lam + 1e-12
        or probe.cy + probe.radius > ny * lam + 1e-12
    ):
        raise ValueError("probe support exceeds the grid's covered rectangle")
    xw = lam * (np.arange(w.shape[1]) + 0.5)
    yw = lam * (np.arange(w.shape[0]) + 0.5)
    xz = lam * (np.arange(z.shape[1]) + 0.5)
    yz = lam * (np.arange(z.shape[0]) + 0.5)
    term_w = float((w * probe.dy(xw[None, :], yw[:, None])).sum())
    term_z = float((z * probe.dx(xz[None, :], yz[:, None])).sum())
    return lam * lam * (-term_w + term_z)
