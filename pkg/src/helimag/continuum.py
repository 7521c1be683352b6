"""Admissible continuum chirality fields as piecewise-affine potentials.

A continuum chirality field (w, z) with values in {-1, 1}^2 and zero curl is
represented through a potential phi on a triangulation with per-triangle
gradient (w, z); the curl-free constraint is structural, never a numerical
check.  Jump segments between differently labeled triangles carry the
interfacial energy: density 8/3 on axis walls, sqrt(2)*8/3 on diagonal
walls, and the limit functional is

    H = (4/3) * (|D1 w| + |D2 z|).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Domain

GRAD_TOL = 1e-9  # per-component slack for the {+-1}^2 gradient labels
MERGE_TOL = 1e-9  # collinearity/endpoint tolerance for segment merging

SIGMA_AXIS = 8.0 / 3.0
SIGMA_DIAG = math.sqrt(2.0) * 8.0 / 3.0


class MeshError(ValueError):
    """Raised for invalid meshes; carries the offending triangle indices."""

    def __init__(self, message: str, triangles: list[int]):
        super().__init__(message)
        self.triangles = triangles


@dataclass
class MeshPotential:
    """Continuous piecewise-affine potential on a triangulation of a domain."""

    vertices: np.ndarray  # (N, 2)
    triangles: np.ndarray  # (M, 3) vertex indices
    heights: np.ndarray  # (N,)
    domain: Domain

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=int)
        self.heights = np.asarray(self.heights, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must be (N, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must be (M, 3)")
        if self.heights.shape != (self.vertices.shape[0],):
            raise ValueError("heights must match the vertex count")

    def gradients(self) -> np.ndarray:
        """Per-triangle gradient of the affine interpolant, shape (M, 2)."""
        v = self.vertices
        h = self.heights
        a, b, c = (self.triangles[:, k] for k in range(3))
        e1 = v[b] - v[a]
        e2 = v[c] - v[a]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(np.abs(det) < 1e-15):
            raise MeshError(
                "degenerate triangle(s)",
                [int(t) for t in np.nonzero(np.abs(det) < 1e-15)[0]],
            )
        d1 = h[b] - h[a]
        d2 = h[c] - h[a]
        gx = (d1 * e2[:, 1] - d2 * e1[:, 1]) / det
        gy = (d2 * e1[:, 0] - d1 * e2[:, 0]) / det
        return np.stack([gx, gy], axis=1)

    def evaluate(self, x, y):
        """Evaluate the interpolant at points inside the mesh (vectorized)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        px = np.broadcast_to(x, shape).ravel()
        py = np.broadcast_to(y, shape).ravel()
        out = np.zeros(px.shape)
        filled = np.zeros(px.shape, dtype=bool)
        v = self.vertices
        h = self.heights
        tol = 1e-9 * max(1.0, np.abs(v).max())
        for t in range(self.triangles.shape[0]):
            a, b, c = self.triangles[t]
            ax, ay = v[a]
            e1 = v[b] - v[a]
            e2 = v[c] - v[a]
            det = e1[0] * e2[1] - e1[1] * e2[0]
            rx = px - ax
            ry = py - ay
            s = (rx * e2[1] - ry * e2[0]) / det
            u = (ry * e1[0] - rx * e1[1]) / det
            inside = (s >= -tol) & (u >= -tol) & (s + u <= 1.0 + tol) & ~filled
            if np.any(inside):
                out[inside] = (
                    h[a] + s[inside] * (h[b] - h[a]) + u[inside] * (h[c] - h[a])
                )
                filled[inside] = True
        if not np.all(filled):
            raise ValueError("evaluation point outside the mesh")
        return out.reshape(shape) if shape else float(out[0])

    def to_json(self) -> str:
        d = self.domain
        return json.dumps(
            {
                "vertices": self.vertices.tolist(),
                "triangles": self.triangles.tolist(),
                "heights": self.heights.tolist(),
                "domain": {"x0": d.x0, "y0": d.y0, "width": d.width, "height": d.height},
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MeshPotential":
        doc = json.loads(text)
        dd = doc["domain"]
        return cls(
            vertices=np.array(doc["vertices"], dtype=float),
            triangles=np.array(doc["triangles"], dtype=int),
            heights=np.array(doc["heights"], dtype=float),
            domain=Domain(
                x0=float(dd["x0"]),
                y0=float(dd["y0"]),
                width=float(dd["width"]),
                height=float(dd["height"]),
            ),
        )


@dataclass
class JumpSegment:
    """Interface between two gradient labels; the jump [(w,z)] is parallel
    to the normal nu (rank-one condition for curl-free fields)."""

    p: tuple[float, float]
    q: tuple[float, float]
    nu: tuple[float, float]
    plus: tuple[float, float]
    minus: tuple[float, float]

    @property
    def length(self) -> float:
        return math.hypot(self.q[0] - self.p[0], self.q[1] - self.p[1])


def validate_mesh(m: MeshPotential) -> list[tuple[int, int]]:
    """Check that every triangle gradient lies in {+-1}^2 and that the mesh
    covers the domain; returns the per-triangle (w, z) labels."""
    grads = m.gradients()
    labels = np.round(grads).astype(int)
    bad = np.abs(grads - labels).max(axis=1) > GRAD_TOL
    bad |= np.abs(np.abs(labels)).max(axis=1) != 1
    bad |= np.abs(labels).min(axis=1) != 1
    if np.any(bad):
        idx = [int(t) for t in np.nonzero(bad)[0]]
        raise MeshError(f"gradients off the {{+-1}}^2 lattice on triangles {idx}", idx)
    v = m.vertices
    a, b, c = (m.triangles[:, k] for k in range(3))
    e1 = v[b] - v[a]
    e2 = v[c] - v[a]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]).sum()
    target = m.domain.width * m.domain.height
    if abs(area - target) > 1e-9 * max(1.0, target):
        raise MeshError(
            f"mesh area {area} does not cover the domain area {target}", []
        )
    return [(int(w), int(z)) for w, z in labels]


def _canonical_normal(nu: np.ndarray) -> tuple[np.ndarray, float]:
    """Orient nu to lexicographic-positive; return (nu, sign flip applied)."""
    if nu[0] < -MERGE_TOL or (abs(nu[0]) <= MERGE_TOL and nu[1] < 0.0):
        return -nu, -1.0
    return nu, 1.0


def jump_set(m: MeshPotential) -> list[JumpSegment]:
    """Edges between differently labeled triangles, merged into maximal
    collinear segments with identical trace pairs.

    The normal is canonically oriented (lexicographically positive) and the
    plus trace is the label on the side nu points into; the output is unique
    up to the global (+, -, nu) <-> (-, +, -nu) swap.
    """
    labels = validate_mesh(m)
    v = m.vertices
    edges: dict[tuple[int, int], list[int]] = {}
    for t, (a, b, c) in enumerate(m.triangles):
        for i, j in ((a, b), (b, c), (c, a)):
            key = (min(int(i), int(j)), max(int(i), int(j)))
            edges.setdefault(key, []).append(t)
    raw: list[JumpSegment] = []
    for (i, j), tris in edges.items():
        if len(tris) != 2:
            continue
        t1, t2 = tris
        if labels[t1] == labels[t2]:
            continue
        p = v[i]
        q = v[j]
        tang = q - p
        tang = tang / np.hypot(tang[0], tang[1])
        nu = np.array([tang[1], -tang[0]])
        nu, _ = _canonical_normal(nu)
        mid = 0.5 * (p + q)
        cent1 = v[m.triangles[t1]].mean(axis=0)
        plus_t, minus_t = (t1, t2) if (cent1 - mid) @ nu > 0.0 else (t2, t1)
        raw.append(
            JumpSegment(
                p=(float(p[0]), float(p[1])),
                q=(float(q[0]), float(q[1])),
                nu=(float(nu[0]), float(nu[1])),
                plus=tuple(map(float, labels[plus_t])),
                minus=tuple(map(float, labels[minus_t])),
            )
        )
    return _merge_segments(raw)


def _merge_segments(raw: list[JumpSegment]) -> list[JumpSegment]:
    groups: dict[tuple, list[JumpSegment]] = {}
    for s in raw:
        nu = np.array(s.nu)
        offset = nu @ np.array(s.p)
        key = (
            round(s.nu[0] / MERGE_TOL),
            round(s.nu[1] / MERGE_TOL),
            round(offset / MERGE_TOL),
            s.plus,
            s.minus,
        )
        groups.setdefault(key, []).append(s)
    out: list[JumpSegment] = []
    for key, segs in sorted(groups.items(), key=lambda kv: kv[0][:3]):
        nu = np.array(segs[0].nu)
        tang = np.array([-nu[1], nu[0]])
        ivals = []
        for s in segs:
            ta = float(np.array(s.p) @ tang)
            tb = float(np.array(s.q) @ tang)
            pa, pb = (s.p, s.q) if ta <= tb else (s.q, s.p)
            ivals.append((min(ta, tb), max(ta, tb), pa, pb))
        ivals.sort(key=lambda r: r[0])
        cur = ivals[0]
        for nxt in ivals[1:]:
            if nxt[0] <= cur[1] + MERGE_TOL:
                cur = (cur[0], nxt[1], cur[2], nxt[3])
            else:
                out.append(
                    JumpSegment(p=cur[2], q=cur[3], nu=segs[0].nu,
                                plus=segs[0].plus, minus=segs[0].minus)
                )
                cur = nxt
        out.append(
            JumpSegment(p=cur[2], q=cur[3], nu=segs[0].nu,
                        plus=segs[0].plus, minus=segs[0].minus)
        )
    return out


_PM1 = (-1.0, 1.0)


def _check_triple_inputs(plus, minus, nu) -> tuple:
    pw, pz = float(plus[0]), float(plus[1])
    mw, mz = float(minus[0]), float(minus[1])
    for t in (pw, pz, mw, mz):
        if min(abs(t - 1.0), abs(t + 1.0)) > GRAD_TOL:
            raise ValueError("traces must take values in {+-1}^2")
    nx, ny = float(nu[0]), float(nu[1])
    if abs(math.hypot(nx, ny) - 1.0) > GRAD_TOL:
        raise ValueError("nu must be a unit vector")
    return pw, pz, mw, mz, nx, ny


def classify_triple(plus, minus, nu) -> str:
    """Classify a jump triple: J1 (only w jumps, axis normal), J2 (only z
    jumps), J3 (both jump, diagonal normal), or inadmissible.

    Admissibility is the rank-one condition [(w,z)] parallel to nu; exactly
    twelve triples (up to the orientation swap) pass it.
    """
    pw, pz, mw, mz, nx, ny = _check_triple_inputs(plus, minus, nu)
    dw = pw - mw
    dz = pz - mz
    if abs(dw) < GRAD_TOL and abs(dz) < GRAD_TOL:
        return "inadmissible"
    if abs(dw * ny - dz * nx) > GRAD_TOL:
        return "inadmissible"
    if abs(dz) < GRAD_TOL:
        return "J1"
    if abs(dw) < GRAD_TOL:
        return "J2"
    return "J3"


def sigma(plus, minus, nu) -> float:
    """Interfacial energy density (4/3)(|[w]| |nu1| + |[z]| |nu2|) per unit
    length: 8/3 on axis walls, sqrt(2)*8/3 on diagonal walls."""
    cls = classify_triple(plus, minus, nu)
    if cls == "inadmissible":
        raise ValueError("sigma is defined on admissible jump triples only")
    dw = abs(float(plus[0]) - float(minus[0]))
    dz = abs(float(plus[1]) - float(minus[1]))
    return (4.0 / 3.0) * (dw * abs(float(nu[0])) + dz * abs(float(nu[1])))


def total_variations(m: MeshPotential) -> tuple[float, float, float, float]:
    """(|D1 w|, |D2 w|, |D1 z|, |D2 z|) over the domain, from the jump set."""
    d1w = d2w = d1z = d2z = 0.0
    for s in jump_set(m):
        dw = abs(s.plus[0] - s.minus[0])
        dz = abs(s.plus[1] - s.minus[1])
        ln = s.length
        d1w += dw * abs(s.nu[0]) * ln
        d2w += dw * abs(s.nu[1]) * ln
        d1z += dz * abs(s.nu[0]) * ln
        d2z += dz * abs(s.nu[1]) * ln
    return d1w, d2w, d1z, d2z


def limit_energy(m: MeshPotential) -> float:
    """Limit functional H = (4/3)(|D1 w| + |D2 z|), cross-checked against the
    per-segment surface density sum."""
    d1w, _, _, d2z = total_variations(m)
    via_tv = (4.0 / 3.0) * (d1w + d2z)
    via_sigma = sum(sigma(s.plus, s.minus, s.nu) * s.length for s in jump_set(m))
    if abs(via_tv - via_sigma) > 1e-12 * max(1.0, abs(via_tv)):
        raise AssertionError(
            f"limit energy mismatch: {via_tv} (total variation) vs {via_sigma} (sigma)"
        )
    return via_tv


_EXAMPLE_KINDS = (
    "vertical_wall",
    "horizontal_wall",
    "diagonal_wall",
    "four_quadrant",
    "laminate",
)


def _snap(x: float, snap: int) -> float:
    return round(x * snap) / snap


def _grid_mesh(xs, ys, f, domain: Domain) -> MeshPotential:
    """Tensor grid of breakpoints, each rectangle split along its
    anti-diagonal; heights sampled from f."""
    xs = list(xs)
    ys = list(ys)
    nxv = len(xs)
    verts = [(x, y) for y in ys for x in xs]
    tris = []
    for j in range(len(ys) - 1):
        for i in range(nxv - 1):
            v00 = j * nxv + i
            v10 = v00 + 1
            v01 = v00 + nxv
            v11 = v01 + 1
            tris.append((v00, v10, v01))
            tris.append((v10, v11, v01))
    heights = [f(x, y) for (x, y) in verts]
    return MeshPotential(
        vertices=np.array(verts, dtype=float),
        triangles=np.array(tris, dtype=int),
        heights=np.array(heights, dtype=float),
        domain=domain,
    )


def build_example(
    kind: str, domain: Domain | None = None, n: int = 3, snap: int = 2 ** 20
) -> MeshPotential:
    """Named jump geometries on a rectangle.

    vertical_wall / horizontal_wall: one axis wall through the center.
    diagonal_wall: the anti-diagonal wall x + y = const through the center
    (square domains only; the wall is the full diagonal chord).
    four_quadrant: a J1 wall and a J2 wall crossing at the center.
    laminate: n parallel vertical walls at equal spacing.

    Breakpoint coordinates snap to the rational grid 1/snap so that the
    +-1 gradients are exact in floating point.
    """
    if kind not in _EXAMPLE_KINDS:
        raise ValueError(f"unknown example kind {kind!r}")
    d = domain if domain is not None else Domain()
    x0, y0, x1, y1 = d.corners()
    if kind == "vertical_wall":
        c = _snap(0.5 * (x0 + x1), snap)
        return _grid_mesh([x0, c, x1], [y0, y1], lambda x, y: y + abs(x - c), d)
    if kind == "horizontal_wall":
        c = _snap(0.5 * (y0 + y1), snap)
        return _grid_mesh([x0, x1], [y0, c, y1], lambda x, y: x + abs(y - c), d)
    if kind == "diagonal_wall":
        if abs(d.width - d.height) > 1e-12 * max(1.0, d.width):
            raise ValueError("diagonal_wall needs a square domain")
        c = x0 + y1  # level x + y = c is the anti-diagonal of the square
        verts = np.array([(x0, y0), (x1, y0), (x0, y1), (x1, y1)], dtype=float)
        tris = np.array([(0, 1, 2), (1, 3, 2)], dtype=int)
        heights = np.abs(verts[:, 0] + verts[:, 1] - c)
        return MeshPotential(vertices=verts, triangles=tris, heights=heights, domain=d)
    if kind == "four_quadrant":
        cx = _snap(0.5 * (x0 + x1), snap)
        cy = _snap(0.5 * (y0 + y1), snap)
        return _grid_mesh(
            [x0, cx, x1], [y0, cy, y1], lambda x, y: abs(x - cx) + abs(y - cy), d
        )
    # laminate
    if n < 1:
        raise ValueError("laminate needs n >= 1 walls")
    xs = [_snap(x0 + k * d.width / (n + 1), snap) for k in range(n + 2)]
    xs[0], xs[-1] = x0, x1
    # triangle-wave heights: slope alternates between the n+1 strips
    hts = {xs[0]: 0.0}
    for k in range(n + 1):
        hts[xs[k + 1]] = hts[xs[k]] + (-1.0) ** k * (xs[k + 1] - xs[k])

    def f(x, y):
        return y + hts[x]

    return _grid_mesh(xs, [y0, y1], f, d)


_LABEL_COLORS = {
    (1, 1): "#4477aa",
    (1, -1): "#ee6677",
    (-1, 1): "#228833",
    (-1, -1): "#ccbb44",
}


def mesh_to_svg(m: MeshPotential) -> str:
    """SVG of the labeled triangles (four-color scheme, one color per
    chirality pair) with the jump segments overlaid."""
    labels = validate_mesh(m)
    x0, y0, x1, y1 = m.domain.corners()
    scale = 400.0 / max(x1 - x0, y1 - y0)

    def pt(x, y):
        return (x - x0) * scale, (y1 - y) * scale  # flip y for screen coords

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{(x1 - x0) * scale:.0f}" height="{(y1 - y0) * scale:.0f}">'
    ]
    for t, (a, b, c) in enumerate(m.triangles):
        pts = " ".join(
            f"{px:.3f},{py:.3f}" for px, py in (pt(*m.vertices[k]) for k in (a, b, c))
        )
        color = _LABEL_COLORS[labels[t]]
        parts.append(f'<polygon points="{pts}" fill="{color}" stroke="none"/>')
    for s in jump_set(m):
        (px, py), (qx, qy) = pt(*s.p), pt(*s.q)
        parts.append(
            f'<line x1="{px:.3f}" y1="{py:.3f}" x2="{qx:.3f}" y2="{qy:.3f}" '
            f'stroke="black" stroke-width="2"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
