"""Least-singular-value fields, pseudospectral contours and areas."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .matrix_core import as_cmatrix, eig
from .regions import Disk, Rect, Region

#: nodes per batched SVD call; fixed so results do not depend on worker count
CHUNK = 4096
DEFAULT_MEMORY_BUDGET = 1 << 30


class GridTooLargeError(MemoryError):
    pass


def _smin_batch(a: np.ndarray, z: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    shifted = np.empty((len(z), n, n), dtype=np.complex128)
    shifted[:] = -a
    idx = np.arange(n)
    shifted[:, idx, idx] += z[:, None]
    return np.linalg.svd(shifted, compute_uv=False)[:, -1]


def smin_at(m, z, workers: int | None = None) -> np.ndarray:
    """``sigma_min(z I - M)`` for every point of the array ``z``."""
    a = as_cmatrix(m)
    z = np.asarray(z, dtype=np.complex128)
    flat = z.ravel()
    chunks = [flat[k : k + CHUNK] for k in range(0, len(flat), CHUNK)]
    if workers and workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _smin_batch(a, c), chunks))
    else:
        parts = [_smin_batch(a, c) for c in chunks]
    out = np.concatenate(parts) if parts else np.empty(0)
    return out.reshape(z.shape)


@dataclass(frozen=True)
class SminField:
    z0: complex
    z1: complex
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # shape (nx, ny); values[i, j] at xs[i] + 1j * ys[j]

    @property
    def nx(self) -> int:
        return len(self.xs)

    @property
    def ny(self) -> int:
        return len(self.ys)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["z_re", "z_im", "smin"])
        for i, x in enumerate(self.xs):
            for j, y in enumerate(self.ys):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(self.values[i, j]))])
        return buf.getvalue()


def smin_field(
    m,
    region,
    nx: int,
    ny: int,
    workers: int | None = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> SminField:
    """Evaluate ``sigma_min(zI - M)`` on a uniform ``nx`` by ``ny`` grid.

    ``region`` is a :class:`Rect` or a pair of corners ``(z0, z1)``; the grid
    includes both corners.
    """
    if nx < 2 or ny < 2:
        raise ValueError("nx and ny must be at least 2")
    if isinstance(region, Rect):
        z0, z1 = region.z0, region.z1
    else:
        z0, z1 = map(complex, region)
    if z0.real == z1.real or z0.imag == z1.imag:
        raise ValueError("degenerate region")
    a = as_cmatrix(m)
    n = a.shape[0]
    need = nx * ny * 8 + min(nx * ny, CHUNK) * n * n * 16 * max(1, workers or 1)
    if need > memory_budget:
        raise GridTooLargeError(f"grid {nx}x{ny} for n={n} needs ~{need} bytes > budget {memory_budget}")
    xs = np.linspace(z0.real, z1.real, nx)
    ys = np.linspace(z0.imag, z1.imag, ny)
    z = xs[:, None] + 1j * ys[None, :]
    return SminField(z0=z0, z1=z1, xs=xs, ys=ys, values=smin_at(a, z, workers))


# ---------------------------------------------------------------------------
# contours


@dataclass
class ContourSet:
    levels: list[float]
    polylines: list[list[np.ndarray]] = field(default_factory=list)  # per level, arrays (k, 2)

    def is_closed(self, level_index: int, k: int) -> bool:
        p = self.polylines[level_index][k]
        return len(p) > 2 and np.allclose(p[0], p[-1])

    def to_json(self) -> str:
        return json.dumps(
            {
                "levels": [float(e) for e in self.levels],
                "polylines": [[p.tolist() for p in per] for per in self.polylines],
            }
        )


# edges of a cell: 0 bottom (i,j)-(i+1,j), 1 right (i+1,j)-(i+1,j+1),
# 2 top (i,j+1)-(i+1,j+1), 3 left (i,j)-(i,j+1)
_SEGMENTS = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 6: [(0, 2)], 7: [(3, 2)],
    8: [(2, 3)], 9: [(2, 0)], 11: [(2, 1)], 12: [(1, 3)], 13: [(1, 0)], 14: [(0, 3)],
}


def _marching_squares(xs, ys, f, level):
    """Segments of the level set ``f == level`` with linear interpolation.

    Returns a list of segments, each a pair of hashable edge keys and a dict
    mapping edge keys to interpolated points.
    """
    inside = f < level
    points = {}

    def edge_point(key):
        if key in points:
            return
        kind, i, j = key
        if kind == "h":  # (i,j)-(i+1,j)
            fa, fb = f[i, j], f[i + 1, j]
            s = (level - fa) / (fb - fa)
            points[key] = (xs[i] + s * (xs[i + 1] - xs[i]), ys[j])
        else:  # (i,j)-(i,j+1)
            fa, fb = f[i, j], f[i, j + 1]
            s = (level - fa) / (fb - fa)
            points[key] = (xs[i], ys[j] + s * (ys[j + 1] - ys[j]))

    def key_for(edge, i, j):
        return {0: ("h", i, j), 1: ("v", i + 1, j), 2: ("h", i, j + 1), 3: ("v", i, j)}[edge]

    code = (
        inside[:-1, :-1].astype(np.uint8)
        | (inside[1:, :-1].astype(np.uint8) << 1)
        | (inside[1:, 1:].astype(np.uint8) << 2)
        | (inside[:-1, 1:].astype(np.uint8) << 3)
    )
    segments = []
    for i, j in zip(*np.nonzero((code != 0) & (code != 15))):
        c = int(code[i, j])
        if c in (5, 10):
            center = 0.25 * (f[i, j] + f[i + 1, j] + f[i + 1, j + 1] + f[i, j + 1])
            center_in = center < level
            if c == 5:
                pairs = [(3, 2), (1, 0)] if center_in else [(3, 0), (1, 2)]
            else:
                pairs = [(0, 3), (2, 1)] if center_in else [(0, 1), (2, 3)]
        else:
            pairs = _SEGMENTS[c]
        for ea, eb in pairs:
            ka, kb = key_for(ea, i, j), key_for(eb, i, j)
            edge_point(ka)
            edge_point(kb)
            segments.append((ka, kb))
    return segments, points


def _stitch(segments, points):
    adj: dict = {}
    for a, b in segments:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    used = set()
    lines = []

    def walk(start):
        path = [start]
        prev, cur = None, start
        while True:
            nxt = None
            for cand in adj[cur]:
                seg = frozenset((cur, cand))
                if seg not in used:
                    used.add(seg)
                    nxt = cand
                    break
            if nxt is None:
                return path
            path.append(nxt)
            prev, cur = cur, nxt
            if cur == start:
                return path

    # open chains start at degree-1 keys (on the region boundary)
    for key in sorted(k for k, v in adj.items() if len(v) == 1):
        if any(frozenset((key, c)) not in used for c in adj[key]):
            lines.append(walk(key))
    for key in sorted(adj):
        if any(frozenset((key, c)) not in used for c in adj[key]):
            lines.append(walk(key))
    return [np.array([points[k] for k in line]) for line in lines]


def contours(fld: SminField, levels) -> ContourSet:
    """Level sets ``sigma_min = eps`` by marching squares.

    Polylines are closed (first point repeated at the end) when the level
    set closes inside the grid.
    """
    levels = [float(e) for e in levels]
    if any(e <= 0 for e in levels):
        raise ValueError("levels must be positive")
    out = ContourSet(levels=levels)
    for eps in levels:
        segments, points = _marching_squares(fld.xs, fld.ys, fld.values, eps)
        out.polylines.append(_stitch(segments, points) if segments else [])
    return out


def polygon_area(p: np.ndarray) -> float:
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def contours_svg(cs: ContourSet, fld: SminField, eigenvalues=None, size: int = 480) -> str:
    """Minimal SVG plot: frame, axes, one path per level, spectrum as dots."""
    x0, x1 = fld.xs[0], fld.xs[-1]
    y0, y1 = fld.ys[0], fld.ys[-1]
    pad = 40

    def px(x, y):
        u = pad + (x - x0) / (x1 - x0) * (size - 2 * pad)
        v = size - pad - (y - y0) / (y1 - y0) * (size - 2 * pad)
        return f"{u:.3f},{v:.3f}"

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="{pad}" y="{pad}" width="{size - 2 * pad}" height="{size - 2 * pad}" '
        'fill="none" stroke="black"/>',
        f'<text x="{pad}" y="{size - 10}" font-size="11">re [{x0:.3g}, {x1:.3g}]</text>',
        f'<text x="5" y="{pad - 10}" font-size="11">im [{y0:.3g}, {y1:.3g}]</text>',
    ]
    if x0 < 0 < x1:
        parts.append(f'<line x1="{px(0, y0).split(",")[0]}" y1="{pad}" '
                     f'x2="{px(0, y0).split(",")[0]}" y2="{size - pad}" stroke="#bbb"/>')
    if y0 < 0 < y1:
        parts.append(f'<line x1="{pad}" y1="{px(x0, 0).split(",")[1]}" '
                     f'x2="{size - pad}" y2="{px(x0, 0).split(",")[1]}" stroke="#bbb"/>')
    for k, (eps, lines) in enumerate(zip(cs.levels, cs.polylines)):
        color = colors[k % len(colors)]
        d = " ".join("M " + " L ".join(px(x, y) for x, y in line) for line in lines if len(line))
        parts.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.2">'
                     f"<title>eps={eps:.3g}</title></path>")
    if eigenvalues is not None:
        for lam in eigenvalues:
            if x0 <= lam.real <= x1 and y0 <= lam.imag <= y1:
                u, v = px(lam.real, lam.imag).split(",")
                parts.append(f'<circle cx="{u}" cy="{v}" r="2" fill="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# area


def _block_may_meet(region: Region, c: np.ndarray, r: float) -> np.ndarray:
    if isinstance(region, Disk):
        return np.abs(c - region.center) < region.radius + r
    lo_re, hi_re, lo_im, hi_im = region.bounding_box()
    return (c.real + r > lo_re) & (c.real - r < hi_re) & (c.imag + r > lo_im) & (c.imag - r < hi_im)


def pseudospectrum_area(m, eps: float, region: Region, resolution: int = 64,
                        workers: int | None = None) -> float:
    """Grid estimate of ``vol{z in region : sigma_min(zI - M) < eps}``.

    The plane is tiled by square cells of side ``eps / resolution`` on a
    lattice anchored at the origin; a cell counts when its center lies in
    ``region`` and in the pseudospectrum. Since ``sigma_min(zI - M)`` is
    1-Lipschitz in ``z``, blocks of cells far from the level set are accepted
    or rejected wholesale, giving the same count as evaluating every cell.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    a = as_cmatrix(m)
    if region.area == 0:
        return 0.0
    h = eps / resolution
    lo_re, hi_re, lo_im, hi_im = region.bounding_box()
    i0, i1 = math.floor(lo_re / h), math.ceil(hi_re / h)
    j0, j1 = math.floor(lo_im / h), math.ceil(hi_im / h)
    span = max(i1 - i0, j1 - j0)
    size = 1 << max(0, math.ceil(math.log2(max(span, 1) / 128)))
    bi = np.arange(i0, i1, size)
    bj = np.arange(j0, j1, size)
    bi, bj = (g.ravel() for g in np.meshgrid(bi, bj, indexing="ij"))
    slack = 1e-12 * max(1.0, float(np.abs(a).max()))
    count = 0

    while len(bi):
        half = size / 2
        c = (bi + half) * h + 1j * (bj + half) * h
        r = half * h * math.sqrt(2) if size > 1 else 0.0
        keep = _block_may_meet(region, c, r)
        bi, bj, c = bi[keep], bj[keep], c[keep]
        if not len(bi):
            break
        s = smin_at(a, c, workers)
        if size == 1:
            count += int(np.count_nonzero((s < eps) & region.contains(c)))
            break
        full = s + r < eps - slack
        for fi, fj in zip(bi[full], bj[full]):
            ii, jj = np.meshgrid(np.arange(fi, fi + size), np.arange(fj, fj + size), indexing="ij")
            count += int(np.count_nonzero(region.contains((ii + 0.5) * h + 1j * (jj + 0.5) * h)))
        split = ~full & (s - r <= eps + slack)
        bi, bj = bi[split], bj[split]
        size //= 2
        bi = np.concatenate([bi, bi + size, bi, bi + size])
        bj = np.concatenate([bj, bj, bj + size, bj + size])
    return count * h * h


@dataclass(frozen=True)
class LimitEstimate:
    value: float
    eps_schedule: list[float]
    ratios: list[float]
    extrapolations: list[float]
    converged: bool

    def __float__(self) -> float:
        return self.value

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "eps_schedule": self.eps_schedule,
            "ratios": self.ratios,
            "extrapolations": self.extrapolations,
            "converged": self.converged,
        }


def default_eps_schedule(m, region: Region, points: int = 5, ratio: float = 0.5) -> list[float]:
    """Geometric schedule starting at a tenth of the smallest eigenvalue gap.

    The start is also capped at a tenth of the distance from any eigenvalue
    inside ``region`` to the region boundary, so the pseudospectral disks
    stay away from the boundary.
    """
    lam = eig(m).eigenvalues
    n = len(lam)
    scale = 1.0
    if n > 1:
        d = np.abs(lam[:, None] - lam[None, :])
        d[np.diag_indices(n)] = np.inf
        scale = float(d.min())
    inside = lam[region.contains(lam)]
    if len(inside):
        scale = min(scale, float(np.min(_boundary_distance(region, inside))))
    start = scale / 10
    return [start * ratio**k for k in range(points)]


def _boundary_distance(region: Region, z: np.ndarray) -> np.ndarray:
    if isinstance(region, Disk):
        return region.radius - np.abs(z - region.center)
    lo_re, hi_re, lo_im, hi_im = region.bounding_box()
    return np.minimum.reduce([z.real - lo_re, hi_re - z.real, z.imag - lo_im, hi_im - z.imag])


def limiting_overlap_estimate(m, region: Region, eps_schedule=None, resolution: int = 64,
                              workers: int | None = None, rtol: float = 0.10) -> LimitEstimate:
    """Extrapolate ``area(eps) / (pi eps^2)`` to ``eps -> 0``.

    The ratio behaves like ``c0 + c1 eps + O(eps^2)``, so consecutive pairs of
    the schedule are combined by first-order Richardson extrapolation. The
    last extrapolation is returned; ``converged`` is false when the last two
    extrapolations differ by more than ``rtol`` relative.
    """
    a = as_cmatrix(m)
    eig(a)  # distinct eigenvalues required
    if eps_schedule is None:
        eps_schedule = default_eps_schedule(a, region)
    eps_schedule = [float(e) for e in eps_schedule]
    if any(e <= 0 for e in eps_schedule) or any(b >= c for c, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps_schedule must be positive and strictly decreasing")
    ratios = [pseudospectrum_area(a, e, region, resolution, workers) / (math.pi * e * e) for e in eps_schedule]
    if len(ratios) == 1:
        return LimitEstimate(ratios[0], eps_schedule, ratios, [], False)
    ext = []
    for (e0, f0), (e1, f1) in zip(zip(eps_schedule, ratios), zip(eps_schedule[1:], ratios[1:])):
        ext.append((e0 * f1 - e1 * f0) / (e0 - e1))
    value = ext[-1]
    if len(ext) == 1:
        converged = True
    else:
        denom = max(abs(value), 1e-300)
        converged = abs(ext[-1] - ext[-2]) <= rtol * denom or (ext[-1] == ext[-2] == 0.0)
    return LimitEstimate(value, eps_schedule, ratios, ext, converged)
