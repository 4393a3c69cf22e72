"""Compactly supported mollification of discrete velocity fields.

``P u = omega_a * (extension of u)``.  The extension outside the domain
copies the boundary trace at the nearest boundary point, so it is constant
along normals near smooth boundary parts.  The convolution is a quadrature
sum over element quadrature points plus ghost points on a background grid
outside the domain; rows are normalised by the discrete kernel mass so that
constants are reproduced exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.spatial import cKDTree

from .errors import ConfigError
from .quadrature import triangle_rule


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = s < 1.0
    out[m] = np.exp(-1.0 / (1.0 - s[m] ** 2))
    return out


_BUMP_MOMENT = quad(lambda s: s * math.exp(-1.0 / (1.0 - s * s)), 0.0, 1.0, epsabs=1e-15, epsrel=1e-14)[0]


@dataclass(frozen=True)
class MollifierKernel:
    """Radial bump of radius ``radius`` with unit integral over the plane."""

    radius: float
    normalizer: float

    def __call__(self, z):
        return self.normalizer * _bump(np.asarray(z, dtype=float) / self.radius)

    def mass(self):
        """Integral over the plane, by 1-D quadrature in the radius."""
        return 2 * math.pi * quad(lambda r: r * float(self(r)), 0.0, self.radius, epsabs=1e-15)[0]


def make_kernel(radius):
    if not (radius > 0 and math.isfinite(radius)):
        raise ConfigError(f"mollifier radius must be positive, got {radius}")
    return MollifierKernel(float(radius), 1.0 / (2 * math.pi * radius**2 * _BUMP_MOMENT))


def kernel_sequence(radius, factor=0.5, count=4):
    """Radii ``radius * factor**k`` for ``k < count``."""
    if not 0 < factor < 1:
        raise ConfigError("sweep factor must lie in (0, 1)")
    return [make_kernel(radius * factor**k) for k in range(count)]


# ---------------------------------------------------------------------------
# geometry helpers


def _boundary_segments(spaces):
    mesh = spaces.mesh
    e = mesh.boundary_edges
    return mesh.nodes[e[:, 0]], mesh.nodes[e[:, 1]]


def points_inside(points, a, b, chunk=4096):
    """Even-odd crossing test of ``points`` against the closed polygon of segments ``a``-``b``."""
    inside = np.zeros(len(points), dtype=bool)
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk, None, :]
        ay, by = a[None, :, 1], b[None, :, 1]
        straddle = (ay > p[..., 1]) != (by > p[..., 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = a[None, :, 0] + (p[..., 1] - ay) * (b[None, :, 0] - a[None, :, 0]) / (by - ay)
        inside[s:s + chunk] = (np.sum(straddle & (p[..., 0] < xc), axis=1) % 2) == 1
    return inside


def nearest_on_segments(points, a, b, chunk=2048):
    """Index of the nearest segment, the local parameter in [0, 1] and the distance."""
    idx = np.empty(len(points), dtype=np.int64)
    par = np.empty(len(points))
    dist = np.empty(len(points))
    d = b - a
    dd = np.sum(d * d, axis=1)
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk, None, :]
        t = np.clip(np.sum((p - a[None]) * d[None], axis=2) / dd[None], 0.0, 1.0)
        q = a[None] + t[..., None] * d[None]
        r = np.sum((p - q) ** 2, axis=2)
        k = np.argmin(r, axis=1)
        rows = np.arange(len(k))
        idx[s:s + chunk] = k
        par[s:s + chunk] = t[rows, k]
        dist[s:s + chunk] = np.sqrt(r[rows, k])
    return idx, par, dist


class Regularizer:
    """Precomputed linear map from P2 velocity coefficients to ``P u`` at targets.

    By default the targets are the P2 nodes, so the result is again a P2
    coefficient vector whose interpolant is used for gradients.
    """

    def __init__(self, spaces, kernel, targets=None, ghost_spacing=None):
        mesh = spaces.mesh
        a = kernel.radius
        if a > mesh.diameter:
            raise ConfigError(f"mollifier radius {a} exceeds the domain diameter {mesh.diameter:.4g}")
        self.spaces = spaces
        self.kernel = kernel
        self.targets = spaces.p2_coords if targets is None else np.asarray(targets, dtype=float).reshape(-1, 2)
        self.returns_field = targets is None
        n2 = spaces.n2

        # interior sources: element quadrature points
        L, w = triangle_rule(5)
        qd = spaces.element_data(5)
        src_x = [qd.points.reshape(-1, 2)]
        src_w = [qd.weights.ravel()]
        ne, nq = qd.weights.shape
        rows = np.repeat(np.arange(ne * nq), 6)
        cols = np.repeat(spaces.p2_map, nq, axis=0).ravel()
        vals = np.tile(qd.p2, (ne, 1)).ravel()
        blocks = [sp.coo_matrix((vals, (rows, cols)), shape=(ne * nq, n2)).tocsr()]

        # ghost sources outside the domain, within distance a
        hg = ghost_spacing or 0.5 * mesh.h_max
        lo = mesh.nodes.min(axis=0) - a
        hi = mesh.nodes.max(axis=0) + a
        nx = max(1, int(math.ceil((hi[0] - lo[0]) / hg)))
        ny = max(1, int(math.ceil((hi[1] - lo[1]) / hg)))
        gx = (hi[0] - lo[0]) / nx
        gy = (hi[1] - lo[1]) / ny
        g = 0.5 / math.sqrt(3.0)
        offs = np.array([[0.5 - g, 0.5 - g], [0.5 + g, 0.5 - g], [0.5 - g, 0.5 + g], [0.5 + g, 0.5 + g]])
        I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        base = np.stack([I.ravel(), J.ravel()], axis=1)
        pts = ((base[:, None, :] + offs[None]) * [gx, gy] + lo).reshape(-1, 2)
        A, B = _boundary_segments(spaces)
        k, t, dist = nearest_on_segments(pts, A, B)
        keep = (dist < a) & (dist > 0) & ~points_inside(pts, A, B)
        pts, k, t = pts[keep], k[keep], t[keep]
        self.n_ghost = len(pts)
        if len(pts):
            e = mesh.boundary_edges[k]
            mid = mesh.n_nodes + spaces.boundary_edge_ids[k]
            shape = np.stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)], axis=1)
            cols = np.stack([e[:, 0], e[:, 1], mid], axis=1)
            rows = np.repeat(np.arange(len(pts)), 3)
            blocks.append(sp.coo_matrix((shape.ravel(), (rows, cols.ravel())), shape=(len(pts), n2)).tocsr())
            src_x.append(pts)
            src_w.append(np.full(len(pts), 0.25 * gx * gy))
        self.sources = np.vstack(src_x)
        self.source_weights = np.concatenate(src_w)
        self.evaluate = sp.vstack(blocks, format="csr")
        self.weights = self._kernel_matrix()

    def _kernel_matrix(self, chunk=512):
        tree = cKDTree(self.sources)
        a = self.kernel.radius
        indptr = [0]
        indices = []
        data = []
        nt = len(self.targets)
        for s in range(0, nt, chunk):
            tgt = self.targets[s:s + chunk]
            nbrs = tree.query_ball_point(tgt, a)
            for i, nb in enumerate(nbrs):
                nb = np.sort(np.asarray(nb, dtype=np.int64))
                r = np.linalg.norm(self.sources[nb] - tgt[i], axis=1)
                wts = self.kernel(r) * self.source_weights[nb]
                total = wts.sum()
                if total <= 0:
                    raise ConfigError(f"mollifier radius {a} too small for the mesh: empty stencil")
                indices.append(nb)
                data.append(wts / total)
                indptr.append(indptr[-1] + len(nb))
        return sp.csr_matrix((np.concatenate(data), np.concatenate(indices), np.array(indptr)),
                             shape=(nt, len(self.sources)))

    def apply_scalar(self, f):
        """Mollify one scalar P2 field given by its nodal values."""
        return self.weights @ (self.evaluate @ np.asarray(f, dtype=float))

    def apply(self, u):
        """Mollify a velocity coefficient vector; returns values for both components."""
        u = np.asarray(getattr(u, "coeffs", u), dtype=float)
        n2 = self.spaces.n2
        out = [self.apply_scalar(u[c * n2:(c + 1) * n2]) for c in range(2)]
        return np.concatenate(out) if self.returns_field else np.stack(out, axis=1)


def regularize(u, spaces, kernel):
    """``P u`` as a P2 coefficient vector; ``kernel=None`` is the identity."""
    u = np.asarray(getattr(u, "coeffs", u), dtype=float)
    if kernel is None:
        return u.copy()
    return Regularizer(spaces, kernel).apply(u)
