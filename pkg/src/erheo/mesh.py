"""Conforming triangulations of polygonal domains with S1/S2 boundary tags.

Mesh file format (ASCII, whitespace separated, zero-based indices)::

    ermesh 1
    nodes N
    x y            (N lines)
    triangles M
    i j k          (M lines, counter-clockwise)
    boundary B
    i j TAG        (B lines, TAG in {S1, S2})
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, MeshError

S1 = "S1"
S2 = "S2"
TAGS = (S1, S2)
SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray  # (N, 2)
    triangles: np.ndarray  # (M, 3), counter-clockwise
    boundary_edges: np.ndarray  # (B, 2)
    boundary_tags: tuple  # B strings

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.ascontiguousarray(self.nodes, dtype=float))
        object.__setattr__(self, "triangles", np.ascontiguousarray(self.triangles, dtype=np.int64))
        object.__setattr__(self, "boundary_edges",
                           np.ascontiguousarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "boundary_tags", tuple(self.boundary_tags))
        for a in (self.nodes, self.triangles, self.boundary_edges):
            a.setflags(write=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def signed_areas(self):
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges(self):
        """Unique undirected edges as sorted pairs, in first-seen order."""
        return _unique_edges(self.triangles)[0]

    @property
    def h_max(self):
        e = self.edges()
        return float(np.max(np.linalg.norm(self.nodes[e[:, 0]] - self.nodes[e[:, 1]], axis=1)))

    @property
    def diameter(self):
        lo, hi = self.nodes.min(axis=0), self.nodes.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def edges_with_tag(self, tag):
        mask = np.array([t == tag for t in self.boundary_tags], dtype=bool)
        return self.boundary_edges[mask]

    def boundary_nodes(self, tag=None):
        e = self.boundary_edges if tag is None else self.edges_with_tag(tag)
        return np.unique(e)

    def has_traction_boundary(self):
        return S2 in self.boundary_tags

    def outward_normals(self, edges=None):
        """Unit outward normals and lengths for boundary edges."""
        edges = self.boundary_edges if edges is None else edges
        owner = _edge_owner(self.triangles)
        a, b = self.nodes[edges[:, 0]], self.nodes[edges[:, 1]]
        t = b - a
        length = np.linalg.norm(t, axis=1)
        n = np.stack([t[:, 1], -t[:, 0]], axis=1) / length[:, None]
        # flip toward the exterior: away from the opposite vertex of the owning triangle
        opp = np.empty((len(edges), 2))
        for k, (i, j) in enumerate(edges):
            tri = self.triangles[owner[(min(i, j), max(i, j))]]
            opp[k] = self.nodes[[v for v in tri if v != i and v != j][0]]
        sign = np.sign(np.sum((opp - a) * n, axis=1))
        return -sign[:, None] * n, length

    def validate(self):
        check_mesh(self)
        return self


def _unique_edges(triangles):
    local = triangles[:, [1, 2, 2, 0, 0, 1]].reshape(-1, 3, 2)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    uniq, first, inverse = np.unique(pairs, axis=0, return_index=True, return_inverse=True)
    # renumber so edge ids follow first appearance (stable, mesh-order dependent only)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return uniq[order], rank[inverse.ravel()].reshape(-1, 3)


def _edge_owner(triangles):
    owner = {}
    for t, tri in enumerate(triangles):
        for i, j in ((tri[1], tri[2]), (tri[2], tri[0]), (tri[0], tri[1])):
            owner[(min(i, j), max(i, j))] = t
    return owner


def check_mesh(mesh):
    """Raise MeshError if any structural invariant is violated."""
    n = mesh.n_nodes
    tri = mesh.triangles
    if tri.size and (tri.min() < 0 or tri.max() >= n):
        raise MeshError("triangle references a node index out of range")
    area = mesh.signed_areas()
    bad = np.flatnonzero(area <= 0)
    if bad.size:
        raise MeshError(f"triangle {bad[0]} has non-positive signed area {area[bad[0]]:.3e}")
    pairs = np.sort(tri[:, [1, 2, 2, 0, 0, 1]].reshape(-1, 2), axis=1)
    counts = Counter(map(tuple, pairs.tolist()))
    over = [e for e, c in counts.items() if c > 2]
    if over:
        raise MeshError(f"edge {over[0]} is shared by more than two triangles")
    topo = {e for e, c in counts.items() if c == 1}
    tagged = Counter(tuple(sorted(map(int, e))) for e in mesh.boundary_edges)
    dup = [e for e, c in tagged.items() if c > 1]
    if dup:
        raise MeshError(f"boundary edge {dup[0]} is tagged more than once")
    missing = sorted(topo - set(tagged))
    if missing:
        raise MeshError(f"boundary edge {missing[0]} is untagged")
    extra = sorted(set(tagged) - topo)
    if extra:
        raise MeshError(f"tagged edge {extra[0]} is not on the boundary")
    unknown = [t for t in mesh.boundary_tags if t not in TAGS]
    if unknown:
        raise MeshError(f"unknown boundary tag {unknown[0]!r}")
    if S1 not in mesh.boundary_tags:
        raise MeshError("the velocity boundary S1 must be non-empty")
    # conformity: a vertex lying strictly inside another triangle's edge is a hanging node
    e = np.array(sorted(counts), dtype=np.int64)
    a, b = mesh.nodes[e[:, 0]], mesh.nodes[e[:, 1]]
    used = np.unique(tri)
    for k in range(0, len(e), 2048):
        aa, bb = a[k:k + 2048, None, :], b[k:k + 2048, None, :]
        p = mesh.nodes[used][None, :, :]
        d = bb - aa
        L2 = np.sum(d * d, axis=-1)
        s = np.sum((p - aa) * d, axis=-1) / L2
        cross = d[..., 0] * (p - aa)[..., 1] - d[..., 1] * (p - aa)[..., 0]
        on = (np.abs(cross) <= 1e-12 * L2) & (s > 1e-12) & (s < 1 - 1e-12)
        if np.any(on):
            i, j = np.argwhere(on)[0]
            raise MeshError(f"node {used[j]} hangs on edge {tuple(e[k + i])}: mesh is not conforming")
    return True


def _parse_tag_rule(tag_rule):
    rule = {s: S1 for s in SIDES}
    if tag_rule is None:
        return rule
    if isinstance(tag_rule, str):
        items = [kv.split(":") for kv in tag_rule.replace(" ", "").split(",") if kv]
        tag_rule = {k: v for k, v in items}
    for side, tag in tag_rule.items():
        if side not in SIDES or tag not in TAGS:
            raise ConfigError(f"bad tag rule entry {side}:{tag}")
        rule[side] = tag
    return rule


def generate_rectangle(nx, ny, lx=1.0, ly=1.0, tag_rule=None, pattern="crossed"):
    """Structured triangulation of ``[0, lx] x [0, ly]``.

    ``crossed``: each cell gets a centre node and four triangles, giving
    ``(nx+1)(ny+1) + nx ny`` nodes and ``4 nx ny`` triangles.
    ``diagonal``: each cell is split along its SW-NE diagonal into two.
    ``tag_rule`` maps ``left/right/bottom/top`` to S1 or S2 (default S1).
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ConfigError(f"nx, ny must be positive integers, got {nx}, {ny}")
    if not (lx > 0 and ly > 0):
        raise ConfigError(f"lx, ly must be positive, got {lx}, {ly}")
    nx, ny = int(nx), int(ny)
    rule = _parse_tag_rule(tag_rule)
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    corners = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return j * (nx + 1) + i

    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    I, J = I.ravel(), J.ravel()
    sw, se, nw, ne = vid(I, J), vid(I + 1, J), vid(I, J + 1), vid(I + 1, J + 1)
    if pattern == "crossed":
        centres = np.stack([(xs[I] + xs[I + 1]) / 2, (ys[J] + ys[J + 1]) / 2], axis=1)
        c = len(corners) + np.arange(nx * ny)
        nodes = np.vstack([corners, centres])
        tris = np.stack([
            np.stack([sw, se, c], 1), np.stack([se, ne, c], 1),
            np.stack([ne, nw, c], 1), np.stack([nw, sw, c], 1),
        ], axis=1).reshape(-1, 3)
    elif pattern == "diagonal":
        nodes = corners
        tris = np.stack([np.stack([sw, se, ne], 1), np.stack([sw, ne, nw], 1)], axis=1).reshape(-1, 3)
    else:
        raise ConfigError(f"unknown mesh pattern {pattern!r}")

    edges, tags = [], []
    for i in range(nx):
        edges.append((vid(i, 0), vid(i + 1, 0)))
        tags.append(rule["bottom"])
    for j in range(ny):
        edges.append((vid(nx, j), vid(nx, j + 1)))
        tags.append(rule["right"])
    for i in range(nx, 0, -1):
        edges.append((vid(i, ny), vid(i - 1, ny)))
        tags.append(rule["top"])
    for j in range(ny, 0, -1):
        edges.append((vid(0, j), vid(0, j - 1)))
        tags.append(rule["left"])
    mesh = Mesh(nodes, tris, np.array(edges), tags)
    if S1 not in mesh.boundary_tags:
        raise ConfigError("tag rule leaves S1 empty")
    return mesh


def write_mesh(mesh, path):
    lines = ["ermesh 1", f"nodes {mesh.n_nodes}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines.append(f"boundary {len(mesh.boundary_edges)}")
    lines += [f"{i} {j} {t}" for (i, j), t in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_mesh(path):
    """Parse and validate a mesh file; errors name the offending line."""
    try:
        text = Path(path).read_text(encoding="ascii").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise MeshError(f"cannot read mesh {path}: {exc}") from None
    rows = [(n + 1, line.split()) for n, line in enumerate(text)]
    rows = [(n, tok) for n, tok in rows if tok and not tok[0].startswith("#")]
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(rows):
            raise MeshError(f"{path}: unexpected end of file")
        row = rows[pos]
        pos += 1
        return row

    def section(name):
        n, tok = take()
        if len(tok) != 2 or tok[0] != name:
            raise MeshError(f"{path}:{n}: expected '{name} COUNT'")
        try:
            return int(tok[1])
        except ValueError:
            raise MeshError(f"{path}:{n}: bad count {tok[1]!r}") from None

    n, tok = take()
    if tok != ["ermesh", "1"]:
        raise MeshError(f"{path}:{n}: expected header 'ermesh 1'")

    def block(count, width, conv, tail=None):
        out = []
        for _ in range(count):
            n, tok = take()
            if len(tok) != width:
                raise MeshError(f"{path}:{n}: expected {width} fields, got {len(tok)}")
            try:
                vals = [conv(t) for t in (tok if tail is None else tok[:tail])]
            except ValueError:
                raise MeshError(f"{path}:{n}: cannot parse {' '.join(tok)!r}") from None
            out.append(vals if tail is None else (vals, tok[tail:], n))
        return out

    nodes = block(section("nodes"), 2, float)
    tris = block(section("triangles"), 3, int)
    bnd = block(section("boundary"), 3, int, tail=2)
    for _, tag, n in bnd:
        if tag[0] not in TAGS:
            raise MeshError(f"{path}:{n}: unknown tag {tag[0]!r}")
    if pos != len(rows):
        raise MeshError(f"{path}:{rows[pos][0]}: trailing content")
    mesh = Mesh(np.array(nodes, dtype=float).reshape(-1, 2),
                np.array(tris, dtype=np.int64).reshape(-1, 3),
                np.array([b[0] for b in bnd], dtype=np.int64).reshape(-1, 2),
                [b[1][0] for b in bnd])
    return mesh.validate()
