import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from erheo.errors import ConfigError, MeshError
from erheo.mesh import S1, S2, generate_rectangle, read_mesh, write_mesh


def test_single_cell_counts():
    m = generate_rectangle(1, 1)
    assert m.n_nodes == 5  # four corners and the cell centre
    assert m.n_triangles == 4
    assert len(m.boundary_edges) == 4


def test_diagonal_counts():
    m = generate_rectangle(3, 2, pattern="diagonal")
    assert m.n_nodes == 12 and m.n_triangles == 12


@given(st.integers(1, 6), st.integers(1, 6), st.floats(0.1, 5), st.floats(0.1, 5),
       st.sampled_from(["crossed", "diagonal"]))
def test_generated_invariants(nx, ny, lx, ly, pattern):
    m = generate_rectangle(nx, ny, lx, ly, pattern=pattern).validate()
    assert np.all(m.signed_areas() > 0)
    assert m.signed_areas().sum() == pytest.approx(lx * ly, rel=1e-12)
    V, E, F = m.n_nodes, len(m.edges()), m.n_triangles
    assert V - E + F == 1
    assert len(m.boundary_edges) == 2 * (nx + ny)


def test_refinement_halves_h_max():
    for pattern in ("crossed", "diagonal"):
        h = [generate_rectangle(n, n, pattern=pattern).h_max for n in (4, 8, 16)]
        for coarse, fine in zip(h, h[1:]):
            assert fine / coarse == pytest.approx(0.5, rel=0.01)


def test_tags_follow_rule():
    m = generate_rectangle(2, 3, tag_rule="right:S2")
    right = m.edges_with_tag(S2)
    assert len(right) == 3
    assert np.allclose(m.nodes[right.ravel(), 0], 1.0)
    assert m.has_traction_boundary()
    all_s1 = generate_rectangle(2, 2, tag_rule="left:S1,right:S1,top:S1,bottom:S1")
    assert not all_s1.has_traction_boundary()
    assert set(all_s1.boundary_tags) == {S1}


def test_outward_normals():
    m = generate_rectangle(2, 2)
    n, length = m.outward_normals()
    mid = 0.5 * (m.nodes[m.boundary_edges[:, 0]] + m.nodes[m.boundary_edges[:, 1]])
    assert np.all(np.sum(n * (mid - 0.5), axis=1) > 0)
    assert np.allclose(length, 0.5)


def test_generation_errors():
    with pytest.raises(ConfigError):
        generate_rectangle(0, 1)
    with pytest.raises(ConfigError):
        generate_rectangle(1, 1, lx=-1.0)
    with pytest.raises(ConfigError):
        generate_rectangle(1, 1, tag_rule="left:S2,right:S2,top:S2,bottom:S2")
    with pytest.raises(ConfigError):
        generate_rectangle(1, 1, tag_rule="front:S1")


def test_round_trip(tmp_path):
    m = generate_rectangle(3, 2, 2.0, 1.0, tag_rule="right:S2")
    write_mesh(m, tmp_path / "a.msh")
    r = read_mesh(tmp_path / "a.msh")
    assert np.array_equal(r.nodes, m.nodes)
    assert np.array_equal(r.triangles, m.triangles)
    assert np.array_equal(r.boundary_edges, m.boundary_edges)
    assert r.boundary_tags == m.boundary_tags


def _write(tmp_path, nodes, tris, bnd):
    lines = ["ermesh 1", f"nodes {len(nodes)}"] + [f"{x} {y}" for x, y in nodes]
    lines += [f"triangles {len(tris)}"] + [" ".join(map(str, t)) for t in tris]
    lines += [f"boundary {len(bnd)}"] + [" ".join(map(str, b)) for b in bnd]
    p = tmp_path / "m.msh"
    p.write_text("\n".join(lines) + "\n")
    return p


SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]
BOUNDARY = [(0, 1, "S1"), (1, 2, "S1"), (2, 3, "S1"), (3, 0, "S1")]


def test_reader_accepts_valid(tmp_path):
    m = read_mesh(_write(tmp_path, SQUARE, [(0, 1, 2), (0, 2, 3)], BOUNDARY))
    assert m.n_triangles == 2


def test_reader_rejects_zero_area(tmp_path):
    nodes = SQUARE + [(0.5, 0.0)]
    tris = [(0, 4, 1), (0, 1, 2), (0, 2, 3)]
    with pytest.raises(MeshError, match="triangle 0"):
        read_mesh(_write(tmp_path, nodes, tris, BOUNDARY))


def test_reader_rejects_untagged_edge(tmp_path):
    with pytest.raises(MeshError, match="untagged"):
        read_mesh(_write(tmp_path, SQUARE, [(0, 1, 2), (0, 2, 3)], BOUNDARY[:3]))


def test_reader_reports_line_numbers(tmp_path):
    p = tmp_path / "bad.msh"
    p.write_text("ermesh 1\nnodes 2\n0 0\n1 x\n")
    with pytest.raises(MeshError, match=":4:"):
        read_mesh(p)
    p.write_text("mesh 2\n")
    with pytest.raises(MeshError, match=":1:"):
        read_mesh(p)


def test_reader_rejects_hanging_node(tmp_path):
    nodes = SQUARE + [(0.5, 0.0), (0.5, 0.5)]
    # the left triangle spans 0-2 but the right part is split at node 4
    tris = [(0, 4, 2), (4, 1, 2), (0, 2, 3)]
    bnd = [(0, 4, "S1"), (4, 1, "S1"), (1, 2, "S1"), (2, 3, "S1"), (3, 0, "S1")]
    read_mesh(_write(tmp_path, nodes[:5], tris, bnd))  # conforming
    tris = [(0, 1, 2), (0, 2, 3), (0, 4, 5)]
    with pytest.raises(MeshError):
        read_mesh(_write(tmp_path, nodes, tris, BOUNDARY))
