import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from bhs_lab.core.graph import (
    EdgeId,
    GraphError,
    from_networkx,
    from_port_edges,
    generate,
    parse_graph_text,
    read_graph_file,
    write_graph_file,
)


def test_ring_ports_point_clockwise_then_back(ring4):
    assert ring4.name == "ring4"
    assert ring4.neighbor_via_port(0, 0) == (1, 1)
    assert ring4.neighbor_via_port(0, 1) == (3, 0)
    assert ring4.bridges == frozenset()


def test_path_end_nodes_have_one_port(path3):
    assert path3.degree(0) == 1
    assert path3.degree(2) == 1
    assert path3.neighbor_via_port(1, 0) == (2, 0)
    assert path3.neighbor_via_port(1, 1) == (0, 0)
    assert path3.bridges == frozenset(path3.edges)


def test_star_center_ports_follow_leaf_order():
    star = generate("star:4")
    assert star.name == "star4"
    assert star.neighbor_via_port(0, 3) == (4, 0)
    assert len(star.bridges) == 4


def test_torus_and_complete_sizes():
    torus = generate("torus:3x3")
    assert torus.node_count == 9
    assert torus.edge_count == 18
    assert all(torus.degree(v) == 4 for v in range(9))
    k4 = generate("complete:4")
    assert k4.name == "K4"
    assert k4.edge_count == 6


def test_edges_are_sorted_and_canonical(ring4):
    assert ring4.edges == (EdgeId(0, 1), EdgeId(0, 3), EdgeId(1, 2), EdgeId(2, 3))
    assert str(EdgeId.of(3, 1)) == "(1,3)"
    with pytest.raises(GraphError):
        EdgeId(2, 2)


def test_port_towards_and_edge_via_port(ring4):
    assert ring4.port_towards(2, 1) == 1
    assert ring4.port_towards(0, 2) is None
    assert ring4.edge_via_port(3, 0) == EdgeId(0, 3)


def test_validate_snapshot_rejects_bridges(path3, ring4):
    assert not path3.validate_snapshot(EdgeId(0, 1))
    assert ring4.validate_snapshot(EdgeId(0, 1))
    assert ring4.validate_snapshot(None)


@pytest.mark.parametrize(
    "edges, message",
    [
        ([(0, 1, 0, 0), (0, 1, 1, 1)], "multi-edge"),
        ([(0, 0, 0, 1)], "self-loop"),
        ([(0, 1, 0, 0), (1, 2, 0, 1)], "reuses a port"),
    ],
)
def test_malformed_port_edges_raise(edges, message):
    with pytest.raises(GraphError, match=message):
        from_port_edges(3, edges)


def test_disconnected_footprint_raises():
    with pytest.raises(GraphError, match="not connected"):
        from_port_edges(4, [(0, 1, 0, 0), (2, 3, 0, 0)])


@pytest.mark.parametrize("spec", ["ring:2", "path:1", "torus:2x3", "hexagon:5", "ring:x", "random:4,2,1"])
def test_bad_generator_specs_raise(spec):
    with pytest.raises(GraphError):
        generate(spec)


def test_graph_file_keeps_port_labels(tmp_path, ring4):
    target = tmp_path / "ring.txt"
    write_graph_file(ring4, target)
    loaded = read_graph_file(target)
    assert loaded.name == "ring"
    for v in range(4):
        for p in range(2):
            assert loaded.neighbor_via_port(v, p) == ring4.neighbor_via_port(v, p)
    assert generate(f"file:{target}").edges == ring4.edges


def test_graph_text_edge_count_must_match():
    with pytest.raises(GraphError, match="declares 2 edges"):
        parse_graph_text("3 2\n0 1 0 0\n")


def test_from_networkx_uses_ascending_neighbors():
    fp = from_networkx(nx.cycle_graph(4))
    assert [fp.neighbor_via_port(0, p)[0] for p in range(2)] == [1, 3]


@settings(max_examples=30, deadline=None)
@given(n=st.integers(min_value=3, max_value=9), extra=st.integers(min_value=0, max_value=6), seed=st.integers(0, 1000))
def test_random_connected_has_symmetric_ports(n, extra, seed):
    m = min(n - 1 + extra, n * (n - 1) // 2)
    fp = generate(f"random:{n},{m},{seed}")
    assert fp.edge_count == m
    for v in range(n):
        for p in range(fp.degree(v)):
            u, q = fp.neighbor_via_port(v, p)
            assert fp.neighbor_via_port(u, q) == (v, p)
