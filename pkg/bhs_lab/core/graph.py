"""
Graph Core - Port-labeled footprints and snapshots

Holds the static skeleton of a 1-bounded 1-interval connected dynamic graph:
per-node port labels, edge symmetry, bridge detection and the deterministic
generators used by the test corpus.
"""

import logging
import random
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

import networkx as nx

logger = logging.getLogger(__name__)

NodeId = int
Port = int


class GraphError(ValueError):
    """Raised for malformed footprints, graph files or generator parameters"""


@dataclass(frozen=True, order=True)
class EdgeId:
    """Canonical unordered node pair, u < v"""
    u: NodeId
    v: NodeId

    def __post_init__(self):
        if self.u >= self.v:
            raise GraphError(f"EdgeId needs u < v, got ({self.u}, {self.v})")

    @classmethod
    def of(cls, a: NodeId, b: NodeId) -> "EdgeId":
        return cls(min(a, b), max(a, b))

    def __str__(self) -> str:
        return f"({self.u},{self.v})"


@dataclass(frozen=True)
class PortEntry:
    """One incident edge as seen from a node"""
    port: Port
    neighbor: NodeId
    neighbor_port: Port


@dataclass(frozen=True)
class SnapshotCheck:
    """Result of validating a missing edge against the footprint"""
    ok: bool
    witness: Optional[FrozenSet[NodeId]] = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class Footprint:
    """
    Port-labeled undirected simple connected graph.

    adjacency[v][p] describes the edge behind port p at node v. Construction
    validates port bijectivity, symmetry, simplicity and connectivity.
    """
    adjacency: Tuple[Tuple[PortEntry, ...], ...]
    name: str = ""

    def __post_init__(self):
        n = len(self.adjacency)
        if n == 0:
            raise GraphError("footprint needs at least one node")
        for v, entries in enumerate(self.adjacency):
            seen = set()
            for p, entry in enumerate(entries):
                if entry.port != p:
                    raise GraphError(f"node {v}: port list is not 0..{len(entries) - 1}")
                if not 0 <= entry.neighbor < n:
                    raise GraphError(f"node {v} port {p}: unknown neighbor {entry.neighbor}")
                if entry.neighbor == v:
                    raise GraphError(f"node {v}: self-loop on port {p}")
                if entry.neighbor in seen:
                    raise GraphError(f"node {v}: multi-edge to {entry.neighbor}")
                seen.add(entry.neighbor)
                back = self.adjacency[entry.neighbor]
                if not 0 <= entry.neighbor_port < len(back):
                    raise GraphError(f"node {v} port {p}: reverse port out of range")
                rev = back[entry.neighbor_port]
                if rev.neighbor != v or rev.neighbor_port != p:
                    raise GraphError(f"edge ({v},{p}) is not symmetric")
        if n > 1 and not nx.is_connected(self.to_networkx()):
            raise GraphError("footprint is not connected")

    @property
    def node_count(self) -> int:
        return len(self.adjacency)

    @property
    def edge_count(self) -> int:
        return sum(len(entries) for entries in self.adjacency) // 2

    def degree(self, v: NodeId) -> int:
        """Footprint degree; missing edges never change it"""
        self._check_node(v)
        return len(self.adjacency[v])

    def neighbor_via_port(self, v: NodeId, p: Port) -> Tuple[NodeId, Port]:
        """Return (u, q): the neighbor behind port p and its entry port"""
        self._check_node(v)
        if not 0 <= p < len(self.adjacency[v]):
            raise GraphError(f"port {p} out of range at node {v} (degree {len(self.adjacency[v])})")
        entry = self.adjacency[v][p]
        return entry.neighbor, entry.neighbor_port

    def edge_via_port(self, v: NodeId, p: Port) -> EdgeId:
        u, _ = self.neighbor_via_port(v, p)
        return EdgeId.of(v, u)

    def port_towards(self, v: NodeId, u: NodeId) -> Optional[Port]:
        for entry in self.adjacency[v]:
            if entry.neighbor == u:
                return entry.port
        return None

    def has_edge(self, edge: EdgeId) -> bool:
        return 0 <= edge.u < self.node_count and self.port_towards(edge.u, edge.v) is not None

    @cached_property
    def edges(self) -> Tuple[EdgeId, ...]:
        """All edges in canonical order"""
        found = {
            EdgeId.of(v, entry.neighbor)
            for v, entries in enumerate(self.adjacency)
            for entry in entries
        }
        return tuple(sorted(found))

    @cached_property
    def bridges(self) -> FrozenSet[EdgeId]:
        return frozenset(EdgeId.of(a, b) for a, b in nx.bridges(self.to_networkx()))

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.node_count))
        for v, entries in enumerate(self.adjacency):
            for entry in entries:
                graph.add_edge(v, entry.neighbor)
        return graph

    def validate_snapshot(self, missing: Optional[EdgeId]) -> SnapshotCheck:
        """ok iff the footprint minus `missing` stays connected"""
        if missing is None:
            return SnapshotCheck(ok=True)
        if not self.has_edge(missing):
            return SnapshotCheck(ok=False, witness=frozenset())
        graph = self.to_networkx()
        graph.remove_edge(missing.u, missing.v)
        if nx.is_connected(graph):
            return SnapshotCheck(ok=True)
        component = nx.node_connected_component(graph, missing.u)
        return SnapshotCheck(ok=False, witness=frozenset(component))

    def to_text(self) -> str:
        """Serialize in the `n m` / `u v pu pv` graph file format"""
        lines = [f"{self.node_count} {self.edge_count}"]
        for edge in self.edges:
            pu = self.port_towards(edge.u, edge.v)
            pv = self.port_towards(edge.v, edge.u)
            lines.append(f"{edge.u} {edge.v} {pu} {pv}")
        return "\n".join(lines) + "\n"

    def _check_node(self, v: NodeId):
        if not 0 <= v < self.node_count:
            raise GraphError(f"unknown node {v}")


def from_port_edges(n: int, edges: List[Tuple[NodeId, NodeId, Port, Port]], name: str = "") -> Footprint:
    """Build a footprint from explicit (u, v, pu, pv) records"""
    if n <= 0:
        raise GraphError("n must be positive")
    slots: List[Dict[Port, PortEntry]] = [dict() for _ in range(n)]
    for u, v, pu, pv in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u},{v}) references an unknown node")
        if pu in slots[u] or pv in slots[v]:
            raise GraphError(f"edge ({u},{v}) reuses a port")
        slots[u][pu] = PortEntry(pu, v, pv)
        slots[v][pv] = PortEntry(pv, u, pu)
    adjacency = []
    for v, entries in enumerate(slots):
        if sorted(entries) != list(range(len(entries))):
            raise GraphError(f"node {v}: ports are not 0..{len(entries) - 1}")
        adjacency.append(tuple(entries[p] for p in range(len(entries))))
    return Footprint(tuple(adjacency), name=name)


def from_networkx(graph: nx.Graph, name: str = "") -> Footprint:
    """Label ports at each node in ascending neighbor order"""
    mapping = {node: i for i, node in enumerate(sorted(graph.nodes))}
    neighbors = {
        mapping[node]: sorted(mapping[x] for x in graph.neighbors(node))
        for node in graph.nodes
    }
    edges = []
    for u, nbrs in neighbors.items():
        for v in nbrs:
            if u < v:
                edges.append((u, v, nbrs.index(v), neighbors[v].index(u)))
    return from_port_edges(len(mapping), edges, name=name)


def read_graph_file(path: Union[str, Path]) -> Footprint:
    """Parse the line-oriented graph file format"""
    text = Path(path).read_text()
    return parse_graph_text(text, name=Path(path).stem)


def parse_graph_text(text: str, name: str = "") -> Footprint:
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    if not rows:
        raise GraphError("empty graph file")
    try:
        n, m = (int(x) for x in rows[0])
        edges = [tuple(int(x) for x in row) for row in rows[1:]]
    except ValueError as e:
        raise GraphError(f"malformed graph file: {e}") from e
    if any(len(edge) != 4 for edge in edges):
        raise GraphError("edge lines must read `u v pu pv`")
    if len(edges) != m:
        raise GraphError(f"header declares {m} edges, found {len(edges)}")
    return from_port_edges(n, edges, name=name)


def write_graph_file(fp: Footprint, path: Union[str, Path]):
    Path(path).write_text(fp.to_text())


# Generators
#
# ring n:   node i, port 0 -> i+1 (clockwise), port 1 -> i-1
# path n:   inner node i, port 0 -> i+1, port 1 -> i-1; end nodes have port 0 only
# star n:   center 0, port k -> leaf k+1; leaves use port 0
# torus rxc: node i*c+j, ports 0 east, 1 west, 2 south, 3 north (r, c >= 3)
# complete n and random_connected: ports in ascending neighbor order

def ring(n: int) -> Footprint:
    if n < 3:
        raise GraphError("ring needs n >= 3")
    edges = [(i, (i + 1) % n, 0, 1) for i in range(n)]
    return from_port_edges(n, [_canonical(e) for e in edges], name=f"ring{n}")


def path(n: int) -> Footprint:
    if n < 2:
        raise GraphError("path needs n >= 2")
    edges = []
    for i in range(n - 1):
        pu = 0
        pv = 0 if i + 1 == n - 1 else 1
        edges.append((i, i + 1, pu, pv))
    return from_port_edges(n, edges, name=f"path{n}")


def star(leaves: int) -> Footprint:
    if leaves < 1:
        raise GraphError("star needs at least one leaf")
    edges = [(0, k + 1, k, 0) for k in range(leaves)]
    return from_port_edges(leaves + 1, edges, name=f"star{leaves}")


def torus(rows: int, cols: int) -> Footprint:
    if rows < 3 or cols < 3:
        raise GraphError("torus needs rows, cols >= 3")
    edges = []
    for i in range(rows):
        for j in range(cols):
            node = i * cols + j
            edges.append((node, i * cols + (j + 1) % cols, 0, 1))
            edges.append((node, ((i + 1) % rows) * cols + j, 2, 3))
    return from_port_edges(rows * cols, [_canonical(e) for e in edges], name=f"torus{rows}x{cols}")


def complete(n: int) -> Footprint:
    if n < 2:
        raise GraphError("complete graph needs n >= 2")
    return from_networkx(nx.complete_graph(n), name=f"K{n}")


def random_connected(n: int, m: int, seed: int) -> Footprint:
    """Random spanning tree plus extra edges, deterministic per seed"""
    if n < 2:
        raise GraphError("random_connected needs n >= 2")
    if not n - 1 <= m <= n * (n - 1) // 2:
        raise GraphError(f"infeasible edge count m={m} for n={n}")
    rng = random.Random(seed)
    order = list(range(n))
    rng.shuffle(order)
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    for i in range(1, n):
        graph.add_edge(order[i], order[rng.randrange(i)])
    candidates = [(u, v) for u in range(n) for v in range(u + 1, n) if not graph.has_edge(u, v)]
    rng.shuffle(candidates)
    graph.add_edges_from(candidates[: m - (n - 1)])
    return from_networkx(graph, name=f"random{n}_{m}_s{seed}")


def generate(spec: str) -> Footprint:
    """
    Build a footprint from a generator spec.

    Accepted forms: ring:N, path:N, star:LEAVES, torus:RxC, complete:N,
    random:N,M,SEED and file:PATH.
    """
    kind, _, arg = spec.partition(":")
    try:
        if kind == "ring":
            return ring(int(arg))
        if kind == "path":
            return path(int(arg))
        if kind == "star":
            return star(int(arg))
        if kind == "torus":
            r, c = arg.lower().split("x")
            return torus(int(r), int(c))
        if kind == "complete":
            return complete(int(arg))
        if kind in ("random", "random_connected"):
            n, m, seed = (int(x) for x in arg.split(","))
            return random_connected(n, m, seed)
    except ValueError as e:
        if isinstance(e, GraphError):
            raise
        raise GraphError(f"bad generator arguments in {spec!r}") from e
    if kind == "file":
        return read_graph_file(arg)
    raise GraphError(f"unknown graph kind {kind!r}")


def _canonical(edge: Tuple[NodeId, NodeId, Port, Port]) -> Tuple[NodeId, NodeId, Port, Port]:
    u, v, pu, pv = edge
    return (u, v, pu, pv) if u < v else (v, u, pv, pu)
