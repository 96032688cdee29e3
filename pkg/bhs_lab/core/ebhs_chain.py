"""
EBHS Chain - Eventual black hole search on static graphs with four agents

A single-agent exploration walk (a whiteboard DFS or a universal exploration
sequence) is simulated by a chain of four agents spread over two adjacent
nodes. Every move of the walk becomes a backward round (4 ticks) or a forward
round (7 ticks); absence checks inside each round detect a black hole that
emerges at any tick, and the port leading to it is declared.
"""

import itertools
import logging
import random
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import networkx as nx

from .graph import Footprint, NodeId, Port
from .runtime import (
    SCHEMA_VERSION,
    ConfigurationError,
    Detection,
    EventKind,
    SimOutcome,
    SimResult,
    Trace,
    TraceEvent,
    Verdict,
)

logger = logging.getLogger(__name__)

BACKWARD_TICKS = 4
FORWARD_TICKS = 7


class UxsSearchExhausted(RuntimeError):
    """Raised when the sequence construction exceeds its length budget"""


def uxs_step(entry_port: Port, symbol: int, degree: int) -> Port:
    """Exit port for a walk that entered through `entry_port`"""
    return (entry_port + symbol) % degree


def guess_schedule() -> Iterator[int]:
    """Size guesses 2, 4, 8, ..."""
    guess = 2
    while True:
        yield guess
        guess *= 2


# Sequence construction

def _labelings(graph: nx.Graph, cap: int, samples: int, rng: random.Random) -> List[List[List[Tuple[int, int]]]]:
    """Port-labeled adjacency tables: all of them when few, seeded samples otherwise"""
    nodes = sorted(graph.nodes)
    index = {v: i for i, v in enumerate(nodes)}
    neighbors = [sorted(index[u] for u in graph.neighbors(v)) for v in nodes]
    total = 1
    for nbrs in neighbors:
        for k in range(2, len(nbrs) + 1):
            total *= k
    if total <= cap:
        orders = itertools.product(*(itertools.permutations(nbrs) for nbrs in neighbors))
    else:
        orders = []
        for _ in range(samples):
            orders.append(tuple(tuple(rng.sample(nbrs, len(nbrs))) for nbrs in neighbors))
    tables = []
    for order in orders:
        table = []
        for v, ports in enumerate(order):
            table.append([(u, order[u].index(v)) for u in ports])
        tables.append(table)
    return tables


def uxs_corpus(n_max: int, seed: int = 0, labeling_cap: int = 1500, samples: int = 4) -> List[List[List[Tuple[int, int]]]]:
    """
    Port-labeled connected graphs with 2..n_max nodes.

    Graphs up to 7 nodes come from the networkx atlas; 8-node graphs are
    seeded random samples. Labelings are exhaustive while their count stays
    under `labeling_cap`, which covers every graph with at most 4 nodes.
    """
    rng = random.Random(seed)
    graphs = [
        g for g in nx.graph_atlas_g()
        if 2 <= g.number_of_nodes() <= min(n_max, 7) and nx.is_connected(g)
    ]
    if n_max >= 8:
        for m in range(7, 15):
            g = nx.gnm_random_graph(8, m, seed=rng.randrange(1 << 30))
            if nx.is_connected(g):
                graphs.append(g)
    tables = []
    for g in graphs:
        tables.extend(_labelings(g, labeling_cap, samples if g.number_of_nodes() <= 5 else 1, rng))
    return tables


def _shortest_cover_segment(table, node: int, entry: int, visited: int, alphabet: range) -> List[int]:
    """Symbols leading the walk from (node, entry) through every unvisited node"""
    full = (1 << len(table)) - 1
    segment: List[int] = []
    while visited != full:
        start = (node, entry)
        parents = {start: None}
        queue = deque([start])
        goal = None
        while queue:
            state = queue.popleft()
            v, p = state
            for symbol in alphabet:
                u, q = table[v][uxs_step(p, symbol, len(table[v]))]
                nxt = (u, q)
                if nxt in parents:
                    continue
                parents[nxt] = (state, symbol)
                if not visited >> u & 1:
                    goal = nxt
                    break
                queue.append(nxt)
            if goal is not None:
                break
        symbols = []
        state = goal
        while parents[state] is not None:
            state, symbol = parents[state]
            symbols.append(symbol)
        symbols.reverse()
        for symbol in symbols:
            exit_port = uxs_step(entry, symbol, len(table[node]))
            node, entry = table[node][exit_port]
            visited |= 1 << node
        segment.extend(symbols)
    return segment


def find_uxs(n_max: int, max_length: int = 200_000, seed: int = 0) -> List[int]:
    """
    Build a sequence that explores every corpus graph with at most n_max nodes
    from every start node and entry port.

    Walks are advanced together; while some walk is uncovered, the shortest
    segment that completes the first such walk is appended.
    """
    if not 2 <= n_max <= 8:
        raise ValueError("sequence search supports 2 <= n_max <= 8")
    alphabet = range(max(1, n_max - 1))
    walks = []
    for table in uxs_corpus(n_max, seed=seed):
        full = (1 << len(table)) - 1
        for start in range(len(table)):
            for entry in range(len(table[start])):
                walks.append([table, start, entry, 1 << start, full])
    sequence: List[int] = []
    pending = [w for w in walks if w[3] != w[4]]
    while pending:
        table, node, entry, visited, _ = pending[0]
        segment = _shortest_cover_segment(table, node, entry, visited, alphabet)
        for symbol in segment:
            for walk in pending:
                t, v, p = walk[0], walk[1], walk[2]
                u, q = t[v][uxs_step(p, symbol, len(t[v]))]
                walk[1], walk[2] = u, q
                walk[3] |= 1 << u
        sequence.extend(segment)
        if len(sequence) > max_length:
            raise UxsSearchExhausted(f"sequence for n_max={n_max} exceeded {max_length} symbols")
        pending = [w for w in pending if w[3] != w[4]]
    logger.info("built exploration sequence for n_max=%d: %d symbols, %d walks", n_max, len(sequence), len(walks))
    return sequence or [0]


class UxsLibrary:
    """
    Sequences per size bound, memoized in memory and optionally in a database.

    Args:
        database: Object with get_uxs(n) / save_uxs(n, seq), or None
    """

    def __init__(self, database=None):
        self.database = database
        self._cache: Dict[int, List[int]] = {}

    def get(self, n_max: int) -> List[int]:
        if n_max not in self._cache:
            stored = self.database.get_uxs(n_max) if self.database else None
            if stored is None:
                stored = find_uxs(n_max)
                if self.database:
                    self.database.save_uxs(n_max, stored)
            self._cache[n_max] = stored
        return self._cache[n_max]


# Exploration backends

class ExplorationBackend(ABC):
    """Single-agent perpetual walk: given the entry port, choose the exit port"""

    name = "backend"

    def __init__(self):
        self.cycles_completed = 0

    @abstractmethod
    def next_port(self, node: NodeId, entry: Port, degree: int) -> Port:
        ...

    def first_port(self, node: NodeId, degree: int) -> Port:
        return self.next_port(node, -1, degree)


class DfsBackend(ExplorationBackend):
    """
    Whiteboard DFS with node storage that restarts with a new epoch once a
    pass ends back at the root. Ports are tried in ascending order.
    """

    name = "dfs"

    def __init__(self):
        super().__init__()
        self._storage: Dict[NodeId, Tuple[int, Port, Port]] = {}
        self._epoch = 0
        self._arrived_exploring = False

    def next_port(self, node: NodeId, entry: Port, degree: int) -> Port:
        record = self._storage.get(node)
        if record is None or record[0] != self._epoch:
            parent = entry
            for p in range(degree):
                if p != parent:
                    return self._leave(node, parent, p, exploring=True)
            if parent != -1:
                return self._leave(node, parent, parent, exploring=False)
            raise ConfigurationError("exploration needs a node with at least one edge")
        if self._arrived_exploring:
            self._arrived_exploring = False
            return entry
        _, parent, recent = record
        if recent != parent:
            for p in range(recent + 1, degree):
                if p != parent:
                    return self._leave(node, parent, p, exploring=True)
        if parent != -1:
            return self._leave(node, parent, parent, exploring=False)
        self._epoch += 1
        self.cycles_completed += 1
        return self.next_port(node, -1, degree)

    def _leave(self, node: NodeId, parent: Port, port: Port, exploring: bool) -> Port:
        self._storage[node] = (self._epoch, parent, port)
        self._arrived_exploring = exploring
        return port


class UxsBackend(ExplorationBackend):
    """
    Walk driven by exploration sequences: exit = (entry + symbol) mod degree.

    Without a known size the sequences for guesses 2, 4, 8, ... are used in
    turn; guesses above `max_n` reuse the largest sequence. With a known size
    its sequence repeats forever. Entry port 0 is assumed at the start.
    """

    def __init__(self, library: UxsLibrary, known_n: Optional[int] = None, max_n: int = 6):
        super().__init__()
        self.library = library
        self.known_n = known_n
        self.max_n = max_n
        self.name = "uxs-known-n" if known_n is not None else "uxs"
        self._guesses = guess_schedule()
        self._sequence: List[int] = []
        self._cursor = 0
        self._load_next()

    def _load_next(self):
        if self.known_n is not None:
            size = max(2, min(self.known_n, 8))
        else:
            size = min(next(self._guesses), self.max_n)
        self._sequence = self.library.get(size)
        self._cursor = 0

    def cycle_sizes(self) -> List[int]:
        """Sizes whose sequences make up one full cycle of the walk"""
        if self.known_n is not None:
            return [max(2, min(self.known_n, 8))]
        sizes = []
        for guess in guess_schedule():
            sizes.append(min(guess, self.max_n))
            if guess >= self.max_n:
                return sizes
        return sizes

    def next_port(self, node: NodeId, entry: Port, degree: int) -> Port:
        if self._cursor >= len(self._sequence):
            self.cycles_completed += 1
            self._load_next()
        symbol = self._sequence[self._cursor]
        self._cursor += 1
        return uxs_step(max(entry, 0), symbol, degree)


BackendFactory = Callable[[], ExplorationBackend]


def make_backend_factory(kind: str, fp: Footprint, library: Optional[UxsLibrary] = None, max_n: int = 6) -> BackendFactory:
    """Factory for `dfs`, `uxs` or `uxs-known-n` backends"""
    if kind == "dfs":
        return DfsBackend
    library = library or UxsLibrary()
    if kind == "uxs":
        return lambda: UxsBackend(library, max_n=max_n)
    if kind == "uxs-known-n":
        if fp.node_count > 8:
            raise ConfigurationError("uxs-known-n supports graphs with at most 8 nodes")
        return lambda: UxsBackend(library, known_n=fp.node_count)
    raise ConfigurationError(f"unknown backend {kind!r}")


def single_walk(fp: Footprint, home: NodeId, backend: ExplorationBackend, moves: int) -> List[NodeId]:
    """Node sequence of the plain single-agent walk"""
    node, entry = home, -1
    visited = [home]
    for _ in range(moves):
        port = backend.next_port(node, entry, fp.degree(node))
        node, entry = fp.neighbor_via_port(node, port)
        visited.append(node)
    return visited


def exploration_period(fp: Footprint, home: NodeId, factory: BackendFactory) -> int:
    """Ticks of one full walk cycle, counting every move as a forward round"""
    backend = factory()
    if isinstance(backend, UxsBackend):
        moves = sum(len(backend.library.get(size)) for size in backend.cycle_sizes())
    else:
        node, entry, moves = home, -1, 0
        while backend.cycles_completed == 0:
            port = backend.next_port(node, entry, fp.degree(node))
            node, entry = fp.neighbor_via_port(node, port)
            moves += 1
    return FORWARD_TICKS * moves + 1


# Chain simulation

@dataclass(frozen=True)
class Emergence:
    node: NodeId
    tick: int


@dataclass
class ChainState:
    """Configuration between rounds: a1, a2 at v1 and a3, a4 at v2"""
    v1: NodeId
    v2: NodeId
    p1: Port
    p2: Port
    roles: Tuple[int, int, int, int] = (1, 2, 3, 4)
    round_no: int = 0
    p3: Port = -1
    p3_entry: Port = -1
    sub_round: int = 0

    @property
    def backward(self) -> bool:
        return self.p3 == self.p2


class ChainWorld:
    """
    Ground truth for one EBHS run: positions, deaths and the emerging black hole.

    Args:
        footprint: Static graph
        home: Start node of all four agents
        emergence: When and where the black hole appears, or None
        roles: Agent ids for a1..a4
    """

    def __init__(
        self,
        footprint: Footprint,
        home: NodeId,
        emergence: Optional[Emergence],
        roles: Tuple[int, int, int, int] = (1, 2, 3, 4),
    ):
        self.footprint = footprint
        self.home = home
        self.emergence = emergence
        self.roles = roles
        self.positions: Dict[int, NodeId] = {aid: home for aid in roles}
        self.alive: Dict[int, bool] = {aid: True for aid in roles}
        self.black_hole: Optional[NodeId] = None
        self.tick = 0
        self.round_no = 0
        self.sub_round = 0
        self.events: List[TraceEvent] = []
        self.declarations: List[Detection] = []
        self.declaration_ticks: List[int] = []
        self.informed: Dict[int, Detection] = {}
        self.tick_index: Dict[Tuple[int, int], int] = {}
        self.round_starts: List[int] = []
        self.halted = False
        self.moves: Dict[int, int] = {aid: 0 for aid in roles}

    def begin_tick(self, round_no: int, sub_round: int):
        self.round_no, self.sub_round = round_no, sub_round
        self.tick_index[(round_no, sub_round)] = self.tick
        if sub_round == 1:
            self.round_starts.append(self.tick)
        if self.emergence and self.black_hole is None and self.tick == self.emergence.tick:
            self.black_hole = self.emergence.node
            self._emit(0, EventKind.EMERGED, self.black_hole)
            for aid in self.roles:
                if self.alive[aid] and self.positions[aid] == self.black_hole:
                    self.alive[aid] = False
                    self._emit(aid, EventKind.DIED, self.black_hole, "emergence")

    def end_tick(self):
        self.tick += 1

    def here(self, aid: int, node: NodeId) -> bool:
        return self.alive[aid] and self.positions[aid] == node

    def move(self, aid: int, port: Port):
        if not self.alive[aid]:
            return
        origin = self.positions[aid]
        dest, _ = self.footprint.neighbor_via_port(origin, port)
        self.positions[aid] = dest
        self.moves[aid] += 1
        self._emit(aid, EventKind.MOVE_OK, origin, f"port {port} to {dest}")
        if dest == self.black_hole:
            self.alive[aid] = False
            self._emit(aid, EventKind.DIED, dest)

    def declare(self, aid: int, node: NodeId, port: Port):
        detection = Detection(aid, node, port, self.sub_round)
        self.declarations.append(detection)
        self.declaration_ticks.append(self.tick)
        self._emit(aid, EventKind.DECLARED_BH, node, str(port))
        logger.info("tick %d: agent %d declares port %d at node %d", self.tick, aid, port, node)

    def inform(self, aid: int, detection: Detection):
        self.informed[aid] = detection
        self._emit(aid, EventKind.INFORMED, self.positions[aid], f"{detection.node}:{detection.port}")

    def _emit(self, aid: int, kind: EventKind, at: NodeId, detail: str = ""):
        self.events.append(TraceEvent(self.round_no, self.sub_round, aid, kind, at, detail))

    def header(self, backend: str, period: int, latency_bound: int) -> dict:
        fp = self.footprint
        edges = [
            [e.u, e.v, fp.port_towards(e.u, e.v), fp.port_towards(e.v, e.u)]
            for e in fp.edges
        ]
        return {
            "schema": SCHEMA_VERSION,
            "kind": "header",
            "model": "ebhs",
            "graph": fp.name,
            "n": fp.node_count,
            "m": fp.edge_count,
            "edges": edges,
            "home": self.home,
            "emergence": [self.emergence.node, self.emergence.tick] if self.emergence else None,
            "agents": list(self.roles),
            "algorithm": "ebhs",
            "backend": backend,
            "period_ticks": period,
            "latency_bound_ticks": latency_bound,
            "round_starts": list(self.round_starts),
        }


def round_zero(world: ChainWorld, backend: ExplorationBackend) -> ChainState:
    """a3 and a4 leave home through the walk's first port; a1 and a2 stay"""
    fp = world.footprint
    a1, a2, a3, a4 = world.roles
    world.begin_tick(0, 1)
    port = backend.first_port(world.home, fp.degree(world.home))
    dest, entry = fp.neighbor_via_port(world.home, port)
    world.move(a3, port)
    world.move(a4, port)
    world.end_tick()
    return ChainState(v1=world.home, v2=dest, p1=port, p2=entry, roles=world.roles, round_no=0)


def chain_round(state: ChainState, backend: ExplorationBackend, world: ChainWorld) -> ChainState:
    """
    Simulate the walk's next move with the four-agent chain.

    Sets world.halted once a declaration has been made; otherwise returns
    the configuration for the following round.
    """
    fp = world.footprint
    a1, a2, a3, a4 = state.roles
    v1, v2, p1, p2 = state.v1, state.v2, state.p1, state.p2
    p3 = backend.next_port(v2, p2, fp.degree(v2))
    r = state.round_no + 1
    state = ChainState(v1, v2, p1, p2, state.roles, r, p3=p3)

    def declared_in(sub_round: int, body: Callable[[], None]) -> bool:
        world.begin_tick(r, sub_round)
        before = len(world.declarations)
        body()
        world.end_tick()
        return len(world.declarations) > before

    if state.backward:
        def sr1():
            world.move(a3, p2)

        def sr2():
            if world.here(a1, v1) or world.here(a2, v1):
                if not world.here(a3, v1):
                    world.declare(a1 if world.alive[a1] else a2, v1, p1)
                    return
                world.move(a1, p1)
                world.move(a2, p1)

        def sr3():
            if world.here(a4, v2):
                if not (world.here(a1, v2) or world.here(a2, v2)):
                    world.declare(a4, v2, p2)
                    return
                world.move(a4, p2)

        def sr4():
            if world.here(a3, v1) and not world.here(a4, v1):
                world.declare(a3, v1, p1)

        for sub_round, body in enumerate((sr1, sr2, sr3, sr4), start=1):
            if declared_in(sub_round, body):
                world.halted = True
                return state
        return ChainState(v1=v2, v2=v1, p1=p2, p2=p1, roles=state.roles, round_no=r)

    v3, p3_entry = fp.neighbor_via_port(v2, p3)
    state.p3_entry = p3_entry
    carried: List[Detection] = []

    def fsr1():
        world.move(a3, p2)

    def fsr2():
        if (world.here(a1, v1) or world.here(a2, v1)) and not world.here(a3, v1):
            world.declare(a1 if world.alive[a1] else a2, v1, p1)
        if world.here(a3, v1):
            world.move(a3, p1)

    def fsr3():
        if world.here(a4, v2):
            if not world.here(a3, v2):
                world.declare(a4, v2, p2)
            else:
                world.move(a4, p3)
        if world.here(a2, v1):
            world.move(a2, p1)

    def fsr4():
        if world.here(a3, v2) and not world.here(a2, v2):
            world.declare(a3, v2, p2)
        if world.here(a2, v2):
            world.move(a2, p2)

    def fsr5():
        if world.here(a1, v1) and not world.here(a2, v1):
            world.declare(a1, v1, p1)
            return
        if world.here(a1, v1) or world.here(a2, v1):
            world.move(a1, p1)
            world.move(a2, p1)

    def fsr6():
        if world.here(a3, v2):
            if not (world.here(a1, v2) or world.here(a2, v2)):
                world.declare(a3, v2, p2)
                carried.append(world.declarations[-1])
            world.move(a3, p3)

    def fsr7():
        if world.here(a4, v3):
            if not world.here(a3, v3):
                world.declare(a4, v3, p3_entry)
            elif carried:
                world.inform(a4, carried[0])

    for sub_round, body in enumerate((fsr1, fsr2, fsr3, fsr4, fsr5, fsr6, fsr7), start=1):
        declared = declared_in(sub_round, body)
        if declared and not (sub_round == 6 and carried):
            world.halted = True
            return state
    if carried:
        world.halted = True
        return state
    return ChainState(v1=v2, v2=v3, p1=p3, p2=p3_entry, roles=state.roles, round_no=r)


def validate_ebhs(fp: Footprint, home: NodeId, emergence: Optional[Emergence]):
    if fp.node_count < 2:
        raise ConfigurationError("eventual black hole search needs at least two nodes")
    if not 0 <= home < fp.node_count:
        raise ConfigurationError(f"home {home} is not a node")
    if fp.degree(home) == 0:
        raise ConfigurationError("home has no edge to traverse")
    if emergence is not None:
        if not 0 <= emergence.node < fp.node_count:
            raise ConfigurationError(f"emergence node {emergence.node} is not a node")
        if emergence.tick < 0:
            raise ConfigurationError("emergence tick must be non-negative")
        if emergence.node == home and emergence.tick == 0:
            raise ConfigurationError("the black hole cannot emerge at home in round 0")


def run_ebhs(
    fp: Footprint,
    home: NodeId,
    factory: BackendFactory,
    emergence: Optional[Emergence] = None,
    horizon_ticks: Optional[int] = None,
    roles: Tuple[int, int, int, int] = (1, 2, 3, 4),
) -> SimResult:
    """
    Run the four-agent chain until a declaration or the tick horizon.

    Args:
        fp: Static footprint
        home: Start node
        factory: Creates the exploration backend
        emergence: Emergence node and tick, or None for a control run
        horizon_ticks: Tick limit (defaults to emergence tick + 10 periods,
            or 3 periods for control runs)
        roles: Agent ids for a1..a4
    """
    validate_ebhs(fp, home, emergence)
    period = exploration_period(fp, home, factory)
    if horizon_ticks is None:
        horizon_ticks = emergence.tick + 10 * period if emergence else 3 * period
    backend = factory()
    world = ChainWorld(fp, home, emergence, roles)
    state = round_zero(world, backend)
    while not world.halted and world.tick < horizon_ticks:
        state = chain_round(state, backend, world)
    header = world.header(backend.name, period, latency_bound_ticks(fp, backend, period))
    outcome = _ebhs_outcome(world)
    logger.info(
        "ebhs/%s on %s: %s after %d ticks", backend.name, fp.name, outcome.verdict.value, world.tick,
    )
    return SimResult(outcome=outcome, trace=Trace(header, list(world.events)), world=world)


def latency_bound_ticks(fp: Footprint, backend: ExplorationBackend, period: int) -> int:
    """
    Ticks allowed between emergence and the first declaration.

    A DFS pass takes at most 4m moves; sequence walks may need the rest of
    the current cycle plus a full one.
    """
    if isinstance(backend, DfsBackend):
        return FORWARD_TICKS * (4 * fp.edge_count + 4)
    return 2 * period + 4 * FORWARD_TICKS


def _ebhs_outcome(world: ChainWorld) -> SimOutcome:
    fp = world.footprint
    verdict, violation = Verdict.SOLVED, None
    for d in world.declarations:
        target, _ = fp.neighbor_via_port(d.node, d.port)
        if world.black_hole is None or target != world.black_hole:
            verdict = Verdict.VIOLATION
            violation = f"false declaration by agent {d.declarer}: node {d.node} port {d.port}"
            break
    else:
        if world.emergence is not None and not world.declarations:
            verdict = Verdict.UNSOLVED_HORIZON
    if verdict == Verdict.SOLVED and not any(world.alive.values()):
        verdict, violation = Verdict.VIOLATION, "no agent survived"
    dead = [aid for aid, ok in world.alive.items() if not ok]
    latency = None
    if world.declarations and world.emergence is not None:
        latency = world.declaration_ticks[0] - world.emergence.tick
    return SimOutcome(
        detected=list(world.declarations),
        deaths=len(dead),
        dead_ids=dead,
        rounds_elapsed=world.round_no,
        blocked_rounds=0,
        verdict=verdict,
        violation=violation,
        moves=dict(world.moves),
        extra={
            "ticks": world.tick,
            "latency_ticks": latency,
            "informed": {str(k): [v.node, v.port] for k, v in world.informed.items()},
        },
    )


def resolve_emergence_tick(
    fp: Footprint, home: NodeId, factory: BackendFactory, round_no: int, sub_round: Optional[int] = None
) -> int:
    """Tick of (round, sub-round) in the emergence-free schedule"""
    sub_round = 1 if sub_round is None else sub_round
    if round_no == 0:
        if sub_round != 1:
            raise ConfigurationError("round 0 has a single sub-round")
        return 0
    backend = factory()
    world = ChainWorld(fp, home, None)
    state = round_zero(world, backend)
    while world.round_no < round_no:
        state = chain_round(state, backend, world)
    key = (round_no, sub_round)
    if key not in world.tick_index:
        raise ConfigurationError(f"round {round_no} has no sub-round {sub_round}")
    return world.tick_index[key]
