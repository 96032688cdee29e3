"""
Adversary - Per-round missing-edge choice for 1-bounded 1-interval graphs

Strategies propose at most one missing edge per round; `decide` coerces any
proposal that would disconnect the footprint to "no edge missing".
"""

import logging
import random
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Hashable, List, Optional, Tuple, Union

from .graph import EdgeId, Footprint, NodeId, Port
from .runtime import AgentMode, AgentState, ConfigurationError, Whiteboard

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdversaryView:
    """Read-only start-of-round state, plus the moves agents are about to make"""
    round_no: int
    footprint: Footprint
    agents: Tuple[AgentState, ...]
    whiteboards: Tuple[Whiteboard, ...]
    intents: Tuple[Tuple[int, NodeId, Port], ...] = ()


@dataclass(frozen=True)
class AdversaryDecision:
    missing: Optional[EdgeId] = None


class AdversaryStrategy(ABC):
    name: str = "adversary"

    @abstractmethod
    def propose(self, view: AdversaryView) -> Optional[EdgeId]:
        ...

    def state_key(self) -> Hashable:
        """Internal state relevant for memoized search"""
        return self.name


def decide(strategy: AdversaryStrategy, view: AdversaryView) -> AdversaryDecision:
    """Ask the strategy and reject choices that break connectivity"""
    proposed = strategy.propose(view)
    if proposed is None:
        return AdversaryDecision()
    check = view.footprint.validate_snapshot(proposed)
    if not check.ok:
        logger.warning(
            "round %d: %s proposed %s which disconnects the graph; no edge removed",
            view.round_no, strategy.name, proposed,
        )
        return AdversaryDecision()
    return AdversaryDecision(missing=proposed)


def enumerate_decisions(fp: Footprint) -> List[AdversaryDecision]:
    """None followed by every non-bridge edge in canonical order"""
    decisions = [AdversaryDecision()]
    decisions.extend(AdversaryDecision(e) for e in fp.edges if e not in fp.bridges)
    return decisions


class NoAdversary(AdversaryStrategy):
    name = "none"

    def propose(self, view: AdversaryView) -> Optional[EdgeId]:
        return None


class ScriptedAdversary(AdversaryStrategy):
    """Replays a fixed round -> edge script"""

    def __init__(self, script: Dict[int, EdgeId], name: str = "script"):
        self.script = dict(script)
        self.name = name

    def propose(self, view: AdversaryView) -> Optional[EdgeId]:
        return self.script.get(view.round_no)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ScriptedAdversary":
        """Parse `round u v` lines"""
        script: Dict[int, EdgeId] = {}
        for line in Path(path).read_text().splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            try:
                round_no, u, v = (int(x) for x in line.split())
            except ValueError as e:
                raise ConfigurationError(f"bad script line {line!r}") from e
            script[round_no] = EdgeId.of(u, v)
        return cls(script, name=f"script:{path}")


class RandomAdversary(AdversaryStrategy):
    """Uniform choice over the legal decisions, seeded"""

    def __init__(self, seed: int):
        self.seed = seed
        self.name = f"random:{seed}"
        self._rng = random.Random(seed)
        self._choices: Optional[List[AdversaryDecision]] = None

    def propose(self, view: AdversaryView) -> Optional[EdgeId]:
        if self._choices is None:
            self._choices = enumerate_decisions(view.footprint)
        return self._rng.choice(self._choices).missing

    def state_key(self) -> Hashable:
        return (self.name, self._rng.getstate())


class BlockSmallestAdversary(AdversaryStrategy):
    """
    Removes the edge the smallest-ID scattered agent is about to cross.

    Agents inside a group or terminated are not targeted. Bridges are never
    proposed.
    """

    name = "block-smallest"

    def propose(self, view: AdversaryView) -> Optional[EdgeId]:
        eligible = {
            a.id for a in view.agents
            if a.alive and not a.grp and a.mode != AgentMode.TERMINATED
        }
        movers = sorted((aid, node, port) for aid, node, port in view.intents if aid in eligible)
        if not movers:
            return None
        _, node, port = movers[0]
        edge = view.footprint.edge_via_port(node, port)
        if edge in view.footprint.bridges:
            return None
        return edge


class PersistentAdversary(AdversaryStrategy):
    """Keeps one non-bridge edge missing forever"""

    def __init__(self, edge: EdgeId):
        self.edge = edge
        self.name = f"persistent:{edge.u},{edge.v}"

    def propose(self, view: AdversaryView) -> Optional[EdgeId]:
        return self.edge


class ForcedAdversary(AdversaryStrategy):
    """Decision injected from outside; used by the exhaustive oracle"""

    name = "forced"

    def __init__(self):
        self.next_missing: Optional[EdgeId] = None

    def propose(self, view: AdversaryView) -> Optional[EdgeId]:
        return self.next_missing

    def state_key(self) -> Hashable:
        return self.name


def parse_adversary(spec: str, fp: Optional[Footprint] = None) -> AdversaryStrategy:
    """
    Build a strategy from its CLI form.

    none | random:SEED | script:PATH | block-smallest | persistent:U,V
    """
    kind, _, arg = spec.partition(":")
    try:
        if kind == "none":
            return NoAdversary()
        if kind == "random":
            return RandomAdversary(int(arg))
        if kind == "script":
            return ScriptedAdversary.from_file(arg)
        if kind in ("block-smallest", "block_smallest"):
            return BlockSmallestAdversary()
        if kind == "persistent":
            u, v = (int(x) for x in arg.split(","))
            edge = EdgeId.of(u, v)
            if fp is not None and (not fp.has_edge(edge) or edge in fp.bridges):
                raise ConfigurationError(f"persistent edge {edge} is missing or a bridge")
            return PersistentAdversary(edge)
    except (ValueError, OSError) as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"bad adversary spec {spec!r}: {e}") from e
    raise ConfigurationError(f"unknown adversary {spec!r}")


def strategy_set(fp: Footprint, seeds: List[int]) -> List[str]:
    """The shipped strategy set for one footprint"""
    specs = ["none", "block-smallest"]
    specs.extend(f"random:{s}" for s in seeds)
    specs.extend(f"persistent:{e.u},{e.v}" for e in fp.edges if e not in fp.bridges)
    return specs
