"""Slot-level protocol state machine for N contending CSMA/CA nodes.

This is the readable reference implementation of one simulation slot.  The
pure-Python kernel drives it directly; the compiled kernel reimplements the
identical logic (including the random-draw order) for speed, and a parity
test holds the two to bit-identical outputs.

Slot timing convention: a node's state at the start of slot m is the chain
state "at time m".  Arrivals are applied at the slot start; a node activated
out of idle this slot occupies its freshly drawn counter state and neither
transmits nor decrements until the next slot.  Minimum system time is
therefore one slot.  Ages are sampled at slot ends; a delivery in slot m of
a packet generated in slot u resets the node's age to m - u + 1.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

IDLE = -1

# Per-slot channel outcomes.
OUTCOME_IDLE = 0
OUTCOME_SUCCESS = 1
OUTCOME_COLLISION = 2


@dataclass
class NodeState:
    """Protocol state of one node.

    stage/counter are -1 while the buffer is empty (the idle state).
    ``queue`` holds generation slots of buffered packets, head first.
    ``hol_start`` is the slot in which the head packet entered service.
    ``activated_at`` marks the slot of the most recent idle->backlogged
    transition; the node sits out that slot's contention.
    """

    stage: int = IDLE
    counter: int = IDLE
    queue: deque = field(default_factory=deque)
    aoi: int = 0
    hol_start: int = 0
    last_delivered_generation: int | None = None
    activated_at: int = -1

    @property
    def is_idle(self):
        return self.stage == IDLE


@dataclass(frozen=True)
class SlotOutcome:
    """What the channel carried in one slot."""

    kind: int                      # OUTCOME_IDLE / OUTCOME_SUCCESS / OUTCOME_COLLISION
    transmitters: tuple            # node indices that attempted
    delivered_node: int = -1       # only for OUTCOME_SUCCESS
    delivered_generation: int = -1
    system_time: int = -1          # delivery slot - generation slot
    service_time: int = -1         # delivery slot - hol_start + 1


class SlotWorld:
    """All node states plus the slot index; advances one slot at a time."""

    def __init__(self, n_nodes, packet_rate, min_window, stage_cap=24):
        self.n_nodes = n_nodes
        self.packet_rate = packet_rate
        self.min_window = min_window
        self.stage_cap = stage_cap
        self.nodes = [NodeState() for _ in range(n_nodes)]
        self.slot = 0

    def window(self, stage):
        """Window at a stage; doubling stops at stage_cap."""
        return self.min_window << min(stage, self.stage_cap)

    def step(self, rng):
        """Advance one slot; returns the channel outcome.

        Order of operations (and of random draws): per-node arrivals in node
        order (an arrival at an idle node immediately draws its stage-0
        counter); contention resolution; on success one fresh counter draw if
        the queue is non-empty; on collision fresh counter draws in node
        order; freeze/decrement; age updates.
        """
        m = self.slot
        p = self.packet_rate
        w0 = self.min_window

        for node in self.nodes:
            if rng.next_double() < p:
                node.queue.append(m)
                if node.is_idle:
                    node.stage = 0
                    node.counter = rng.next_below(w0)
                    node.activated_at = m
                    node.hol_start = m + 1

        transmitters = tuple(
            n for n, node in enumerate(self.nodes)
            if not node.is_idle and node.activated_at != m and node.counter == 0
        )

        outcome = SlotOutcome(OUTCOME_IDLE, transmitters)
        if len(transmitters) == 1:
            n = transmitters[0]
            node = self.nodes[n]
            generation = node.queue.popleft()
            outcome = SlotOutcome(
                OUTCOME_SUCCESS, transmitters,
                delivered_node=n,
                delivered_generation=generation,
                system_time=m - generation,
                service_time=m - node.hol_start + 1,
            )
            node.last_delivered_generation = generation
            if node.queue:
                node.stage = 0
                node.counter = rng.next_below(w0)
                node.hol_start = m + 1
            else:
                node.stage = IDLE
                node.counter = IDLE
        elif len(transmitters) >= 2:
            outcome = SlotOutcome(OUTCOME_COLLISION, transmitters)
            for n in transmitters:
                node = self.nodes[n]
                node.stage += 1
                node.counter = rng.next_below(self.window(node.stage))

        if not transmitters:
            # Quiet channel: every backlogged node not activated this slot
            # counts down.  (All such nodes have counter >= 1 here.)
            for node in self.nodes:
                if not node.is_idle and node.activated_at != m:
                    node.counter -= 1

        for n, node in enumerate(self.nodes):
            if n == outcome.delivered_node:
                node.aoi = m - outcome.delivered_generation + 1
            else:
                node.aoi += 1

        self.slot = m + 1
        return outcome
