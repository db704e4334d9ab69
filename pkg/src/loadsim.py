"""
Placement level simulation for the load balance experiments

Only what decides where data ends up is simulated: coordinator choice, responsible nodes, target selection
with each coordinator's load view, gossip rounds and load refreshes. Writes take effect instantly, so a
million inserts run in seconds instead of driving every protocol message through the event loop.
"""

import heapq
import logging
from collections import Counter, namedtuple

import numpy as np

from balance import GossipConfig, LoadView, load_balance_metric
from dhr import CapabilityStore, NodeCapabilities
from errors import UnsatisfiableDhr
from items import DataItem
from ring import RING_SIZE, TokenRing
from settings import NS_PER_MS

logger = logging.getLogger(__name__)

PlacementResult = namedtuple('PlacementResult', ['loads', 'balance', 'placed', 'unsatisfiable', 'degraded',
                                                 'demanded'])

GOSSIP, REFRESH = 0, 1


def simulate_placement(capabilities, registry, arrivals, strategy, replication=1, gossip=None, seed=0):
    """
    Place a stream of inserts

    Attributes:
        capabilities (list): Supported properties per node (node ids are the list positions)
        registry (Registry): DHR types
        arrivals (iterable): ```workload.Arrival``` of Insert statements
        strategy (PlacementStrategy): Target selection
        replication (int): Replication factor
        gossip (GossipConfig): Gossip cadence
        seed (int): Seed of every random choice

    Returns a ```PlacementResult```; ```demanded``` counts inserts per DHR request
    """
    gossip = gossip or GossipConfig()
    node_ids = list(range(len(capabilities)))
    ring = TokenRing.evenly_spaced(node_ids)

    store = CapabilityStore(registry)
    for node_id, supported in zip(node_ids, capabilities):
        store.announce(NodeCapabilities.build(node_id, supported, registry), 1)

    seeds = np.random.SeedSequence(seed).spawn(len(node_ids) + 1)
    rng = np.random.default_rng(seeds[-1])
    node_rngs = [np.random.default_rng(s) for s in seeds[:-1]]

    # every node coordinates an equal share of the inserts
    views = [LoadView(n, senders=len(node_ids), resolution=gossip.load_refresh) for n in node_ids]
    for view in views:
        view.refresh_own(0, 0)
    loads = [0] * len(node_ids)

    events = []
    for n in node_ids:
        events.append((gossip.initial_offset(node_rngs[n]), GOSSIP, n))
        events.append((gossip.load_refresh, REFRESH, n))
    heapq.heapify(events)

    eligible_of = {}
    demanded = Counter()
    placed = unsatisfiable = degraded = 0
    last = 0

    for arrival in arrivals:
        now = last = arrival.at
        while events and events[0][0] <= now:
            at, kind, n = heapq.heappop(events)
            if kind == GOSSIP:
                peers = len(node_ids) - 1
                if peers:
                    peer = int(node_rngs[n].integers(peers))
                    peer += peer >= n
                    views[peer].merge(views[n].snapshot())
                    views[n].merge(views[peer].snapshot())
                heapq.heappush(events, (at + gossip.sync_interval, GOSSIP, n))
            else:
                views[n].refresh_own(loads[n], at)
                heapq.heappush(events, (at + gossip.load_refresh, REFRESH, n))

        stmt = arrival.stmt
        req = stmt.req
        demanded[req] += 1
        eligible = eligible_of.get(req)
        if eligible is None:
            eligible = eligible_of[req] = store.eligible_nodes(req)

        size = DataItem(stmt.key, stmt.columns).size()

        coordinator = int(rng.integers(len(node_ids)))
        views[coordinator].advance(now)
        token = int(rng.integers(0, RING_SIZE, dtype=np.uint64))
        responsible = ring.responsible_for_token(token, replication)

        try:
            selection = strategy.select(eligible, responsible, replication, views[coordinator], size,
                                        node_rngs[coordinator])
        except UnsatisfiableDhr:
            unsatisfiable += 1
            continue
        for target in selection.targets:
            loads[target] += size
        placed += 1
        degraded += selection.degraded

    balance = load_balance_metric(loads)
    logger.info('%s placed %d items (%d unsatisfiable) up to %.1fms, balance %.6f', strategy, placed,
                unsatisfiable, last / NS_PER_MS, balance)
    return PlacementResult(loads, balance, placed, unsatisfiable, degraded, demanded)
