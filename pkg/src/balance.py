"""
Load dissemination and target selection

Includes:

- ```GossipConfig``` and the per-node ```LoadView``` (gossiped reports + local in-flight estimators)
- ```gossip_round``` and the push-pull merge of ```GossipSyn``` / ```GossipAck```
- ```load_balance_metric``` (standard deviation of node loads over their mean)
- ```select_targets```: eligible responsible nodes first, then the least loaded
"""

import heapq
import logging
from collections import deque, namedtuple
from dataclasses import dataclass

import numpy as np

from errors import ConfigError, UnsatisfiableDhr
from messages import GossipAck, GossipSyn
from settings import LOAD_REFRESH_MS, NS_PER_MS, SYNC_INTERVAL_MS

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GossipConfig:
    """
    Attributes:
        sync_interval (int): ns between two gossip rounds of a node
        load_refresh (int): ns between two refreshes of a node's own load report
    """
    sync_interval: int = SYNC_INTERVAL_MS * NS_PER_MS
    load_refresh: int = LOAD_REFRESH_MS * NS_PER_MS

    def __post_init__(self):
        if self.sync_interval <= 0 or self.load_refresh <= 0:
            raise ConfigError('gossip intervals must be positive')

    def initial_offset(self, rng):
        """Random start in [0, sync_interval) so that nodes do not gossip in lockstep"""
        return int(rng.integers(0, self.sync_interval))


class LoadView:
    """
    What one node believes about the load of every node

    A node only sees its own sends between two reports. With ```senders``` above 1 it assumes that many nodes
    send like it does, so a reported deficit is shared out instead of being refilled by every sender at once.

    Attributes:
        owner: Node holding the view
        senders (int): Nodes the own estimators stand for
        resolution (int): Send times are rounded down to a multiple of it; report times should be multiples too
        now (int): Time stamped on new estimator entries, see ```advance```
        reported (dict): node -> (load in bytes, report time in ns)
        estimators (dict): node -> bytes this node sent there since the last report it knows of
        sent (dict): node -> deque of [send time, bytes] making up the estimator
    """

    def __init__(self, owner, senders=1, resolution=1):
        if senders < 1 or resolution < 1:
            raise ConfigError(f'senders and resolution must be at least 1, got {senders} and {resolution}')
        self.owner = owner
        self.senders = senders
        self.resolution = resolution
        self.now = 0
        self.reported = {}
        self.estimators = {}
        self.sent = {}

    def advance(self, now):
        self.now = now - now % self.resolution

    def effective_load(self, node_id):
        load = self.reported.get(node_id, (0, -1))[0]
        return load + self.senders * self.estimators.get(node_id, 0)

    def record(self, node_id, nbytes):
        """Account for data on its way to ```node_id```, sent at ```now```"""
        self.estimators[node_id] = self.estimators.get(node_id, 0) + nbytes
        sent = self.sent.setdefault(node_id, deque())
        if sent and sent[-1][0] == self.now:
            sent[-1][1] += nbytes
        else:
            sent.append([self.now, nbytes])

    def merge(self, reported):
        """
        Take every strictly newer report; sends from before its time are part of it and leave the estimator

        Returns the nodes whose report changed
        """
        changed = []
        for node_id, (load, at) in reported.items():
            current = self.reported.get(node_id)
            if current is not None and at <= current[1]:
                continue
            self.reported[node_id] = (load, at)
            sent = self.sent.get(node_id)
            while sent and sent[0][0] < at:
                self.estimators[node_id] -= sent.popleft()[1]
            if not sent:
                self.estimators.pop(node_id, None)
            changed.append(node_id)
        return changed

    def refresh_own(self, load, now):
        self.merge({self.owner: (load, now)})

    def snapshot(self):
        return dict(self.reported)


def gossip_round(state, now, rng):
    """Push the own view to one uniformly random peer (None in a single node cluster)"""
    peers = [n for n in state.ring.nodes if n != state.node_id]
    if not peers:
        return None
    peer = peers[int(rng.integers(len(peers)))]
    return GossipSyn(src=state.node_id, dst=peer, reported=state.load_view.snapshot())


def on_gossip_syn(state, msg):
    """Merge the pushed view and answer with our own (pull)"""
    state.load_view.merge(msg.reported)
    return GossipAck(src=state.node_id, dst=msg.src, reported=state.load_view.snapshot())


def on_gossip_ack(state, msg):
    state.load_view.merge(msg.reported)


def load_balance_metric(loads):
    """
    Population standard deviation of the loads normalized by their mean

    0 means perfectly even; an all-zero cluster counts as even
    """
    loads = np.asarray(loads, dtype=float)
    if loads.size == 0:
        raise ValueError('no loads given')
    mean = loads.mean()
    if mean == 0:
        return 0.0
    return float(loads.std() / mean)


Selection = namedtuple('Selection', ['targets', 'degraded'])


def select_targets(eligible, responsible, r, view, size, record=True, rng=None):
    """
    Pick up to ```r``` targets

    Eligible responsible nodes come first (ring order), the rest are filled by ascending effective load.
    Equal loads go to a random node when ```rng``` is given, otherwise to the lowest id. With ```record``` the
    view's estimators grow by ```size``` for every chosen node.

    Returns a ```Selection```; ```degraded``` is set when fewer than ```r``` nodes are eligible
    """
    eligible = list(eligible)
    if not eligible:
        raise UnsatisfiableDhr('no eligible node')

    allowed = set(eligible)
    chosen = [n for n in responsible if n in allowed][:r]
    missing = r - len(chosen)
    if missing > 0:
        rest = [n for n in eligible if n not in chosen]
        order = range(len(rest)) if rng is None else rng.permutation(len(rest)).tolist()
        ranked = heapq.nsmallest(missing, zip(rest, order), key=lambda p: (view.effective_load(p[0]), p[1]))
        chosen += [n for n, _ in ranked]

    if record:
        for n in chosen:
            view.record(n, size)
    return Selection(chosen, len(eligible) < r)
