"""
Contains the central simulator class

Drives the node state machines of a cluster through a deterministic discrete event loop:

- events are kept in a heap and processed in strict (fire time, sequence number) order
- one-way delay of a message is RTT / 2 between the regions of its endpoints, plus optional uniform jitter
- every source of randomness is spawned from one master seed
- faults are applied when a message is delivered: crash a node, drop or delay the message

A crashed node receives nothing and fires no timers; its stores stay readable for snapshots.
Messages it sent before crashing are still delivered.
"""

import heapq
import logging
from collections import namedtuple

import numpy as np

from balance import load_balance_metric
from client import Client
from const import FAULT_CRASH, FAULT_DELAY, FAULT_DROP, TIMER_CLIENT, TIMER_EXPIRY, TIMER_GOSSIP, \
    TIMER_LOAD_REFRESH, TIMER_METRIC
from config import make_strategy
from coordinator import Coordinator
from dhr import CapabilityStore, NodeCapabilities
from errors import ConfigError, DhrkvError
from messages import ClientReply, Message, Timer
from node import NodeState, capability_bootstrap, local_apply, on_timer, snapshot
from recovery import global_scan
from ring import TokenRing
from settings import METRIC_INTERVAL_MS, NS_PER_MS, NS_PER_S
from stats import RunStats

logger = logging.getLogger(__name__)

ClusterEvent = namedtuple('ClusterEvent', ['fire_time', 'seq', 'payload'])
Deliver = namedtuple('Deliver', ['msg', 'faulted'])
Submit = namedtuple('Submit', ['stmt', 'ticket', 'coordinator'])

SETTLE_LIMIT = 3600 * NS_PER_S  # simulated time a settle may take at most


class Simulator:
    """
    A simulated cluster

    Attributes:
        config (ClusterConfig): Cluster configuration
        seed (int): Master seed
        now (int): Simulated time in ns
        nodes (dict): node id -> ```NodeState``` (with its ```Coordinator``` attached)
        ring (TokenRing): The partitioner, shared by all nodes
        client (Client): The client in front of the cluster
        down (set): Crashed nodes
        faults (FaultPlan): Injected faults
        stats (RunStats): Replies, traffic and metric rows
        trace (list): (time, kind, src, dst, op) per delivered message, None when not tracing
    """

    def __init__(self, config, seed, strategy=None, trace=False, metrics=False):
        self.config = config
        self.seed = seed
        self.topology = config.topology
        self.strategy = strategy or make_strategy(config.strategy)
        self.now = 0
        self.queue = []
        self.seq = 0

        node_ids = self.topology.node_ids
        seeds = np.random.SeedSequence(seed).spawn(len(node_ids) + 2)
        self.net_rng = np.random.default_rng(seeds[-2])
        client_rng = np.random.default_rng(seeds[-1])

        self.ring = TokenRing.evenly_spaced(node_ids, config.vnodes)
        self.capabilities = {}
        self.nodes = {}
        for spec, node_seed in zip(self.topology.nodes, seeds):
            caps = NodeCapabilities.build(spec.node_id, spec.capabilities, config.registry)
            self.capabilities[spec.node_id] = caps
            state = NodeState(spec.node_id, self.ring, config.registry, config.replication, caps,
                              rng=np.random.default_rng(node_seed), gossip=config.gossip,
                              expiry_sweep=config.expiry_sweep)
            state.coordinator = Coordinator(state, self.strategy, config.ack_timeout, config.retries, config.growth)
            self.nodes[spec.node_id] = state

        # the client ships with the registry and every node's capabilities
        shipped = CapabilityStore(config.registry)
        for caps in self.capabilities.values():
            shipped.announce(caps, 1)
        self.client = Client(shipped, self.ring, config.replication, client_rng, config.ack_timeout,
                             config.retries, config.growth)

        self.down = set()
        self.faults = config.fault_plan()
        self.stats = RunStats()
        self.trace = [] if trace else None
        self.metrics = metrics
        self.replies = {}  # ticket -> Reply
        self.in_flight = 0  # operation messages not yet delivered
        self.arrivals = 0  # submissions not yet handed to a coordinator
        self.bootstrapped = False

    def __str__(self):
        return (f'Simulator at {self.now / NS_PER_MS:.1f}ms: {len(self.nodes)} nodes, {len(self.down)} down, '
                f'{len(self.queue)} events')

    ############## Event queue ##############

    def schedule(self, at, payload):
        if at < self.now:
            raise ValueError(f'cannot schedule into the past ({at} < {self.now})')
        self.seq += 1
        heapq.heappush(self.queue, ClusterEvent(at, self.seq, payload))

    def set_timer(self, timer):
        self.schedule(timer.fire_at, timer)

    def delay(self, src, dst):
        delay = self.topology.one_way_ns(src, dst)
        if self.config.jitter > 0 and src != dst:
            delay += int(self.net_rng.integers(0, self.config.jitter))
        return delay

    def send(self, msg):
        if msg.dst not in self.nodes:
            raise DhrkvError(f'{msg.kind} addressed to unknown node {msg.dst!r}')
        self.stats.on_send(msg)
        if not msg.background:
            self.in_flight += 1
        self.schedule(self.now + self.delay(msg.src, msg.dst), Deliver(msg, False))

    def process(self, effects):
        for effect in effects:
            if isinstance(effect, Message):
                self.send(effect)
            elif isinstance(effect, Timer):
                self.set_timer(effect)
            elif isinstance(effect, ClientReply):
                self.on_client_reply(effect)
            else:
                raise TypeError(f'unknown effect {effect!r}')

    def next(self):
        """
        Process the next event

        Returns False when the queue is empty
        """
        if not self.queue:
            return False
        event = heapq.heappop(self.queue)
        self.now = event.fire_time
        payload = event.payload

        if isinstance(payload, Deliver):
            self.deliver(payload)
        elif isinstance(payload, Timer):
            self.fire(payload)
        elif isinstance(payload, Submit):
            self.arrivals -= 1
            self.start(payload)
        else:
            raise TypeError(f'unknown event payload {payload!r}')
        return True

    ############## Delivery ##############

    def finish_flight(self, msg):
        if not msg.background:
            self.in_flight -= 1

    def deliver(self, event):
        msg = event.msg
        if msg.dst in self.down:
            self.finish_flight(msg)
            self.stats.dropped += 1
            logger.debug('%.1fms %s %s -> %s lost, receiver down', self.now / NS_PER_MS, msg.kind, msg.src, msg.dst)
            return

        if not event.faulted:
            rule = self.faults.check(msg, self.now)
            if rule is not None:
                if rule.action == FAULT_DROP:
                    self.finish_flight(msg)
                    self.stats.dropped += 1
                    return
                if rule.action == FAULT_DELAY:
                    self.schedule(self.now + rule.extra_ns, Deliver(msg, True))
                    return
                if rule.action == FAULT_CRASH:
                    self.crash(rule.victim_of(msg))
                    if msg.dst in self.down:
                        self.finish_flight(msg)
                        self.stats.dropped += 1
                        return

        self.finish_flight(msg)
        self.stats.delivered += 1
        if self.trace is not None and not msg.background:
            self.trace.append((self.now, msg.kind, msg.src, msg.dst, msg.op))
        logger.debug('%.1fms %s %s -> %s (%s)', self.now / NS_PER_MS, msg.kind, msg.src, msg.dst, msg.op)
        _, effects = local_apply(self.nodes[msg.dst], msg, self.now)
        self.process(effects)

    def fire(self, timer):
        if timer.kind == TIMER_CLIENT:
            self.client_timeout(timer.data)
            return
        if timer.kind == TIMER_METRIC:
            self.record_metric()
            self.set_timer(Timer(None, TIMER_METRIC, self.now + METRIC_INTERVAL_MS * NS_PER_MS))
            return
        if timer.node in self.down:
            return
        self.process(on_timer(self.nodes[timer.node], timer, self.now))

    ############## Client ##############

    def submit(self, stmt, at=None, coordinator=None):
        """
        Hand a statement to the client at time ```at``` (default: now)

        Returns the ticket its reply will be stored under in ```replies```
        """
        ticket = self.client.reserve()
        self.arrivals += 1
        self.schedule(self.now if at is None else at, Submit(stmt, ticket, coordinator))
        return ticket

    def start(self, submit):
        ticket, coordinator, timer = self.client.open(submit.stmt, self.now, submit.coordinator, submit.ticket)
        self.set_timer(timer)
        if coordinator in self.down:
            return
        self.process(self.nodes[coordinator].coordinator.submit(submit.stmt, self.now, ticket))

    def on_client_reply(self, client_reply):
        if not isinstance(client_reply.ticket, str):
            # expiry deletes are submitted by nodes, nobody waits for them
            return
        reply = self.client.close(client_reply)
        if reply is None:
            return
        self.replies[reply.op_id] = reply
        self.stats.on_reply(reply)

    def client_timeout(self, ticket):
        reply, resubmission = self.client.recover(ticket, self.now)
        if reply is not None:
            self.replies[reply.op_id] = reply
            self.stats.on_reply(reply)
            return
        if resubmission is None:
            return
        new_ticket, via, messages, timer = resubmission
        self.set_timer(timer)
        if via in self.down:
            return
        self.process(messages)
        op = self.client.ops[new_ticket]
        self.process(self.nodes[via].coordinator.submit(op.stmt, self.now, new_ticket))

    ############## Running ##############

    def bootstrap(self):
        """
        Join every node: capability announcements, own load reports and the periodic timers

        Runs until every announcement is delivered
        """
        if self.bootstrapped:
            return
        self.bootstrapped = True
        for node_id, state in self.nodes.items():
            state.load_view.refresh_own(0, self.now)
            self.process(capability_bootstrap(state, self.capabilities[node_id]))
            gossip = state.gossip
            self.set_timer(Timer(node_id, TIMER_GOSSIP, self.now + gossip.initial_offset(state.rng)))
            self.set_timer(Timer(node_id, TIMER_LOAD_REFRESH, self.now + gossip.load_refresh))
            self.set_timer(Timer(node_id, TIMER_EXPIRY, self.now + int(state.rng.integers(0, state.expiry_sweep))))
        if self.metrics:
            self.set_timer(Timer(None, TIMER_METRIC, self.now))
        self.run_until(self.now + self.topology.max_one_way_ns() + self.config.jitter)
        logger.info('%.1fms cluster of %d nodes up', self.now / NS_PER_MS, len(self.nodes))

    def quiescent(self):
        """No operation in flight: periodic gossip, refresh, expiry and metric timers do not count"""
        if self.in_flight or self.arrivals or self.client.pending:
            return False
        return not any(state.coordinator.ops for node_id, state in self.nodes.items() if node_id not in self.down)

    def run_until(self, until):
        """Process every event up to and including time ```until```"""
        while self.queue and self.queue[0].fire_time <= until:
            self.next()
        self.now = max(self.now, until)

    def settle(self, limit=SETTLE_LIMIT):
        """
        Run until the cluster is quiescent

        Raises ```DhrkvError``` if that takes longer than ```limit``` ns of simulated time
        """
        deadline = self.now + limit
        while not self.quiescent():
            if not self.queue or self.queue[0].fire_time > deadline:
                raise DhrkvError(f'cluster not quiescent after {limit / NS_PER_S:.0f}s of simulated time')
            self.next()

    def run(self, arrivals, limit=SETTLE_LIMIT):
        """
        Open loop run of a statement stream

        Attributes:
            arrivals (iterable): ```Arrival``` (time offset in ns, statement) pairs
        """
        self.bootstrap()
        start = self.now
        for arrival in arrivals:
            self.submit(arrival.stmt, at=start + arrival.at)
        self.settle(limit)
        return self.stats

    def execute(self, stmt, coordinator=None):
        """Submit one statement, wait until the cluster is quiescent and return its ```Reply```"""
        self.bootstrap()
        ticket = self.submit(stmt, coordinator=coordinator)
        self.settle()
        return self.replies[ticket]

    ############## Faults ##############

    def crash(self, node_id):
        if node_id not in self.nodes:
            raise ConfigError(f'cannot crash unknown node {node_id!r}')
        if node_id in self.down:
            return
        self.down.add(node_id)
        logger.warning('%.1fms node %s crashed', self.now / NS_PER_MS, node_id)

    ############## Inspection ##############

    def undelivered(self):
        """Messages still queued for delivery (background ones included)"""
        return sum(1 for event in self.queue if isinstance(event.payload, Deliver))

    def loads(self):
        return [self.nodes[n].load() for n in self.topology.node_ids]

    def record_metric(self):
        loads = self.loads()
        self.stats.metric_rows.append([self.now / NS_PER_S, load_balance_metric(loads), *loads])

    def snapshots(self):
        return [snapshot(self.nodes[n]) for n in self.topology.node_ids]

    def scan(self):
        return global_scan(self.snapshots(), self.down)

    def summary(self):
        """JSON summary of the run"""
        loads = self.loads()
        return {
            'seed': self.seed,
            'strategy': str(self.strategy),
            'simulated_ms': self.now / NS_PER_MS,
            'replies': self.stats.get_status_counts(),
            'mean_qct_ms': self.stats.get_mean_qct(),
            'qct_idealized': True,
            # sent == delivered + dropped + in_flight, gossip included
            'messages': {'sent': self.stats.total_sent(), 'delivered': self.stats.delivered,
                         'dropped': self.stats.dropped, 'in_flight': self.undelivered(),
                         'in_flight_operations': self.in_flight},
            'traffic': self.stats.get_traffic(),
            'nodes': {str(n): {'payload_bytes': self.nodes[n].load(), 'relay_bytes': self.nodes[n].relay_bytes()}
                      for n in self.topology.node_ids},
            'balance': load_balance_metric(loads),
            'down': sorted(self.down, key=str),
        }
