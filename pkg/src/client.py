"""
The client application in front of the cluster

Includes:

- ```ClientOp```: a statement the client waits for
- ```Client```: picks a random coordinator per statement, times out silent coordinators and reissues through another one

The client carries a copy of the capability store and the ring so that it can tell eligible and
responsible nodes to clean up after a coordinator failure.
"""

import logging
from dataclasses import dataclass, field, replace

from const import ERROR, TIMER_CLIENT
from coordinator import Reply
from messages import Timer
from recovery import client_recover_coordinator_failure
from settings import CLIENT_SLACK_MS, DEADLINE_GROWTH, NS_PER_MS

logger = logging.getLogger(__name__)


@dataclass
class ClientOp:
    """
    Attributes:
        base (str): Ticket of the first submission ('c7'), reissues use 'c7.1', 'c7.2', ...
        ticket (str): Ticket of the current submission
        stmt: Parsed statement
        submitted_at (int): First submission in ns
        coordinator: Current coordinator
        tried (set): Coordinators used so far
        reissues (int): Reissues through another coordinator
    """
    base: str
    ticket: str
    stmt: object
    submitted_at: int
    coordinator: object
    tried: set = field(default_factory=set)
    reissues: int = 0


class Client:
    """
    Attributes:
        capabilities (CapabilityStore): Copy of the cluster's capability store
        ring (TokenRing): Copy of the partitioner
        replication (int): Replication factor
        rng (numpy.random.Generator): Coordinator choice
        patience (int): ns to wait for a reply, longer than every deadline of the coordinator
        retries (int): Reissues through other coordinators before giving up
        ops (dict): ticket -> ClientOp
    """

    def __init__(self, capabilities, ring, replication, rng, ack_timeout, retries,
                 growth=DEADLINE_GROWTH, slack=CLIENT_SLACK_MS * NS_PER_MS):
        self.capabilities = capabilities.copy()
        self.ring = ring
        self.replication = replication
        self.rng = rng
        self.retries = retries
        self.patience = sum(ack_timeout * growth**a for a in range(retries + 1)) + slack
        self.ops = {}
        self.counter = 0

    def pick(self, exclude=()):
        nodes = [n for n in self.ring.nodes if n not in exclude] or list(self.ring.nodes)
        return nodes[int(self.rng.integers(len(nodes)))]

    def reserve(self):
        """Next ticket, handed out in submission order"""
        self.counter += 1
        return f'c{self.counter}'

    def open(self, stmt, now, coordinator=None, ticket=None):
        """
        Start a statement through ```coordinator``` (random if None)

        Returns (ticket, coordinator, timer) where timer is the client's deadline
        """
        ticket = ticket or self.reserve()
        if coordinator is None:
            coordinator = self.pick()
        self.ops[ticket] = ClientOp(ticket, ticket, stmt, now, coordinator, {coordinator})
        return ticket, coordinator, Timer(None, TIMER_CLIENT, now + self.patience, ticket)

    def close(self, client_reply):
        """
        Accept the reply of a pending ticket

        Returns the ```Reply``` with the timing of the first submission, None for stale tickets
        """
        op = self.ops.pop(client_reply.ticket, None) if isinstance(client_reply.ticket, str) else None
        if op is None:
            return None
        return replace(client_reply.reply, op_id=op.base, submitted_at=op.submitted_at)

    def recover(self, ticket, now):
        """
        The coordinator of ```ticket``` stayed silent: repair and reissue through another coordinator

        Returns (reply, resubmission) where exactly one is None.
        resubmission is (ticket, coordinator, repair messages, timer)
        """
        op = self.ops.pop(ticket, None)
        if op is None:
            return None, None
        stmt = op.stmt

        if op.reissues >= self.retries:
            logger.error('%.1fms client: %s %r unanswered after %d coordinators', now / NS_PER_MS, stmt.op,
                         stmt.key, len(op.tried))
            reply = Reply(status=ERROR, op_id=op.base, kind=stmt.op, key=stmt.key, coordinator=op.coordinator,
                          submitted_at=op.submitted_at, completed_at=now, error='OperationTimeout',
                          attempts=op.reissues + 1)
            return reply, None

        req = getattr(stmt, 'req', None)
        eligible = self.capabilities.eligible_nodes(req) if req else []
        responsible = self.ring.responsible_nodes(stmt.key, self.replication)
        via = self.pick(exclude=op.tried)
        action, messages = client_recover_coordinator_failure(stmt.op, stmt.key, op.ticket, eligible, responsible,
                                                              self.ring.nodes, via, now)
        logger.warning('%.1fms client: coordinator %s silent on %s, %s through node %s', now / NS_PER_MS,
                       op.coordinator, op.ticket, action.kind, via)

        op.reissues += 1
        op.ticket = f'{op.base}.{op.reissues}'
        op.coordinator = via
        op.tried.add(via)
        self.ops[op.ticket] = op
        timer = Timer(None, TIMER_CLIENT, now + self.patience, op.ticket)
        return None, (op.ticket, via, messages, timer)

    @property
    def pending(self):
        return len(self.ops)

