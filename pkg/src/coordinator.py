"""
Coordinator role of a node: the four CRUD flows with replication

Includes:

- ```PendingOp```: an operation waiting for acknowledgments
- ```Reply```: the typed outcome handed back to the client (ok, not found or error)
- ```Coordinator```: starts operations, collects replies, fires repairs on deadlines

Any node can coordinate. Nothing blocks: deadlines are timers, replies are messages.
"""

import logging
from dataclasses import dataclass, field

from const import (ERROR, NOT_FOUND, OK, OP_CREATE, OP_DELETE, OP_READ, OP_UPDATE, TIMER_DEADLINE)
from errors import UnsatisfiableDhr
from items import DataItem, RelayEntry
from messages import (ClientReply, Delete, Read, RelayWrite, TargetWrite, Timer, Update, Write)
from query import Delete as DeleteStatement
from recovery import on_ack_timeout, repair_messages
from settings import DEADLINE_GROWTH, NS_PER_MS, NS_PER_S

logger = logging.getLogger(__name__)


@dataclass
class PendingOp:
    """
    Attributes:
        op_id (str): Base id of the operation; attempts are tagged '<op_id>/<attempt>'
        kind (str): create, read, update or delete
        key (str): Key of the statement
        stmt: The parsed statement
        ticket: Client handle the reply goes back to
        submitted_at (int): ns
        attempt (int): Current attempt, starting at 0
        version (int): Version stamped on this attempt's writes
        responsible (list): Responsible nodes of the key
        eligible (list): Eligible nodes of the DHRs (indirection path only)
        targets (list): Chosen (or reported) targets
        proposal (tuple): Targets proposed to an update with new DHRs
        excluded (set): Targets that failed an earlier attempt
        required (set): (ack kind, node) pairs needed for success
        received (set): (ack kind, node) pairs collected so far
        not_found (set): Responsible nodes that reported a miss
        degraded (bool): Fewer eligible nodes than the replication factor
        released (set): Old targets responsible nodes reported as left behind by a committed update
    """
    op_id: str
    kind: str
    key: str
    stmt: object
    ticket: object
    submitted_at: int
    attempt: int = 0
    version: int = 0
    responsible: list = field(default_factory=list)
    eligible: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    proposal: tuple | None = None
    excluded: set = field(default_factory=set)
    required: set = field(default_factory=set)
    received: set = field(default_factory=set)
    not_found: set = field(default_factory=set)
    degraded: bool = False
    moved_recorded: bool = False
    indirect: bool = False
    released: set = field(default_factory=set)

    @property
    def attempt_id(self):
        return f'{self.op_id}/{self.attempt}'

    @property
    def awaited(self):
        return self.required - self.received

    def reset(self):
        self.targets = []
        self.proposal = None
        self.required = set()
        self.received = set()
        self.not_found = set()
        self.moved_recorded = False


@dataclass(frozen=True)
class Reply:
    """
    Typed outcome of an operation

    Attributes:
        status (str): 'ok', 'not_found' or 'error'
        error (str): Error kind for 'error' replies (e.g. 'UnsatisfiableDhr', 'RetriesExhausted')
        columns (dict): Row returned by a read
        qct (int): Query completion time in ns (idealized: node processing takes no time)
    """
    status: str
    op_id: str
    kind: str
    key: str
    coordinator: object
    submitted_at: int
    completed_at: int
    dhr: bool = False
    columns: dict | None = None
    error: str = ''
    attempts: int = 1
    degraded: bool = False
    targets: tuple = ()

    @property
    def ok(self):
        return self.status == OK

    @property
    def qct(self):
        return self.completed_at - self.submitted_at


class Coordinator:
    """
    Coordinator state machine of one node

    Attributes:
        state (NodeState): The node this role belongs to
        strategy (PlacementStrategy): Target placement
        ack_timeout (int): Deadline of a first attempt in ns, multiplied by ```growth``` per reissue
        retries (int): Reissues before giving up
        ops (dict): attempt id -> PendingOp
    """

    def __init__(self, state, strategy, ack_timeout, retries, growth=DEADLINE_GROWTH):
        self.state = state
        self.strategy = strategy
        self.ack_timeout = ack_timeout
        self.retries = retries
        self.growth = growth
        self.ops = {}
        self.counter = 0
        self.last_version = 0

    @property
    def node_id(self):
        return self.state.node_id

    def next_version(self, now):
        """Write stamps follow the clock but never repeat on this coordinator"""
        self.last_version = max(now, self.last_version + 1)
        return self.last_version

    def deadline(self, attempt):
        return self.ack_timeout * self.growth**attempt

    ############## Entry points ##############

    def submit(self, stmt, now, ticket=None):
        """Start a statement; ```ticket``` (a string) doubles as the operation id"""
        self.counter += 1
        op_id = ticket if isinstance(ticket, str) else f'{self.node_id}:{self.counter}'
        op = PendingOp(op_id=op_id, kind=stmt.op, key=stmt.key, stmt=stmt, ticket=ticket, submitted_at=now)
        return self.start(op, now)

    def submit_delete(self, key, now):
        """Delete on behalf of another node (expired items), nobody waits for the reply"""
        return self.submit(DeleteStatement(key=key), now, ticket=('expiry', key))

    def start(self, op, now):
        op.responsible = self.state.responsible(op.key)
        op.version = self.next_version(now)
        effects = {
            OP_CREATE: self.create,
            OP_READ: self.read,
            OP_UPDATE: self.update,
            OP_DELETE: self.delete,
        }[op.kind](op, now)

        if op.attempt_id in self.ops:
            effects.append(Timer(self.node_id, TIMER_DEADLINE, now + self.deadline(op.attempt), op.attempt_id))
        return effects

    ############## Flows ##############

    def create(self, op, now):
        stmt = op.stmt
        req = stmt.req
        n = self.node_id
        tag = op.attempt_id
        self.ops[tag] = op

        if req.is_empty() or not self.strategy.uses_indirection:
            # standard path, identical to a store without requirements
            item = DataItem(stmt.key, stmt.columns, op.version, n, req, None, tag)
            op.required = {('WriteAck', r) for r in op.responsible}
            return [Write(src=n, dst=r, op=tag, item=item, coordinator=n) for r in op.responsible]

        op.indirect = True
        try:
            op.eligible = [e for e in self.state.eligible(req) if e not in op.excluded]
            if not op.eligible:
                raise UnsatisfiableDhr(f'no eligible node for {stmt.key!r}')
            item_size = DataItem(stmt.key, stmt.columns).size()
            self.state.load_view.advance(now)
            selection = self.strategy.select(op.eligible, op.responsible, self.state.replication,
                                             self.state.load_view, item_size, self.state.rng)
        except UnsatisfiableDhr:
            return self.finish(op, ERROR, now, error='UnsatisfiableDhr')

        op.targets = list(selection.targets)
        op.degraded = selection.degraded
        if op.degraded:
            logger.warning('%.1fms op %s: only %d eligible node(s) for %r, replication degraded',
                           now / NS_PER_MS, tag, len(op.eligible), stmt.key)

        lifetime = req.lifetime(self.state.registry)
        expiry = None if lifetime is None else op.version + lifetime * NS_PER_S
        item = DataItem(stmt.key, stmt.columns, op.version, n, req, expiry, tag)
        entry = RelayEntry(stmt.key, op.targets, req, op.version, n, tag)

        relays = [r for r in op.responsible if r not in op.targets]
        op.required = {('TargetAck', t) for t in op.targets} | {('RelayAck', r) for r in relays}
        effects = [TargetWrite(src=n, dst=t, op=tag, item=item, relay=entry if t in op.responsible else None,
                               coordinator=n) for t in op.targets]
        effects += [RelayWrite(src=n, dst=r, op=tag, entry=entry, coordinator=n) for r in relays]
        return effects

    def read(self, op, now):
        n = self.node_id
        tag = op.attempt_id
        self.ops[tag] = op
        op.required = {('ReadReply', r) for r in op.responsible}
        return [Read(src=n, dst=r, op=tag, key=op.key, coordinator=n) for r in op.responsible]

    def update(self, op, now):
        stmt = op.stmt
        n = self.node_id
        tag = op.attempt_id
        self.ops[tag] = op

        dhr = stmt.req
        if dhr is not None and (dhr.is_empty() or not self.strategy.uses_indirection):
            dhr = None

        if dhr is not None:
            op.indirect = True
            op.eligible = [e for e in self.state.eligible(dhr) if e not in op.excluded]
            if not op.eligible:
                return self.finish(op, ERROR, now, error='UnsatisfiableDhr')
            selection = self.strategy.select(op.eligible, op.responsible, self.state.replication,
                                             self.state.load_view, 0, self.state.rng, record=False)
            op.proposal = tuple(selection.targets)
            op.degraded = selection.degraded

        mover = op.responsible[op.attempt % len(op.responsible)]
        op.required = {('UpdateAck', r) for r in op.responsible}
        return [Update(src=n, dst=r, op=tag, key=op.key, columns=stmt.columns, dhr=dhr, proposal=op.proposal,
                       version=op.version, origin=n, mover=mover, responsible=tuple(op.responsible),
                       attempt=op.attempt, coordinator=n) for r in op.responsible]

    def delete(self, op, now):
        n = self.node_id
        tag = op.attempt_id
        self.ops[tag] = op
        op.required = {('DeleteAck', r) for r in op.responsible}
        return [Delete(src=n, dst=r, op=tag, key=op.key, version=op.version, coordinator=n)
                for r in op.responsible]

    ############## Replies ##############

    def on_reply(self, msg, now):
        """Collect a reply; late replies of finished or reissued attempts are ignored"""
        op = self.ops.get(msg.op)
        if op is None:
            return []
        kind = msg.kind

        if kind == 'ReadReply':
            if msg.found:
                # first data reply wins, the others find no pending op anymore
                return self.finish(op, OK, now, columns=dict(msg.item.columns))
            if msg.from_responsible:
                op.not_found.add(msg.src)
                if op.not_found >= set(op.responsible):
                    return self.finish(op, NOT_FOUND, now)
            return []

        if kind == 'TargetAck' and not msg.ok:
            logger.warning('%.1fms op %s: node %s refused %r', now / NS_PER_MS, op.attempt_id, msg.src, op.key)
            return self.fail_attempt(op, now, refused=msg.src)

        op.received.add((kind, msg.src))

        if kind == 'UpdateAck':
            if not msg.found:
                op.not_found.add(msg.src)
                if op.not_found >= set(op.responsible):
                    return self.finish(op, NOT_FOUND, now)
            elif msg.targets is not None:
                op.targets = list(msg.targets)
                op.required |= {('TargetAck', t) for t in msg.targets}
                op.required |= {('RelayAck', r) for r in op.responsible}
                if msg.moved and not op.moved_recorded:
                    size = DataItem(op.key, op.stmt.columns).size()
                    self.state.load_view.advance(now)
                    for t in msg.moved:
                        self.state.load_view.record(t, size)
                    op.moved_recorded = True

        elif kind == 'RelayAck':
            op.released |= set(msg.released)

        elif kind == 'DeleteAck':
            if msg.found:
                op.required |= {('TargetDeleteAck', t) for t in msg.forwarded}
            else:
                op.not_found.add(msg.src)
                if op.not_found >= set(op.responsible):
                    return self.finish(op, NOT_FOUND, now)

        if not op.awaited:
            return self.finish(op, OK, now)
        return []

    def on_deadline(self, attempt_id, now):
        op = self.ops.get(attempt_id)
        if op is None:
            return []
        missing = sorted(f'{k}@{n}' for k, n in op.awaited)
        logger.warning('%.1fms op %s (%s %r) timed out, missing %s', now / NS_PER_MS, attempt_id, op.kind,
                       op.key, ', '.join(missing) or 'nothing')
        return self.fail_attempt(op, now)

    def fail_attempt(self, op, now, refused=None):
        """Repair after missing or refused acknowledgments, then reissue or give up"""
        action = on_ack_timeout(op, self.retries, self.state.ring.nodes)
        n = self.node_id
        if refused is not None:
            unacked = {refused}
        else:
            unacked = {t for t in op.targets if ('TargetAck', t) not in op.received}

        if op.kind == OP_CREATE:
            op.excluded |= unacked
            messages = repair_messages(action, n)
        elif op.kind == OP_UPDATE:
            op.excluded |= unacked
            candidates = set(op.targets) | set(op.proposal or ()) | op.released
            messages = repair_messages(action, n, version=op.version, candidates=sorted(candidates, key=str))
        elif op.kind == OP_DELETE:
            messages = repair_messages(action, n, version=op.version)
            logger.info('%.1fms op %s: delete of %r broadcast to %d nodes', now / NS_PER_MS, op.attempt_id,
                        op.key, len(messages))
            return messages + self.finish(op, OK, now)
        else:
            messages = []

        if action.give_up:
            logger.error('%.1fms op %s: %s of %r failed after %d attempts', now / NS_PER_MS, op.attempt_id,
                         op.kind, op.key, op.attempt + 1)
            return messages + self.finish(op, ERROR, now, error='RetriesExhausted')

        logger.info('%.1fms op %s: %s, reissuing', now / NS_PER_MS, op.attempt_id, action.kind)
        del self.ops[op.attempt_id]
        op.attempt += 1
        op.reset()
        return messages + self.start(op, now)

    def finish(self, op, status, now, columns=None, error=''):
        self.ops.pop(op.attempt_id, None)
        stmt_req = getattr(op.stmt, 'req', None)
        reply = Reply(status=status, op_id=op.op_id, kind=op.kind, key=op.key, coordinator=self.node_id,
                      submitted_at=op.submitted_at, completed_at=now,
                      dhr=bool(stmt_req) or op.indirect, columns=columns, error=error,
                      attempts=op.attempt + 1, degraded=op.degraded, targets=tuple(op.targets))
        logger.debug('%.1fms op %s %s %r -> %s', now / NS_PER_MS, op.op_id, op.kind, op.key, status)
        return [ClientReply(self.node_id, op.ticket, reply)]
