"""
Failure handling of the store

Includes:

- ```on_ack_timeout```: what a coordinator does when acknowledgments are missing
- ```repair_messages```: the rollback / cleanup / broadcast messages of a repair
- ```client_recover_coordinator_failure```: what a client does when its coordinator went silent
- ```expire_items```: delegated deletes of items whose lifetime elapsed
- ```global_scan```: consistency check of quiescent snapshots (dangling references, unreferenced data)

Consistency is not checked inline on the request path; failures are repaired when they are noticed.
"""

import logging
from collections import namedtuple
from dataclasses import dataclass, field

from const import (BROADCAST_DELETE, CLIENT_BROADCAST_CLEANUP, DANGLING, OP_CREATE, OP_DELETE, OP_READ,
                   OP_UPDATE, REISSUE_CREATE, REISSUE_READ, REISSUE_UPDATE, ROLLBACK_CREATE, UNREFERENCED)
from messages import BroadcastDelete, Cleanup, DelegatedDelete, Rollback
from ring import TokenRing
from settings import NS_PER_MS

logger = logging.getLogger(__name__)


def op_matches(tag, op):
    """True if ```tag``` was written by operation ```op``` (an attempt id, or a base id covering all attempts)"""
    return tag == op or tag.startswith(op + '/')


@dataclass(frozen=True)
class RepairAction:
    """
    Attributes:
        kind (str): One of the repair constants in ```const.py```
        key (str): Affected key
        scope (tuple): Nodes the repair messages go to
        op (str): Operation (attempt) being repaired
        give_up (bool): The retry budget is spent, the client gets an error
    """
    kind: str
    key: str
    scope: tuple = field(default_factory=tuple)
    op: str = ''
    give_up: bool = False


def on_ack_timeout(pending, retries, all_nodes=()):
    """
    Decide the repair of an operation whose deadline passed

    - create: roll back the partial writes, then reissue with a fresh selection
    - read: reissue
    - update: clean up at the responsible nodes, then reissue
    - delete: broadcast the delete to every node (never retried)
    """
    give_up = pending.attempt >= retries
    op = pending.attempt_id

    if pending.kind == OP_CREATE:
        scope = tuple(dict.fromkeys([*pending.targets, *pending.responsible]))
        return RepairAction(ROLLBACK_CREATE if give_up else REISSUE_CREATE, pending.key, scope, op, give_up)
    if pending.kind == OP_READ:
        return RepairAction(REISSUE_READ, pending.key, tuple(pending.responsible), op, give_up)
    if pending.kind == OP_UPDATE:
        return RepairAction(REISSUE_UPDATE, pending.key, tuple(pending.responsible), op, give_up)
    if pending.kind == OP_DELETE:
        return RepairAction(BROADCAST_DELETE, pending.key, tuple(all_nodes), op, False)
    raise ValueError(f'unknown operation kind {pending.kind!r}')


def repair_messages(action, src, version=0, candidates=()):
    """Messages carrying out ```action``` (a plain reissue needs none)"""
    if action.kind in (REISSUE_CREATE, ROLLBACK_CREATE):
        return [Rollback(src=src, dst=n, op=action.op, key=action.key) for n in action.scope]
    if action.kind in (REISSUE_UPDATE, CLIENT_BROADCAST_CLEANUP):
        return [Cleanup(src=src, dst=n, op=action.op, key=action.key, version=version,
                        candidates=tuple(candidates)) for n in action.scope]
    if action.kind == BROADCAST_DELETE:
        return [BroadcastDelete(src=src, dst=n, op=action.op, key=action.key, version=version)
                for n in action.scope]
    return []


def client_recover_coordinator_failure(kind, key, op, eligible, responsible, all_nodes, via, now):
    """
    Repair what a silent coordinator may have left behind, before the client reissues through ```via```

    - create: every eligible and responsible node drops copies and entries written by any attempt of ```op```
    - update: responsible nodes settle the interrupted update and prune copies on the eligible nodes
    - delete: the delete is broadcast to every node
    - read: nothing to repair

    Returns (RepairAction, messages)
    """
    if kind == OP_CREATE:
        action = RepairAction(CLIENT_BROADCAST_CLEANUP, key, tuple(dict.fromkeys([*eligible, *responsible])), op)
        return action, [Rollback(src=via, dst=n, op=op, key=key) for n in action.scope]
    if kind == OP_UPDATE:
        action = RepairAction(CLIENT_BROADCAST_CLEANUP, key, tuple(responsible), op)
        # copies written before the reissue
        return action, repair_messages(action, via, version=now - 1, candidates=eligible)
    if kind == OP_DELETE:
        action = RepairAction(BROADCAST_DELETE, key, tuple(all_nodes), op)
        return action, repair_messages(action, via, version=now)
    return RepairAction(REISSUE_READ, key, tuple(responsible), op), []


def expire_items(state, now):
    """
    Delegate the delete of every expired target copy to a random other node

    A delegation is repeated after ```state.expiry_retry``` while the copy is still here
    """
    expired = [item for item in state.target_store.values() if item.expiry is not None and item.expiry <= now]
    if not expired:
        return []

    peers = [n for n in state.ring.nodes if n != state.node_id] or [state.node_id]
    messages = []
    for item in sorted(expired, key=lambda i: i.key):
        last = state.expiry_sent.get(item.key)
        if last is not None and now - last < state.expiry_retry:
            continue
        delegate = peers[int(state.rng.integers(len(peers)))]
        state.expiry_sent[item.key] = now
        logger.info('%.1fms node %s: %r expired, delete delegated to node %s',
                    now / NS_PER_MS, state.node_id, item.key, delegate)
        messages.append(DelegatedDelete(src=state.node_id, dst=delegate, key=item.key))
    return messages


Violation = namedtuple('Violation', ['kind', 'key', 'node', 'target'])


def global_scan(snapshots, down=()):
    """
    Check referential integrity over node snapshots of a quiescent cluster

    - dangling: a relay entry names a live target that does not hold the item
    - unreferenced: a target copy outside the responsible set that no live responsible node points to

    Nodes in ```down``` are skipped, references to them count as replica loss, not as violations

    Returns a sorted list of ```Violation```
    """
    if not snapshots:
        return []
    down = set(down)
    by_node = {s['node']: s for s in snapshots}
    first = snapshots[0]
    ring = TokenRing.from_json(first['ring'])
    r = first['replication']

    relay = {n: {e['key']: e for e in s['relay_store']} for n, s in by_node.items()}
    held = {n: {i['key'] for i in s['target_store']} for n, s in by_node.items()}

    violations = []
    for node_id, entries in relay.items():
        if node_id in down:
            continue
        for key, entry in entries.items():
            for t in entry['targets']:
                if t in down or t not in held:
                    continue
                if key not in held[t]:
                    violations.append(Violation(DANGLING, key, node_id, t))

    for node_id, keys in held.items():
        if node_id in down:
            continue
        for key in keys:
            responsible = ring.responsible_nodes(key, r)
            if node_id in responsible:
                continue
            live = [n for n in responsible if n not in down and n in relay]
            if not live:
                continue
            if not any(key in relay[n] and node_id in relay[n][key]['targets'] for n in live):
                violations.append(Violation(UNREFERENCED, key, node_id, ''))

    return sorted(violations, key=lambda v: (v.kind, v.key, str(v.node), str(v.target)))
