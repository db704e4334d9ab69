import numpy as np
import pytest

from const import TIMER_GOSSIP, TIMER_LOAD_REFRESH
from dhr import DhrRequest, NodeCapabilities
from items import DataItem, RelayEntry
from messages import (BroadcastDelete, Cleanup, Delete, ForwardRead, GossipSyn, Prune, Read, ReadReply, RelayWrite,
                      ReplicaAck, Rollback, TargetDelete, TargetWrite, Timer, Update, Write, WriteAck)
from node import NodeState, local_apply, on_timer, snapshot
from recovery import op_matches
from ring import TokenRing

DE = DhrRequest({'location': {'DE'}})


@pytest.fixture
def node(registry):
    ring = TokenRing.evenly_spaced(range(4))
    caps = NodeCapabilities.build(0, {'location': 'DE', 'encryption': 256}, registry)
    state = NodeState(0, ring, registry, 1, caps, rng=np.random.default_rng(1))
    for n, loc in enumerate(['DE', 'DE', 'FR', 'US']):
        state.capability_replica.announce(NodeCapabilities.build(n, {'location': loc}, registry), 1)
    return state


def apply(state, msg, now=0):
    return local_apply(state, msg, now)[1]


def item(key='k', version=1, dhr=DhrRequest(), op='c1/0', columns=None):
    return DataItem(key, columns or {'c0': b'value'}, version, 9, dhr, None, op)


def test_op_matches_attempts_of_a_base_id():
    assert op_matches('c1/0', 'c1')
    assert op_matches('c1/0', 'c1/0')
    assert not op_matches('c10/0', 'c1')
    assert not op_matches('c1.1/0', 'c1')


def test_write_stores_and_acks(node):
    effects = apply(node, Write(src=9, dst=0, op='c1/0', item=item(), coordinator=9))
    assert node.data_store['k'] == item()
    assert effects == [WriteAck(src=0, dst=9, op='c1/0', key='k')]


def test_older_write_does_not_overwrite(node):
    apply(node, Write(src=9, dst=0, op='c2/0', item=item(version=5), coordinator=9))
    apply(node, Write(src=9, dst=0, op='c1/0', item=item(version=3, columns={'c0': b'old'}), coordinator=9))
    assert node.data_store['k'].version == 5


def test_target_refuses_data_it_cannot_comply_with(node):
    fr = item(dhr=DhrRequest({'location': {'FR'}}))
    [ack] = apply(node, TargetWrite(src=9, dst=0, op='c1/0', item=fr, coordinator=9))
    assert ack.kind == 'TargetAck' and not ack.ok
    assert 'k' not in node.target_store


def test_target_write_keeps_the_copy(node):
    [ack] = apply(node, TargetWrite(src=9, dst=0, op='c1/0', item=item(dhr=DE), coordinator=9))
    assert ack.ok
    assert node.target_store['k'].dhr == DE
    assert node.load() == item().size()


def test_read_paths(node):
    [miss] = apply(node, Read(src=9, dst=0, op='c1/0', key='k', coordinator=9))
    assert miss == ReadReply(src=0, dst=9, op='c1/0', key='k', found=False)

    apply(node, RelayWrite(src=9, dst=0, op='c2/0', entry=RelayEntry('k', (1, 2), DE, 3, 9, 'c2/0'),
                           coordinator=9))
    forwards = apply(node, Read(src=9, dst=0, op='c3/0', key='k', coordinator=9))
    assert forwards == [ForwardRead(src=0, dst=t, op='c3/0', key='k', coordinator=9) for t in (1, 2)]


def test_newer_relay_entry_replaces_data_and_old_targets(node):
    apply(node, Write(src=9, dst=0, op='c1/0', item=item(version=1), coordinator=9))
    apply(node, RelayWrite(src=9, dst=0, op='c2/0', entry=RelayEntry('k', (1, 2), DE, 2, 9, 'c2/0'),
                           coordinator=9))
    assert 'k' not in node.data_store

    effects = apply(node, RelayWrite(src=9, dst=0, op='c3/0', entry=RelayEntry('k', (2, 3), DE, 3, 9, 'c3/0'),
                                     coordinator=9))
    assert node.relay_store['k'].targets == (2, 3)
    assert [e for e in effects if isinstance(e, TargetDelete)] == [
        TargetDelete(src=0, dst=1, op='c3/0', key='k', version=3)]


def test_rollback_only_drops_records_of_that_operation(node):
    apply(node, TargetWrite(src=9, dst=0, op='c1/0', item=item(dhr=DE, op='c1/0'), coordinator=9))
    apply(node, Rollback(src=9, dst=0, op='c10', key='k'))
    assert 'k' in node.target_store
    apply(node, Rollback(src=9, dst=0, op='c1', key='k'))
    assert 'k' not in node.target_store


def test_delete_forwards_to_targets(node):
    apply(node, RelayWrite(src=9, dst=0, op='c1/0', entry=RelayEntry('k', (1, 2), DE, 3, 9, 'c1/0'),
                           coordinator=9))
    effects = apply(node, Delete(src=9, dst=0, op='c2/0', key='k', version=10, coordinator=9))
    assert 'k' not in node.relay_store
    assert [e.dst for e in effects if isinstance(e, TargetDelete)] == [1, 2]
    assert effects[-1].found and effects[-1].forwarded == (1, 2)


def test_delete_ignores_newer_data(node):
    apply(node, Write(src=9, dst=0, op='c1/0', item=item(version=20), coordinator=9))
    [ack] = apply(node, Delete(src=9, dst=0, op='c2/0', key='k', version=10, coordinator=9))
    assert not ack.found
    assert 'k' in node.data_store


def test_cleanup_prunes_unreferenced_candidates(node):
    apply(node, RelayWrite(src=9, dst=0, op='c1/0', entry=RelayEntry('k', (1,), DE, 3, 9, 'c1/0'),
                           coordinator=9))
    prunes = apply(node, Cleanup(src=9, dst=0, op='c2/0', key='k', version=8, candidates=(1, 2, 3)))
    assert prunes == [Prune(src=0, dst=n, op='c2/0', key='k', keep=(1,), version=8) for n in (2, 3)]


def test_cleanup_prunes_targets_a_crashed_mover_left_behind(node):
    apply(node, RelayWrite(src=9, dst=0, op='c1/0', entry=RelayEntry('k', (1,), DE, 3, 9, 'c1/0'),
                           coordinator=9))
    fr = DhrRequest({'location': {'FR'}})
    [ack] = apply(node, Update(src=9, dst=0, op='u1/0', key='k', columns={'c0': b'new'}, dhr=fr, proposal=(2,),
                               version=10, origin=9, mover=3, responsible=(0, 3), coordinator=9))
    assert ack.targets == (2,) and ack.moved == (2,)

    # node 3 drives the move; here only the new relay entry is committed
    [relay_ack] = apply(node, ReplicaAck(src=2, dst=0, op='u1/0', key='k', version=10))
    assert relay_ack.released == (1,)
    assert node.relay_store['k'].targets == (2,)

    prunes = apply(node, Cleanup(src=9, dst=0, op='u1/0', key='k', version=10))
    assert prunes == [Prune(src=0, dst=1, op='u1/0', key='k', keep=(2,), version=10)]
    assert apply(node, Cleanup(src=9, dst=0, op='u1/1', key='k', version=11)) == []


def test_prune_keeps_newer_copies(node):
    apply(node, TargetWrite(src=9, dst=0, op='c1/0', item=item(dhr=DE, version=9), coordinator=9))
    apply(node, Prune(src=9, dst=0, op='c2/0', key='k', keep=(), version=8))
    assert 'k' in node.target_store
    apply(node, Prune(src=9, dst=0, op='c2/0', key='k', keep=(), version=9))
    assert 'k' not in node.target_store


def test_broadcast_delete_clears_every_store(node):
    apply(node, TargetWrite(src=9, dst=0, op='c1/0', item=item(dhr=DE, version=2), coordinator=9,
                            relay=RelayEntry('k', (0,), DE, 2, 9, 'c1/0')))
    assert 'k' in node.relay_store and 'k' in node.target_store
    apply(node, BroadcastDelete(src=9, dst=0, op='c2/0', key='k', version=5))
    assert not node.relay_store and not node.target_store


def test_gossip_timer_rearms(node):
    effects = on_timer(node, Timer(0, TIMER_GOSSIP, 1000), 1000)
    syn, rearm = effects
    assert isinstance(syn, GossipSyn) and syn.dst != 0
    assert rearm == Timer(0, TIMER_GOSSIP, 1000 + node.gossip.sync_interval)


def test_load_refresh_reports_stored_bytes(node):
    apply(node, Write(src=9, dst=0, op='c1/0', item=item(), coordinator=9))
    on_timer(node, Timer(0, TIMER_LOAD_REFRESH, 5), 5)
    assert node.load_view.reported[0] == (item().size(), 5)


def test_relay_entry_size_ignores_payload():
    small = RelayEntry('k', (1, 2), DE, 3, 9, 'c1/0')
    assert small.size() == RelayEntry('k', (1, 2), DE, 3, 9, 'c1/0').size()
    assert DataItem('k', {'c0': b'x' * 1000}).size() == 1001


def test_snapshot_lists_every_store(node):
    apply(node, Write(src=9, dst=0, op='c1/0', item=item(), coordinator=9))
    snap = snapshot(node)
    assert snap['node'] == 0
    assert [i['key'] for i in snap['data_store']] == ['k']
    assert snap['relay_store'] == [] and snap['target_store'] == []
    assert DataItem.from_json(snap['data_store'][0]) == item()
