import pytest

from const import ERROR, NOT_FOUND, OK
from dhr import DhrRequest
from query import Delete, Insert, Select, Update
from settings import NS_PER_MS

ROW = {'c0': b'hello', 'c1': b'world'}
DE = DhrRequest({'location': {'DE'}})
FR = DhrRequest({'location': {'FR'}})


def holders(sim, key, store='target_store'):
    return sorted(n for n, state in sim.nodes.items() if key in getattr(state, store))


def test_standard_create_and_read(make_sim):
    sim = make_sim(['DE', 'FR', 'UK', 'US'], replication=2)
    assert sim.execute(Insert('k', ROW)).status == OK
    responsible = sim.ring.responsible_nodes('k', 2)
    assert holders(sim, 'k', 'data_store') == sorted(responsible)
    assert holders(sim, 'k', 'relay_store') == []

    reply = sim.execute(Select('k'))
    assert reply.ok and reply.columns == ROW
    assert not reply.dhr


def test_dhr_create_redirects_to_eligible_nodes(make_sim):
    sim = make_sim(['DE', 'DE', 'FR', 'US', 'US'], replication=1)
    reply = sim.execute(Insert('k', ROW, DE))
    assert reply.ok and reply.dhr
    assert set(reply.targets) <= {0, 1}
    assert holders(sim, 'k') == list(reply.targets)
    responsible = sim.ring.responsible_nodes('k', 1)
    assert holders(sim, 'k', 'relay_store') == responsible
    assert sim.nodes[responsible[0]].relay_store['k'].targets == reply.targets
    assert sim.execute(Select('k')).columns == ROW


def test_unsatisfiable_requirements(make_sim):
    sim = make_sim(['DE', 'FR'])
    reply = sim.execute(Insert('k', ROW, DhrRequest({'location': {'UK'}})))
    assert reply.status == ERROR
    assert reply.error == 'UnsatisfiableDhr'
    assert holders(sim, 'k') == holders(sim, 'k', 'relay_store') == []


@pytest.mark.parametrize('stmt', [Select('nope'), Update('nope', {'c0': b'x'}), Delete('nope')])
def test_absent_keys(make_sim, stmt):
    sim = make_sim(['DE', 'FR', 'UK'], replication=2)
    assert sim.execute(stmt).status == NOT_FOUND


def test_update_moves_data_to_new_location(make_sim):
    sim = make_sim(['DE', 'FR'])
    sim.execute(Insert('k', ROW, DE))
    assert holders(sim, 'k') == [0]

    reply = sim.execute(Update('k', {'c1': b'moved'}, FR))
    assert reply.ok
    assert holders(sim, 'k') == [1]
    responsible = sim.ring.responsible_nodes('k', 1)[0]
    assert sim.nodes[responsible].relay_store['k'].targets == (1,)
    assert sim.nodes[1].target_store['k'].dhr == FR
    assert sim.execute(Select('k')).columns == {'c0': b'hello', 'c1': b'moved'}
    assert sim.scan() == []


def test_update_in_place_keeps_targets(make_sim):
    sim = make_sim(['DE', 'DE', 'DE', 'FR'], replication=2)
    created = sim.execute(Insert('k', ROW, DE))
    assert sim.execute(Update('k', {'c0': b'bye'})).ok
    assert holders(sim, 'k') == sorted(created.targets)
    for t in created.targets:
        assert sim.nodes[t].target_store['k'].columns['c0'] == b'bye'
        assert sim.nodes[t].target_store['k'].dhr == DE


def test_standard_update(make_sim):
    sim = make_sim(['DE', 'FR', 'UK'], replication=3)
    sim.execute(Insert('k', ROW))
    assert sim.execute(Update('k', {'c0': b'bye'})).ok
    assert all(state.data_store['k'].columns['c0'] == b'bye' for state in sim.nodes.values())


def test_delete_removes_copies_and_references(make_sim):
    sim = make_sim(['DE', 'DE', 'FR', 'US'], replication=2)
    sim.execute(Insert('k', ROW, DE))
    assert sim.execute(Delete('k')).ok
    assert holders(sim, 'k') == holders(sim, 'k', 'relay_store') == holders(sim, 'k', 'data_store') == []
    assert sim.execute(Select('k')).status == NOT_FOUND


def test_replication_degrades_to_eligible_nodes(make_sim):
    sim = make_sim(['DE', 'FR', 'US'], replication=3)
    reply = sim.execute(Insert('k', ROW, DE))
    assert reply.ok and reply.degraded
    assert reply.targets == (0,)
    assert holders(sim, 'k', 'relay_store') == [0, 1, 2]


def test_one_reply_per_read(make_sim):
    sim = make_sim(['DE', 'DE', 'DE', 'FR'], replication=3)
    sim.execute(Insert('k', ROW, DE))
    before = len(sim.stats.replies)
    assert sim.execute(Select('k')).columns == ROW
    assert len(sim.stats.replies) == before + 1


def test_standard_create_takes_one_round_trip(make_sim):
    sim = make_sim(['DE', 'FR', 'UK', 'US'])
    responsible = sim.ring.responsible_nodes('k', 1)[0]
    elsewhere = next(n for n in sim.nodes if n != responsible)
    assert sim.execute(Insert('k', ROW), coordinator=elsewhere).qct == 100 * NS_PER_MS
    assert sim.execute(Select('k'), coordinator=responsible).qct == 0


def test_later_write_wins(make_sim):
    sim = make_sim(['DE', 'FR', 'UK'], replication=3)
    sim.execute(Insert('k', ROW))
    sim.execute(Insert('k', {'c0': b'second'}))
    assert sim.execute(Select('k')).columns == {'c0': b'second'}
