import numpy as np
import pytest

from const import FIT_NODE_SHARE, FIT_REGIONS, GRID_OPTIONS
from dhr import DhrRequest
from errors import ParamError
from query import Delete, Insert, Select, Update
from settings import KEY_BYTES, NS_PER_MS
from workload import (fig6_throughput, fig7_fit, fit_capabilities, fit_demand, fit_node_counts, generate,
                      grid_capabilities, grid_registry, item_key, payload_columns, synthetic_microblog,
                      uniform_crud)


def test_keys_have_a_fixed_width():
    assert len(item_key(5)) == len(item_key(123456)) == KEY_BYTES
    assert item_key(5, prefix='u1-').startswith('u1-')


def test_payload_is_split_over_the_columns():
    columns = payload_columns(200, 10)
    assert list(columns) == [f'c{i}' for i in range(10)]
    assert sum(len(v) for v in columns.values()) == 200
    assert [len(v) for v in payload_columns(7, 3).values()] == [3, 2, 2]


def test_throughput_stream():
    arrivals = list(fig6_throughput(rate=100, inserts=5, seed=1))
    assert [a.at for a in arrivals] == [i * 10 * NS_PER_MS for i in range(5)]
    options = [DhrRequest(o) for o in GRID_OPTIONS]
    assert all(isinstance(a.stmt, Insert) and a.stmt.req in options for a in arrivals)
    assert arrivals == list(fig6_throughput(rate=100, inserts=5, seed=1))


def test_rates_must_be_positive():
    with pytest.raises(ParamError):
        list(fig6_throughput(rate=0, inserts=5, seed=1))


def test_grid_setup_covers_every_option():
    registry = grid_registry()
    caps = grid_capabilities()
    assert len(caps) == 10
    for option in GRID_OPTIONS:
        supporting = [c for c in caps if all(c[t] in wanted for t, wanted in option.items())]
        assert len(supporting) >= 2
    assert registry.ids() == ['a', 'b']


def test_fit_node_counts():
    assert fit_node_counts() == [64, 17, 16, 2, 1]
    assert fit_node_counts(10) == [6, 2, 2, 0, 0]
    assert len(fit_capabilities()) == 100


def test_fit_demand_moves_away_from_the_node_distribution():
    assert fit_demand(0) == pytest.approx(np.asarray(FIT_NODE_SHARE) / 100)
    assert fit_demand(1)[0] == 0
    assert fit_demand(0.5).sum() == pytest.approx(1)
    with pytest.raises(ParamError):
        fit_demand(1.5)


def test_fit_stream_demands_one_region():
    arrivals = list(fig7_fit(0.3, 200, seed=2, chunk=64))
    assert len(arrivals) == 200
    for a in arrivals:
        [(type_id, wanted)] = a.stmt.req.demands.items()
        assert type_id == 'location' and len(wanted) == 1 and next(iter(wanted)) in FIT_REGIONS


def test_crud_only_touches_live_keys():
    live = set()
    arrivals = list(uniform_crud(300, seed=4))
    assert isinstance(arrivals[0].stmt, Insert)
    for a in arrivals:
        stmt = a.stmt
        if isinstance(stmt, Insert):
            assert stmt.key not in live
            live.add(stmt.key)
        else:
            assert stmt.key in live
            if isinstance(stmt, Delete):
                live.remove(stmt.key)
    kinds = {type(a.stmt) for a in arrivals}
    assert kinds == {Insert, Select, Update, Delete}


@pytest.mark.parametrize('mix', [{}, {'create': -1}, {'scan': 1}, {'create': 0}])
def test_invalid_mix(mix):
    with pytest.raises(ParamError):
        list(uniform_crud(5, seed=1, mix=mix))


def test_microblog_reads_earlier_posts():
    written = set()
    posts = reads = 0
    for a in synthetic_microblog(users=20, posts=30, reads=50, seed=5):
        if isinstance(a.stmt, Insert):
            written.add(a.stmt.key)
            posts += 1
        else:
            assert a.stmt.key in written
            reads += 1
    assert (posts, reads) == (30, 50)


def test_generate_by_name():
    assert len(list(generate('uniform-crud', {'ops': 5}, 1))) == 5
    assert list(generate('uniform-crud', {'ops': 0}, 1)) == []
    with pytest.raises(ParamError):
        generate('tpcc', {}, 1)
    with pytest.raises(ParamError):
        generate('uniform-crud', {'operations': 5}, 1)
