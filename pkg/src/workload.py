"""
Statement streams for the simulator

Includes:

- ```fig6_throughput```: inserts at a fixed rate, each demanding one of the valid combinations of a 2x2 DHR grid
- ```fig7_fit```: inserts demanding one location, drawn from a regional distribution shifted away from the node distribution
- ```uniform_crud```: a create / read / update / delete mix over a growing key set
- ```synthetic_microblog```: users post items pinned to their home region and fetch random earlier posts
- ```generate```: the streams by name

Every stream is a generator of ```Arrival``` (time offset in ns, statement), fully determined by its seed.
The setups the streams are made for (registries and node capabilities) live here as well.
"""

from collections import namedtuple

import numpy as np

from const import (FIT_NODE_SHARE, FIT_NODES, FIT_REGIONS, FIT_SHIFTED_SHARE, GRID_NODES, GRID_OPTIONS, GRID_TYPES,
                   KIND_EQUALITY, OP_CREATE, OP_DELETE, OP_READ, OP_UPDATE)
from dhr import DhrRequest, DhrType, Registry
from errors import ParamError
from query import Delete, Insert, Select, Update
from settings import FIG7_RATE, KEY_BYTES, NS_PER_S, NUM_COLUMNS, PAYLOAD_BYTES

Arrival = namedtuple('Arrival', ['at', 'stmt'])


def item_key(i, prefix=''):
    """Fixed width key (KEY_BYTES characters)"""
    return f'{prefix}{i:0{KEY_BYTES - len(prefix)}d}'


def payload_columns(payload_bytes=PAYLOAD_BYTES, num_columns=NUM_COLUMNS, fill=b'x'):
    """Row of ```num_columns``` columns sharing ```payload_bytes``` bytes"""
    width, rest = divmod(payload_bytes, num_columns)
    return {f'c{i}': fill * (width + (1 if i < rest else 0)) for i in range(num_columns)}


def arrival_time(i, rate):
    return i * NS_PER_S // rate


def check_rate(rate):
    if rate <= 0:
        raise ParamError(f'rate must be positive, got {rate}')


############## Setups ##############

def grid_registry():
    return Registry(DhrType(t, KIND_EQUALITY, props) for t, props in GRID_TYPES.items())


def grid_capabilities():
    """Capabilities of the ten nodes of the throughput setup"""
    return [{'a': a, 'b': b} for a, b in GRID_NODES]


def fit_registry():
    return Registry([DhrType('location', KIND_EQUALITY, FIT_REGIONS)])


def fit_node_counts(nodes=FIT_NODES):
    """Nodes per region, largest remainder rounding of the regional shares"""
    shares = np.asarray(FIT_NODE_SHARE) / 100 * nodes
    counts = np.floor(shares).astype(int)
    for i in np.argsort(-(shares - counts), kind='stable')[:nodes - counts.sum()]:
        counts[i] += 1
    return [int(c) for c in counts]


def fit_capabilities(nodes=FIT_NODES):
    """Capabilities of the DHR-fit setup: every node supports the location of its region"""
    caps = []
    for region, count in zip(FIT_REGIONS, fit_node_counts(nodes)):
        caps += [{'location': region}] * count
    return caps


def fit_demand(shift):
    """
    Demand share per region at ```shift``` (0: equal to the node distribution, 1: fully shifted)

    Returns a normalized numpy array in ```FIT_REGIONS``` order
    """
    if not 0 <= shift <= 1:
        raise ParamError(f'shift must be within [0, 1], got {shift}')
    demand = (1 - shift) * np.asarray(FIT_NODE_SHARE) + shift * np.asarray(FIT_SHIFTED_SHARE)
    return demand / demand.sum()


############## Streams ##############

def fig6_throughput(rate, inserts, seed, payload_bytes=PAYLOAD_BYTES):
    """Inserts at ```rate```/s, each drawing one of the grid's DHR options uniformly"""
    check_rate(rate)
    rng = np.random.default_rng(seed)
    options = [DhrRequest(o) for o in GRID_OPTIONS]
    columns = payload_columns(payload_bytes)
    for i in range(inserts):
        req = options[int(rng.integers(len(options)))]
        yield Arrival(arrival_time(i, rate), Insert(item_key(i), columns, req))


def fig7_fit(shift, inserts, seed, rate=None, payload_bytes=PAYLOAD_BYTES, chunk=65536):
    """Inserts demanding one location, drawn from ```fit_demand(shift)```"""
    rate = FIG7_RATE if rate is None else rate
    check_rate(rate)
    rng = np.random.default_rng(seed)
    demand = fit_demand(shift)
    options = [DhrRequest({'location': [region]}) for region in FIT_REGIONS]
    columns = payload_columns(payload_bytes)
    i = 0
    while i < inserts:
        for region in rng.choice(len(options), size=min(chunk, inserts - i), p=demand):
            yield Arrival(arrival_time(i, rate), Insert(item_key(i), columns, options[int(region)]))
            i += 1


DEFAULT_MIX = {OP_CREATE: 0.4, OP_READ: 0.3, OP_UPDATE: 0.2, OP_DELETE: 0.1}


def uniform_crud(ops, seed, rate=100, mix=None, options=({},), payload_bytes=PAYLOAD_BYTES):
    """
    A CRUD mix over the keys created so far

    Attributes:
        mix (dict): operation kind -> weight
        options (list): DHR demands drawn for creates ({} for none)
    """
    check_rate(rate)
    mix = dict(DEFAULT_MIX if mix is None else mix)
    if not mix or any(k not in DEFAULT_MIX for k in mix) or any(w < 0 for w in mix.values()):
        raise ParamError(f'invalid operation mix {mix!r}')
    total = sum(mix.values())
    if total <= 0:
        raise ParamError('operation mix has no weight')
    kinds = list(mix)
    weights = np.asarray([mix[k] for k in kinds], dtype=float) / total

    rng = np.random.default_rng(seed)
    requests = [DhrRequest(o) for o in options]
    columns = payload_columns(payload_bytes)
    live = []
    created = 0
    for i in range(ops):
        kind = kinds[int(rng.choice(len(kinds), p=weights))]
        if kind == OP_CREATE or not live:
            key = item_key(created)
            created += 1
            live.append(key)
            stmt = Insert(key, columns, requests[int(rng.integers(len(requests)))])
        else:
            key = live[int(rng.integers(len(live)))]
            if kind == OP_READ:
                stmt = Select(key)
            elif kind == OP_UPDATE:
                stmt = Update(key, {'c0': bytes([ord('a') + i % 26]) * len(columns['c0'])})
            else:
                live.remove(key)
                stmt = Delete(key)
        yield Arrival(arrival_time(i, rate), stmt)


def synthetic_microblog(users, posts, reads, seed, rate=100, payload_bytes=140):
    """
    Users bound to a home region post items that must stay in that region and fetch random earlier posts

    Regions follow the node distribution of the DHR-fit setup
    """
    check_rate(rate)
    if users <= 0 or posts < 0 or reads < 0:
        raise ParamError('users must be positive, posts and reads non-negative')
    if reads and not posts:
        raise ParamError('timeline reads need at least one post')
    rng = np.random.default_rng(seed)
    share = np.asarray(FIT_NODE_SHARE) / sum(FIT_NODE_SHARE)
    homes = rng.choice(len(FIT_REGIONS), size=users, p=share)
    requests = [DhrRequest({'location': [region]}) for region in FIT_REGIONS]
    columns = payload_columns(payload_bytes, num_columns=2)

    written = []
    remaining_posts, remaining_reads = posts, reads
    i = 0
    while remaining_posts or remaining_reads:
        post = not written or not remaining_reads or (
            remaining_posts and rng.random() < remaining_posts / (remaining_posts + remaining_reads))
        if post:
            user = int(rng.integers(users))
            key = item_key(len(written), prefix=f'u{user}-')
            written.append(key)
            stmt = Insert(key, columns, requests[int(homes[user])])
            remaining_posts -= 1
        else:
            stmt = Select(written[int(rng.integers(len(written)))])
            remaining_reads -= 1
        yield Arrival(arrival_time(i, rate), stmt)
        i += 1


WORKLOADS = {
    'fig6-throughput': fig6_throughput,
    'fig7-fit': fig7_fit,
    'uniform-crud': uniform_crud,
    'synthetic-microblog': synthetic_microblog,
}


def generate(kind, params, seed):
    """
    The stream ```kind``` with keyword ```params```

    Raises ```ParamError``` for unknown streams or parameters
    """
    try:
        make = WORKLOADS[kind]
    except KeyError:
        raise ParamError(f'unknown workload {kind!r}, choose one of {sorted(WORKLOADS)}') from None
    try:
        stream = make(seed=seed, **params)
        first = next(stream, None)
    except TypeError as e:
        raise ParamError(f'{kind}: {e}') from None
    if first is None:
        return iter(())
    return _chain(first, stream)


def _chain(first, rest):
    yield first
    yield from rest
