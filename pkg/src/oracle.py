"""
Optimal load balance, known a posteriori

Includes:

- ```even_split_loads``` / ```optimal_balance```: every group's items split evenly over the group's nodes
- ```brute_force_balance```: the same optimum by enumerating every assignment (small instances only)
- ```even_split_feasible```: whether overlapping eligible sets still allow a perfectly even load
"""

import itertools
import math

from balance import load_balance_metric
from errors import ParamError

BRUTE_FORCE_LIMIT = 200_000  # assignments enumerated at most


def even_split_loads(node_counts, items, item_size=1):
    """
    Loads after splitting each group's items as evenly as possible over its nodes

    Attributes:
        node_counts (list): Nodes per group
        items (list): Items per group
        item_size (int): Bytes per item

    Returns the loads of all nodes, group after group
    """
    if len(node_counts) != len(items):
        raise ParamError('node_counts and items differ in length')
    loads = []
    for nodes, count in zip(node_counts, items):
        if nodes < 0 or count < 0:
            raise ParamError('negative node or item count')
        if nodes == 0:
            if count:
                raise ParamError(f'{count} items demand a group without nodes')
            continue
        q, rem = divmod(count, nodes)
        loads += [(q + 1) * item_size] * rem + [q * item_size] * (nodes - rem)
    return loads


def balance_of(loads):
    """The metric, with a cluster of no nodes counting as even"""
    return load_balance_metric(loads) if len(loads) else 0.0


def optimal_balance(node_counts, items):
    """Load balance metric of the even split, the best any placement can do"""
    return balance_of(even_split_loads(node_counts, items))


def compositions(total, parts):
    """Every way to write ```total``` as an ordered sum of ```parts``` non-negative integers"""
    if parts == 1:
        yield (total,)
        return
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        previous = -1
        result = []
        for bar in bars:
            result.append(bar - previous - 1)
            previous = bar
        result.append(total + parts - 1 - previous - 1)
        yield tuple(result)


def brute_force_balance(node_counts, items):
    """Minimum metric over every assignment of each group's items to the group's nodes"""
    groups = []
    space = 1
    for nodes, count in zip(node_counts, items):
        if nodes == 0:
            if count:
                raise ParamError(f'{count} items demand a group without nodes')
            continue
        space *= math.comb(count + nodes - 1, nodes - 1)
        if space > BRUTE_FORCE_LIMIT:
            raise ParamError('instance too large for enumeration')
        groups.append(list(compositions(count, nodes)))
    return min(balance_of([load for part in combo for load in part])
               for combo in itertools.product(*groups))


def even_split_feasible(options, nodes, tolerance=1e-9):
    """
    Whether demand over overlapping eligible sets can be spread to exactly equal loads

    A fractional assignment giving every node the mean load exists iff every set S of options fits into
    the nodes eligible for S: demand(S) <= mean * |nodes eligible for some option in S|

    Attributes:
        options (list): (demand, eligible nodes) per DHR option
        nodes (list): All nodes
    """
    nodes = set(nodes)
    options = [(float(w), set(e) & nodes) for w, e in options if w > 0]
    if not nodes:
        raise ParamError('no nodes given')
    mean = sum(w for w, _ in options) / len(nodes)
    if any(n not in set().union(*(e for _, e in options)) for n in nodes) and mean > 0:
        return False
    for size in range(1, len(options) + 1):
        for subset in itertools.combinations(options, size):
            demand = sum(w for w, _ in subset)
            neighbours = set().union(*(e for _, e in subset))
            if demand > mean * len(neighbours) + tolerance:
                return False
    return True
