"""
The default strategy: eligible responsible nodes first, then the least loaded eligible nodes
"""

from balance import select_targets
from strategies.strategy import PlacementStrategy


class BalancedStrategy(PlacementStrategy):
    """
    Least-loaded placement driven by the coordinator's load view
    """
    name = 'balanced'

    def select(self, eligible, responsible, r, view, size, rng, record=True):
        return select_targets(eligible, responsible, r, view, size, record=record, rng=rng)
