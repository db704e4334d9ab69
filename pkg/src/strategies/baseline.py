"""
The traditional store: every item lives at its responsible nodes, requirements are ignored

Coordinators never take the indirection path with this strategy, so ```select``` only serves the load-level simulation
"""

from balance import Selection
from strategies.strategy import PlacementStrategy


class BaselineStrategy(PlacementStrategy):
    """
    Hash placement
    """
    name = 'baseline'
    uses_indirection = False

    def select(self, eligible, responsible, r, view, size, rng, record=True):
        chosen = list(responsible[:r])
        if record:
            for n in chosen:
                view.record(n, size)
        return Selection(chosen, False)
