"""
Create a random strategy i.e. targets are drawn uniformly from the eligible nodes (used for testing and as a comparison curve)
"""

from balance import Selection
from errors import UnsatisfiableDhr
from strategies.strategy import PlacementStrategy


class RandomStrategy(PlacementStrategy):
    """
    Ignores loads and the responsible nodes
    """
    name = 'random'

    def select(self, eligible, responsible, r, view, size, rng, record=True):
        eligible = list(eligible)
        if not eligible:
            raise UnsatisfiableDhr('no eligible node')
        picks = rng.choice(len(eligible), size=min(r, len(eligible)), replace=False)
        chosen = [eligible[int(i)] for i in picks]
        if record:
            for n in chosen:
                view.record(n, size)
        return Selection(chosen, len(eligible) < r)
