"""
Defines how a placement strategy picks the target nodes of an item

Override the ```select``` method to create a valid custom strategy
"""

from abc import ABC, abstractmethod


class PlacementStrategy(ABC):
    """
    Abstract class choosing targets among the eligible nodes

    Attributes:
        name (str): Name used on the command line and in CSV files
        uses_indirection (bool): False if items are always stored at their responsible nodes (DHRs ignored)
    """
    name = ''
    uses_indirection = True

    def __str__(self):
        return self.name

    @abstractmethod
    def select(self, eligible, responsible, r, view, size, rng, record=True):
        """
        Implement this method for a valid strategy

        Attributes:
            eligible (list): Nodes complying with the item's DHRs, ordered by node id (never empty)
            responsible (list): Responsible nodes of the key in ring order
            r (int): Replication factor
            view (LoadView): The coordinator's load view
            size (int): Payload bytes of the item
            rng (numpy.random.Generator): The coordinator's random source
            record (bool): Update the view's estimators for the chosen nodes

        Should return a ```balance.Selection``` of at most ```r``` distinct eligible nodes
        """
        pass
