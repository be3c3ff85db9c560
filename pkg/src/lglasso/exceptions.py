"""Exception types raised across the package."""


class LatentGroupLassoError(Exception):
    """Base class for every error raised by lglasso."""


class GroupSetError(LatentGroupLassoError, ValueError):
    """Invalid group collection."""


class UncoveredCovariate(GroupSetError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"covariate {index} belongs to no group")


class NonpositiveWeight(GroupSetError):
    def __init__(self, group, weight):
        self.group = group
        self.weight = weight
        super().__init__(f"group {group} has non-positive weight {weight!r}")


class DuplicateGroup(GroupSetError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"group {sorted(group)} appears more than once")


class CoverViolation(LatentGroupLassoError, ValueError):
    """The candidate cover does not contain the group."""


class Infeasible(LatentGroupLassoError):
    """Equality-constrained program over the nonnegative orthant has no solution."""


class TopologyMismatch(LatentGroupLassoError, ValueError):
    pass


class UncoveredMass(LatentGroupLassoError, ValueError):
    """A nonzero coefficient has zero coverage mass."""


class NotConverged(LatentGroupLassoError):
    """An iterative routine hit its budget.

    ``result`` carries the best iterate found so far.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DegenerateDesign(LatentGroupLassoError):
    pass


class SingularCovariance(LatentGroupLassoError):
    pass


class GridMismatch(LatentGroupLassoError, ValueError):
    pass
