"""Exception types raised across the package."""


class ConsensusLabError(Exception):
    """Base class for all errors raised by consensus_lab."""


class InvalidNetwork(ConsensusLabError, ValueError):
    """Edge list or conductances violate the network invariants."""


class DisconnectedGraph(ConsensusLabError, ValueError):
    """The underlying undirected graph has no spanning tree."""


class EmptyCycleSpace(ConsensusLabError, ValueError):
    """The graph is a tree, so there are no fundamental cycles."""


class RankDeficientIntertwiner(ConsensusLabError, ValueError):
    """The intertwining matrix does not have full row rank."""


class NotZeroRowSum(ConsensusLabError, ValueError):
    """The coupling matrix does not annihilate the all-ones vector."""


class MultipleZeroEVs(ConsensusLabError, ValueError):
    """Zero is a repeated eigenvalue, so alpha and rho are undefined."""


class NotNormal(ConsensusLabError, ValueError):
    """The coupling matrix fails the commutator test D D^T = D^T D."""


class NotConvergent(ConsensusLabError, ValueError):
    """The reduced coupling matrix is not stable."""


class PreconditionNotDissipative(ConsensusLabError, ValueError):
    """The schedule is not uniformly dissipative over the horizon."""


class IntegrationBlowUp(ConsensusLabError, FloatingPointError):
    """A trajectory left the finite range during integration."""

    def __init__(self, time: float, norm: float):
        super().__init__(f"state norm {norm:.3e} exceeded the blow-up limit at t={time:.6g}")
        self.time = time
        self.norm = norm
