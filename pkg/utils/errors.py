"""Exceptions raised across the dimer laboratory."""


class DimerLabError(RuntimeError):
    """Base class for every domain failure."""


class InvalidLattice(ValueError):
    """Lattice parameters that cannot carry a perfect matching."""


class NoPerfectMatching(DimerLabError):
    """The (reduced) graph admits no perfect matching."""


class NonFiniteWeight(DimerLabError):
    """An effective edge weight or penalty is NaN or infinite."""


class TooLarge(DimerLabError):
    """Input exceeds the size an exhaustive oracle is allowed to handle."""


class NotBipartite(DimerLabError):
    """A bipartite-only solver was handed a monopartite graph."""


class MalformedMatching(DimerLabError):
    """A matching or symmetric difference broke a structural invariant."""


class OptimalityViolation(DimerLabError):
    """A solver result failed its optimality certificate or a monotonicity check."""


class InsufficientData(DimerLabError):
    """Too few samples, points or strata for the requested estimate."""


class DegenerateWindow(DimerLabError):
    """A fit window whose abscissae (or ordinates) are all equal."""


class NonConvergence(DimerLabError):
    """A nonlinear fit failed and so did its linear fallback."""


class ConfigMismatch(DimerLabError):
    """An output directory already holds records for a different configuration."""
