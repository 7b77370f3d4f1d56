"""Exception types shared across the package."""


class ColoraError(Exception):
    """Base class for all library-specific failures."""


class RankDeficient(ColoraError):
    """Matrix does not have full column rank at the working tolerance."""


class SingularSystem(ColoraError):
    """Unregularized normal equations are numerically singular."""


class BadBeta(ColoraError):
    """Subspace perturbation radius outside [0, 1)."""


class DegenerateAverage(ColoraError):
    """Task average is rank deficient, alignment ratio undefined."""


class ShapeMismatch(ColoraError):
    """Operands do not have the agreed shapes."""


class Diverged(ColoraError):
    """Gradient-descent iterates became non-finite."""


class SchemaMismatch(ColoraError):
    """CSV does not match the expected scenario schema."""
