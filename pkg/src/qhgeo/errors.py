"""Exception types shared across the toolkit."""


class ExteriorPointError(ValueError):
    """A queried point lies on or outside the domain boundary."""


class UnsupportedDualError(ValueError):
    """The norm has no usable dual-norm rule."""


class NonConvergenceError(RuntimeError):
    """An iterative routine failed to reach its tolerance."""


class QuadratureDepthError(NonConvergenceError):
    """Adaptive quadrature exceeded its recursion depth limit."""


class NoPathError(RuntimeError):
    """No admissible connecting path could be constructed."""
