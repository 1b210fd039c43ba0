"""Exception hierarchy. The CLI maps these onto exit codes."""


class InputError(ValueError):
    """Malformed or out-of-contract input (exit code 2)."""


class InvalidMeasureError(InputError):
    """Probabilities that are not positive or do not sum to one."""


class ResolutionError(InputError):
    """A boundary germ is too shallow to answer the question asked."""


class UnstableLimitError(ResolutionError):
    """A prefix of the walk was not retained over the confirmation horizon."""


class EmptyGeodesicError(InputError):
    """The two boundary germs coincide, so there is no geodesic joining them."""


class InsufficientDataError(InputError):
    """Too few samples for a fit."""


class ResourceError(RuntimeError):
    """A size or budget limit was exceeded (exit code 3)."""
