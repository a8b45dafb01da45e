"""Exception hierarchy shared by the whole toolkit.

Every error carries a machine-readable ``category`` so batch drivers can map
failures to exit codes without parsing messages.
"""

from __future__ import annotations


class ChromalignError(Exception):
    """Base class for all toolkit errors."""

    category = "error"


class InputError(ChromalignError):
    """Unreadable, missing or undecodable input resource."""

    category = "input"


class FormatError(ChromalignError):
    """Malformed document in one of the textual interchange formats."""

    category = "format"


class ValidationError(ChromalignError):
    """Domain invariant violated (bad shapes, negative steps, bad config...)."""

    category = "validation"


class DegenerateGeometryError(ChromalignError):
    """Geometry too degenerate to proceed (e.g. self-intersecting polygon)."""

    category = "degenerate-geometry"


class EmptyPeakSetError(ChromalignError):
    """Peak extraction produced no centroids; downstream registration is impossible."""

    category = "empty-peaks"


class NumericalUnderflowError(ChromalignError):
    """All mixture responsibilities underflowed with no noise floor to absorb them."""

    category = "numeric-underflow"


class SingularSystemError(ChromalignError):
    """Linear system remained singular after the ridge guard."""

    category = "singular-system"


class UndefinedMetricError(ChromalignError):
    """Requested score is undefined on the given inputs (e.g. constant image)."""

    category = "undefined-metric"
