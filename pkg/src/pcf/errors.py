"""Exception hierarchy shared across the toolkit.

Each CLI-facing error class carries a stable exit code so commands can map
domain failures to machine-readable statuses.
"""


class PcfError(Exception):
    """Base class for all domain errors."""

    exit_code = 3


class DataError(PcfError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class UnknownCategory(DataError):
    """A CSV cell holds a label that is not in the schema's category list."""


class OutOfRange(DataError):
    """A raw numeric value falls outside every bin of its discretization rule."""


class InsufficientClass(DataError):
    """A target class has too few rows for a stratified split."""


class InfeasibleKnowledge(PcfError):
    """Required and forbidden edge constraints cannot be satisfied together."""

    exit_code = 4


class ZeroEvidence(PcfError):
    """Evidence with probability zero was supplied to exact inference."""

    exit_code = 5


class ZeroConditioning(PcfError):
    """Conditioning event has zero probability mass in the tree."""

    exit_code = 5


class NotEnforceable(PcfError):
    """An intervention cannot be forced on some branch of the tree."""

    exit_code = 5


class UndefinedMetric(PcfError):
    """A metric denominator is zero for the given confusion counts."""

    exit_code = 3
