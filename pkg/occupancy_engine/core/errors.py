"""
Errors
---------------------------
Exceptions raised by the engine.
Every validation failure derives from :py:class:`OccupancyError`, which is a `ValueError`,
so callers that only catch `ValueError` keep working.
"""
import logging
from typing import Optional

logger = logging.getLogger(__name__)


class OccupancyError(ValueError):
    """Root of the validation errors of the engine."""


class NonSquare(OccupancyError):
    pass


class NonStochastic(OccupancyError):
    pass


class NegativeEntry(OccupancyError):
    pass


class InvalidDistribution(OccupancyError):
    pass


class InvalidStateSpace(OccupancyError):
    pass


class InvalidSiteFrame(OccupancyError):
    pass


class DegenerateBandwidth(OccupancyError):
    pass


class SingularBandwidth(OccupancyError):
    pass


class ShapeMismatch(OccupancyError):
    pass


class EmptyData(OccupancyError):
    pass


class ZeroSupport(OccupancyError):
    """A record has zero probability under the current latent state."""


class AllZeroWeights(OccupancyError):
    """Every candidate state of a site has zero full-conditional weight."""


class EmptyDraws(OccupancyError):
    pass


class DegenerateChains(OccupancyError):
    pass


class ReplicatedData(OccupancyError):
    pass


class NoTransitions(OccupancyError):
    pass


class NonConvergent(OccupancyError):
    pass


class AbsorbingState(OccupancyError):
    pass


class ZeroSubdominant(OccupancyError):
    pass


class DuplicateRecord(OccupancyError):
    pass


class UnknownSite(OccupancyError):
    pass


class ConfigError(OccupancyError):
    pass


class StudyError(OccupancyError):
    pass


class ParseError(OccupancyError):
    """A malformed row of a dataset file; `line` is 1-based."""

    def __init__(self, msg: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class ChainError(OccupancyError):
    """An update failed inside a chain; carries the chain and sweep where it happened."""

    def __init__(self, msg: str, chain: Optional[int] = None, iteration: Optional[int] = None):
        self.chain = chain
        self.iteration = iteration
        context = []
        if chain is not None:
            context += [f"chain={chain}"]
        if iteration is not None:
            context += [f"iteration={iteration}"]
        super().__init__(f"[{', '.join(context)}] {msg}" if context else msg)


class CacheIncoherent(OccupancyError):
    """The incrementally maintained dominance cache drifted from a full recomputation."""


class ConvergenceFailure(Exception):
    """Tracked parameters exceed the R-hat threshold in a strict run."""


def error_handler(error_msgs: list, msg: str, exception: Optional[Exception] = None, logging_flag: bool = True):
    """
    Collects error messages of a multi-part operation (several chains, several study fits).

    Parameters
    ----------
    error_msgs : list
       List that contains error messages. Every next error message is appended to it.
    msg: str
        Error message which is to be added into `error_msgs`.
    exception : Optional[Exception]
        Invoked exception. If it was set, it is used to obtain logging traceback.
    logging_flag : bool
        The flag which defines whether logging is nesessary.
    """
    error_msgs.append(msg)
    logging_flag and logger.error(msg, exc_info=exception)


def format_errors(error_msgs: list) -> str:
    return f"Found {len(error_msgs)} errors: " + " ".join([f"{i}) {er}" for i, er in enumerate(error_msgs, 1)])
