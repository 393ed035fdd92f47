"""
Error types for the maxent-hmm toolkit
All errors derive from ValueError so callers that only know about bad input still catch them
"""

from typing import Iterable, List


class MaxentHmmError(ValueError):
    """Base class for every error raised by the toolkit"""


class FeatureRangeError(MaxentHmmError):
    """A feature id is outside the model's feature range"""


class EmptyCandidatesError(MaxentHmmError):
    """An event block has no candidate outputs"""


class UnobservedFeaturesError(MaxentHmmError):
    """Training was asked to fit features that never fire on a true candidate"""

    def __init__(self, features: Iterable[int]):
        self.features: List[int] = sorted(int(f) for f in features)
        shown = ", ".join(str(f) for f in self.features[:20])
        more = "" if len(self.features) <= 20 else f" (+{len(self.features) - 20} more)"
        super().__init__(
            f"{len(self.features)} feature(s) have zero observed count: {shown}{more}; "
            f"prune them with prune_unobserved first"
        )


class PartitionError(MaxentHmmError):
    """A group partition is inconsistent with the data it is applied to"""


class NetworkError(MaxentHmmError):
    """An HMM network cannot be built or has the wrong shape for an operation"""


class NetworkValidationError(NetworkError):
    """An HMM network failed validation"""

    def __init__(self, violations: Iterable[str]):
        self.violations: List[str] = list(violations)
        super().__init__("invalid network: " + "; ".join(self.violations))


class ZeroProbabilityError(MaxentHmmError):
    """An observation has zero probability under the model"""


class ParseError(MaxentHmmError):
    """A line of an input file could not be parsed"""

    def __init__(self, source: str, line_no: int, reason: str):
        self.source = source
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{source}:{line_no}: {reason}")
