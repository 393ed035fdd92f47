"""
Training traces shared by every trainer
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-9


@dataclass
class TrainTrace:
    """Per-iteration record of a training run"""

    method: str
    log_likelihoods: List[float] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    def record(self, log_likelihood: float, residual: Optional[float] = None) -> None:
        if self.log_likelihoods:
            drop = self.log_likelihoods[-1] - log_likelihood
            if drop > MONOTONE_SLACK:
                logger.warning(
                    f"{self.method}: log-likelihood decreased by {drop:.3e} "
                    f"at iteration {len(self.log_likelihoods)}"
                )
        self.log_likelihoods.append(float(log_likelihood))
        if residual is not None:
            self.residuals.append(float(residual))

    @property
    def final_log_likelihood(self) -> float:
        return self.log_likelihoods[-1] if self.log_likelihoods else float("nan")

    def is_monotone(self, slack: float = MONOTONE_SLACK) -> bool:
        lls = self.log_likelihoods
        return all(b >= a - slack for a, b in zip(lls, lls[1:]))

    def first_iteration_below(self, threshold: float) -> Optional[int]:
        """Index of the first recorded residual at or below threshold"""
        for i, r in enumerate(self.residuals):
            if r <= threshold:
                return i
        return None
