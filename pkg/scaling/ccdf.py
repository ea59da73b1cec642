"""Empirical complementary distribution functions."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from utils.errors import InsufficientData

MIN_SAMPLES = 100


@dataclass(frozen=True, eq=False)
class Ccdf:
    """P[S > s] evaluated just above each distinct value s.

    Attributes:
        values: Sorted distinct sample values.
        tail: Fraction of samples strictly greater than each value.
        n_samples: Sample count behind the estimate (0 for exact curves).
        samples: Raw samples for bootstrap resampling, None for exact curves.
    """

    values: np.ndarray
    tail: np.ndarray
    n_samples: int
    samples: np.ndarray | None = None

    def pairs(self) -> list[tuple[float, float]]:
        return [(float(s), float(p)) for s, p in zip(self.values, self.tail)]

    def at(self, s: float) -> float:
        """P[S > s] for any s."""
        if self.samples is not None:
            return float(np.mean(self.samples > s))
        index = np.searchsorted(self.values, s, side="right") - 1
        return 1.0 if index < 0 else float(self.tail[index])


def empirical_ccdf(samples: Sequence[float], min_samples: int = MIN_SAMPLES) -> Ccdf:
    """Step-function CCDF of the samples.

    Args:
        samples: Observed values, e.g. loop lengths S.
        min_samples: Minimum sample count.

    Returns:
        The CCDF, monotone non-increasing, carrying the raw samples.

    Raises:
        InsufficientData: Fewer than `min_samples` samples.
    """
    data = np.sort(np.asarray(samples, dtype=np.float64))
    if data.size < max(min_samples, 1):
        raise InsufficientData(f"CCDF needs at least {min_samples} samples, got {data.size}")

    values, counts = np.unique(data, return_counts=True)
    at_most = np.cumsum(counts)
    tail = (data.size - at_most) / data.size
    return Ccdf(values=values, tail=tail, n_samples=int(data.size), samples=data)


def exact_ccdf(values: Sequence[float], tail: Sequence[float]) -> Ccdf:
    """Wrap a known CCDF (synthetic tests, reference curves)."""
    return Ccdf(
        values=np.asarray(values, dtype=np.float64),
        tail=np.asarray(tail, dtype=np.float64),
        n_samples=0,
    )
