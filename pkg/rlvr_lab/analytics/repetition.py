"""n-gram repetition ratio, used as a collapse proxy."""

from collections import Counter
from typing import Sequence

DEFAULT_N = 4


def repetition_ratio(tokens: Sequence[int], n: int = DEFAULT_N) -> float:
    """1 - unique n-grams / total n-grams; 0 for sequences shorter than n."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    seq = list(tokens)
    if len(seq) < n:
        return 0.0
    ngrams = Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))
    total = len(seq) - n + 1
    return 1.0 - len(ngrams) / total
