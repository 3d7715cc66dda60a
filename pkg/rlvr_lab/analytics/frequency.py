"""Which tokens sit at the high and low end of their response's entropy profile."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import pandas as pd

from rlvr_lab.envs.vocab import VOCAB, Vocabulary
from rlvr_lab.pipeline.types import RolloutLogRecord

DEFAULT_TOP_K = 20
DEFAULT_MIN_COUNT = 10

_COLUMNS = ["rank", "token_id", "symbol", "count"]


@dataclass
class FrequencyTables:
    high: pd.DataFrame
    low: pd.DataFrame


def _ranked(counts: Counter, min_count: int, vocab: Vocabulary) -> pd.DataFrame:
    items = sorted(((tok, n) for tok, n in counts.items() if n >= min_count), key=lambda kv: (-kv[1], kv[0]))
    rows = [
        {"rank": i + 1, "token_id": tok, "symbol": vocab.symbols[tok] if tok < len(vocab) else str(tok), "count": n}
        for i, (tok, n) in enumerate(items)
    ]
    return pd.DataFrame(rows, columns=_COLUMNS)


def token_frequency_report(
    records: Iterable[RolloutLogRecord],
    top_k_per_response: int = DEFAULT_TOP_K,
    min_count: int = DEFAULT_MIN_COUNT,
    vocab: Vocabulary = VOCAB,
) -> FrequencyTables:
    """Count token identities among each response's top-k highest and lowest entropy positions.

    Ties in entropy keep sequence order. Tokens seen fewer than
    ``min_count`` times are dropped; tables rank by count, then token id.
    """
    high: Counter = Counter()
    low: Counter = Counter()
    for rec in records:
        ent = np.asarray(rec.entropies, dtype=np.float64)
        if ent.size == 0:
            continue
        tokens = np.asarray(rec.tokens)
        high.update(int(t) for t in tokens[np.argsort(-ent, kind="stable")[:top_k_per_response]])
        low.update(int(t) for t in tokens[np.argsort(ent, kind="stable")[:top_k_per_response]])
    return FrequencyTables(_ranked(high, min_count, vocab), _ranked(low, min_count, vocab))
