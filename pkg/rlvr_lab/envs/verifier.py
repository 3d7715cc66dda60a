"""Rule-based answer checking.

The verifier reads the text after the final answer delimiter of a
transcript (prompt plus completion), up to the stop token or the end of
the sequence, and compares it canonically to the ground truth.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from rlvr_lab.envs.tasks import TaskInstance
from rlvr_lab.envs.vocab import VOCAB, Vocabulary


def extract_answer(tokens: Sequence[int], vocab: Vocabulary = VOCAB) -> Optional[str]:
    """Text between the last delimiter and the first following stop token.

    Returns None when the sequence holds no delimiter.
    """
    ids = [int(t) for t in tokens]
    delim = vocab.delimiter_id
    positions = [i for i, t in enumerate(ids) if t == delim]
    if not positions:
        return None
    tail = ids[positions[-1] + 1:]
    if vocab.stop_id in tail:
        tail = tail[:tail.index(vocab.stop_id)]
    return vocab.decode(t for t in tail if t not in vocab.whitespace_ids)


def canonicalize(answer: str) -> str:
    """Drop whitespace and leading zeros; an all-zero answer becomes "0"."""
    compact = "".join(answer.split())
    stripped = compact.lstrip("0")
    if not stripped and compact:
        return "0"
    return stripped


def is_equivalent(response: Sequence[int], ground_truth: str, vocab: Vocabulary = VOCAB) -> bool:
    answer = extract_answer(response, vocab)
    if not answer:
        return False
    return canonicalize(answer) == canonicalize(ground_truth)


def random_guess_baseline(
    instance: TaskInstance,
    max_new_tokens: int,
    vocab: Vocabulary = VOCAB,
) -> float:
    """Exact probability that a uniform policy's completion is judged correct.

    Runs a forward pass over an automaton tracking how much of the
    canonical answer has been matched since the last delimiter. The
    prompt ends with a delimiter, so every completion starts fresh.
    Completions stop at the stop token or after ``max_new_tokens``.
    """
    target = canonicalize(instance.ground_truth)
    if not target:
        return 0.0
    length = len(target)
    zero_target = target == "0"
    n_vocab = len(vocab)
    p_tok = 1.0 / n_vocab

    # state index: j in [0, length] matched chars with no leading zero seen,
    # length + 1 -> nothing matched but leading zeros seen, length + 2 -> dead.
    zeros = length + 1
    dead = length + 2
    n_states = length + 3

    symbol_of = vocab.symbols
    space_ids = vocab.whitespace_ids
    transition = np.zeros((n_states, n_states))
    for state in range(n_states):
        for tok in range(n_vocab):
            if tok == vocab.stop_id:
                continue
            if tok == vocab.delimiter_id:
                nxt = 0
            elif tok in space_ids:
                nxt = state
            elif state == dead:
                nxt = dead
            elif symbol_of[tok] == "0" and state in (0, zeros):
                nxt = zeros
            elif state == zeros:
                # after leading zeros only the first answer char may follow
                nxt = 1 if not zero_target and symbol_of[tok] == target[0] else dead
            elif state < length and symbol_of[tok] == target[state]:
                nxt = state + 1
            else:
                nxt = dead
            transition[state, nxt] += p_tok

    accepting = np.zeros(n_states)
    if zero_target:
        accepting[zeros] = 1.0
    else:
        accepting[length] = 1.0

    dist = np.zeros(n_states)
    dist[0] = 1.0
    prob = 0.0
    for _ in range(max_new_tokens):
        prob += p_tok * float(dist @ accepting)
        dist = dist @ transition
    # truncated completions are judged on everything generated
    prob += float(dist @ accepting)
    return prob
