"""Symbol vocabulary shared by every synthetic task."""

from __future__ import annotations

from typing import Iterable, Sequence

BOS = "<bos>"
STOP = "<stop>"
DELIMITER = "="
SPACE = " "

_SYMBOLS: tuple[str, ...] = (
    BOS,
    STOP,
    *"0123456789",
    *"abcdefghijkl",
    "+",
    "*",
    "^",  # sort marker
    "~",  # reverse marker
    DELIMITER,
    ",",
    SPACE,
    "-",
)


class Vocabulary:
    """Bidirectional symbol <-> id map."""

    def __init__(self, symbols: Sequence[str] = _SYMBOLS):
        if len(set(symbols)) != len(symbols):
            raise ValueError("vocabulary symbols must be unique")
        self.symbols = tuple(symbols)
        self._index = {s: i for i, s in enumerate(self.symbols)}

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def id(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise KeyError(f"symbol {symbol!r} not in vocabulary") from None

    @property
    def bos_id(self) -> int:
        return self._index[BOS]

    @property
    def stop_id(self) -> int:
        return self._index[STOP]

    @property
    def delimiter_id(self) -> int:
        return self._index[DELIMITER]

    @property
    def whitespace_ids(self) -> frozenset[int]:
        return frozenset({self._index[SPACE]})

    def encode(self, text: str) -> list[int]:
        """Encode text; ``<bos>`` and ``<stop>`` are read as single tokens."""
        ids: list[int] = []
        i = 0
        while i < len(text):
            if text[i] == "<":
                end = text.find(">", i)
                if end == -1:
                    raise KeyError(f"unterminated special token in {text!r}")
                ids.append(self.id(text[i:end + 1]))
                i = end + 1
            else:
                ids.append(self.id(text[i]))
                i += 1
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        return "".join(self.symbols[int(i)] for i in ids)


VOCAB = Vocabulary()
STOP_ID = VOCAB.stop_id
