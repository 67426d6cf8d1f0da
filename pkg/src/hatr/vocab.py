"""Character vocabulary: 94 recognition classes plus special tokens.

The 94 classes are the printable non-space ASCII characters (codes 33..126):
10 digits, 52 case-sensitive letters and 32 punctuation characters. Special
tokens live outside the class range: EOS is the only special the decoder may
emit (output class 94), PAD marks ignored positions in padded batches, BOS
is input-only.
"""

from __future__ import annotations

CHARS = "".join(chr(c) for c in range(33, 127))

EOS = 94
PAD = 95
BOS = 96

NUM_CLASSES = 95  # 94 characters + EOS
EMBED_ROWS = 97  # characters + EOS + PAD + BOS can all appear as decoder inputs


class CharVocab:
    """Bijective char/index maps over the 94 classes, plus special ids."""

    def __init__(self):
        self.chars = CHARS
        self._index = {ch: i for i, ch in enumerate(CHARS)}
        self.eos = EOS
        self.pad = PAD
        self.bos = BOS
        self.num_classes = NUM_CLASSES

    def __len__(self) -> int:
        return len(self.chars)

    def __contains__(self, ch: str) -> bool:
        return ch in self._index

    def encode(self, text: str) -> list[int]:
        try:
            return [self._index[ch] for ch in text]
        except KeyError as e:
            raise ValueError(f"character {e.args[0]!r} is not in the vocabulary") from None

    def decode(self, ids: list[int]) -> str:
        """Render class ids back to text. EOS terminates; PAD/BOS are skipped."""
        out = []
        for i in ids:
            if i == self.eos:
                break
            if i in (self.pad, self.bos):
                continue
            if not 0 <= i < len(self.chars):
                raise ValueError(f"class id {i} out of range")
            out.append(self.chars[i])
        return "".join(out)


VOCAB = CharVocab()
