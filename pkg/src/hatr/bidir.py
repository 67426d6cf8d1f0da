"""Bidirectional decoding: two independent decoders over normal and
reversed character order, with highest-score selection at test time."""

from __future__ import annotations

from .vocab import EOS

DIRECTION_MODES = ("normal", "reversed", "bidirectional")


def validate_direction(mode: str) -> str:
    if mode not in DIRECTION_MODES:
        raise ValueError(f"unknown direction mode {mode!r} (choose from {DIRECTION_MODES})")
    return mode


def reverse_labels(tokens: list[int]) -> list[int]:
    """Reverse character order; a terminal EOS stays terminal."""
    if tokens and tokens[-1] == EOS:
        return list(reversed(tokens[:-1])) + [EOS]
    return list(reversed(tokens))


def select(
    result_normal: tuple[str, float], result_reversed: tuple[str, float]
) -> tuple[str, float, str]:
    """Pick the higher-scored of the two direction results; ties go to normal.

    The reversed result must already be un-reversed to reading order."""
    text_n, score_n = result_normal
    text_r, score_r = result_reversed
    if score_r > score_n:
        return text_r, score_r, "reversed"
    return text_n, score_n, "normal"
