"""The growing sorted hypothesis and its insertion slots.

A canvas of n tokens has n+1 slots: the gaps before the first token, between
adjacent tokens, and after the last. Inserting a content token into slot g
places it between the neighbors of that gap and splits the gap into two fresh
slots; inserting the end-of-slot id marks the gap finished instead. Finished
flags are only raised during parallel decoding.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class SlotError(Exception):
    pass


@dataclass(frozen=True)
class Canvas:
    tokens: tuple[int, ...] = ()
    finished: tuple[bool, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.finished is None:
            object.__setattr__(self, "finished", (False,) * (len(self.tokens) + 1))
        if len(self.finished) != len(self.tokens) + 1:
            raise ValueError("canvas needs exactly one slot per gap")

    @property
    def n_slots(self) -> int:
        return len(self.tokens) + 1

    def all_finished(self) -> bool:
        return all(self.finished)

    def unfinished_slots(self) -> list[int]:
        return [i for i, done in enumerate(self.finished) if not done]


def canvas_insert(canvas: Canvas, slot: int, token: int, eos_id: int | None = None) -> Canvas:
    """Insert ``token`` into ``slot``; the end-of-slot id finishes the slot."""
    if not 0 <= slot <= len(canvas.tokens):
        raise SlotError(f"slot {slot} out of range for {len(canvas.tokens)} tokens")
    if canvas.finished[slot]:
        raise SlotError(f"slot {slot} is already finished")
    if eos_id is not None and token == eos_id:
        flags = list(canvas.finished)
        flags[slot] = True
        return Canvas(canvas.tokens, tuple(flags))
    tokens = canvas.tokens[:slot] + (token,) + canvas.tokens[slot:]
    flags = canvas.finished[:slot] + (False, False) + canvas.finished[slot + 1 :]
    return Canvas(tokens, flags)


def replay(steps, eos_id: int | None = None) -> Canvas:
    """Rebuild a canvas by applying (slot, token) steps to an empty canvas."""
    canvas = Canvas()
    for slot, token in steps:
        canvas = canvas_insert(canvas, slot, token, eos_id)
    return canvas
