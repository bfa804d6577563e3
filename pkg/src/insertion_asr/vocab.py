"""Token vocabulary with reserved ids and head/CTC column layouts.

Content tokens occupy the dense ids 0..n_content-1; the reserved ids (pad,
end-of-slot, blank) follow. The word-prediction heads score content tokens
plus end-of-slot; the CTC head scores content tokens plus blank. Both heads
keep content ids as their leading columns, so only the final column needs
mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Vocabulary:
    n_content: int
    symbols: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.n_content < 1:
            raise ValueError("vocabulary needs at least one content token")
        if not self.symbols:
            object.__setattr__(self, "symbols", tuple(f"t{i}" for i in range(self.n_content)))
        if len(self.symbols) != self.n_content:
            raise ValueError("one symbol per content token required")

    @property
    def pad_id(self) -> int:
        return self.n_content

    @property
    def eos_id(self) -> int:
        """End-of-slot (also the sequence terminator for left-to-right models)."""
        return self.n_content + 1

    @property
    def blank_id(self) -> int:
        return self.n_content + 2

    @property
    def total_size(self) -> int:
        return self.n_content + 3

    def is_content(self, token: int) -> bool:
        return 0 <= token < self.n_content

    # -- head layouts ---------------------------------------------------------

    @property
    def word_dim(self) -> int:
        """Columns of the word heads: content tokens then end-of-slot."""
        return self.n_content + 1

    @property
    def eos_col(self) -> int:
        return self.n_content

    @property
    def ctc_dim(self) -> int:
        """Columns of the CTC head: content tokens then blank."""
        return self.n_content + 1

    @property
    def blank_col(self) -> int:
        return self.n_content

    def validate_sequence(self, tokens) -> None:
        for t in tokens:
            if not self.is_content(t):
                raise ValueError(f"reserved or out-of-range token id {t} in content sequence")
