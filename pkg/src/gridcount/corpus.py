"""Bags of words and corpora: the sparse count data the model consumes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = ["Bag", "Corpus", "bags_to_matrix", "matrix_to_bags"]


@dataclass
class Bag:
    """One document as sparse non-negative word counts.

    ``entries`` maps word id to count. ``target`` optionally carries a
    discrete label (int) or a continuous value (float).
    """

    entries: dict[int, float] = field(default_factory=dict)
    id: str = ""
    target: int | float | None = None

    def __post_init__(self):
        for word, count in self.entries.items():
            if word < 0:
                raise ValueError(f"negative word id {word} in bag {self.id!r}")
            if count < 0:
                raise ValueError(f"negative count for word {word} in bag {self.id!r}")

    @property
    def total(self) -> float:
        return float(sum(self.entries.values()))

    def is_empty(self) -> bool:
        return not any(c > 0 for c in self.entries.values())


@dataclass
class Corpus:
    """A list of bags over a shared vocabulary of size ``vocab_size``."""

    bags: list[Bag]
    vocab_size: int
    vocab: list[str] | None = None

    def __post_init__(self):
        if self.vocab is not None and len(self.vocab) != self.vocab_size:
            raise ValueError(
                f"vocab has {len(self.vocab)} words, expected {self.vocab_size}"
            )
        for t, bag in enumerate(self.bags):
            for word in bag.entries:
                if word >= self.vocab_size:
                    raise ValueError(
                        f"bag {t} has word id {word} >= vocabulary size {self.vocab_size}"
                    )

    def __len__(self) -> int:
        return len(self.bags)

    def counts(self) -> sp.csr_matrix:
        return bags_to_matrix(self.bags, self.vocab_size)


def bags_to_matrix(bags: list[Bag], vocab_size: int) -> sp.csr_matrix:
    """Stack bags into a (n_bags, vocab_size) CSR count matrix."""
    rows, cols, data = [], [], []
    for t, bag in enumerate(bags):
        for word, count in bag.entries.items():
            if word >= vocab_size:
                raise ValueError(
                    f"bag {t} has word id {word} >= vocabulary size {vocab_size}"
                )
            if count != 0:
                rows.append(t)
                cols.append(word)
                data.append(float(count))
    mat = sp.csr_matrix(
        (data, (rows, cols)), shape=(len(bags), vocab_size), dtype=np.float64
    )
    mat.sum_duplicates()
    return mat


def matrix_to_bags(matrix) -> list[Bag]:
    """Rows of a count matrix as bags; densifies nothing."""
    csr = sp.csr_matrix(matrix)
    bags = []
    for t in range(csr.shape[0]):
        row = csr.getrow(t)
        entries = {int(z): float(c) for z, c in zip(row.indices, row.data) if c != 0}
        bags.append(Bag(entries=entries, id=str(t)))
    return bags
