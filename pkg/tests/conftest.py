from __future__ import annotations

import pytest

from provshift.corpus import Corpus, Record


def make_cell_corpus(per_cell: int, text: str = "placeholder") -> Corpus:
    """Corpus with `per_cell` records in every (y, z) cell."""
    records = []
    i = 0
    for y in (0, 1):
        for z in (0, 1):
            for _ in range(per_cell):
                records.append(Record(id=f"r{i:06d}", y=y, z=z, text=text))
                i += 1
    return Corpus(records=tuple(records), source_names=("src0", "src1"))


@pytest.fixture
def cell_corpus():
    return make_cell_corpus(60)
