"""Synthetic two-source corpus with a closed-form scoring oracle.

The generative model is deliberately minimal: one signal token whose
emission probability depends on the label, one nuisance token whose
emission depends on the source only, and uniform filler. Confounding by
provenance arises exactly when the per-source positive rates differ,
because the nuisance token then correlates with the label through the
source; the exact posterior stays closed-form, giving a scoring oracle
no classifier can beat on this data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Record, tokenize

__all__ = ["SynthConfig", "generate_corpus", "oracle_score", "SIGNAL_TOKEN", "NUISANCE_TOKEN"]

SIGNAL_TOKEN = "sigword"
NUISANCE_TOKEN = "nuisword"


def _filler_token(index: int) -> str:
    return f"filler{index:04d}"


@dataclass(frozen=True)
class SynthConfig:
    """Generator parameters.

    ``base_rate`` is the per-source positive rate; the defaults echo the
    positive rates and scale of a two-site clinical corpus with a strong
    source/label association. ``signal_emit`` is the signal-token
    probability given the label, ``nuisance_emit`` the nuisance-token
    probability given the source. ``doc_len`` filler tokens are drawn
    uniformly from a vocabulary of ``filler_vocab`` terms.
    """

    n_per_source: tuple[int, int] = (2500, 2000)
    base_rate: tuple[float, float] = (0.411, 0.198)
    signal_emit: tuple[float, float] = (0.3, 0.7)
    nuisance_emit: tuple[float, float] = (0.1, 0.7)
    filler_vocab: int = 30
    doc_len: int = 8
    seed: int = 0
    source_names: tuple[str, str] = ("site_a", "site_b")

    def __post_init__(self) -> None:
        if len(self.n_per_source) != 2 or any(n < 1 for n in self.n_per_source):
            raise ValueError("n_per_source must be a pair of positive integers")
        for name in ("base_rate", "signal_emit", "nuisance_emit"):
            pair = getattr(self, name)
            if len(pair) != 2 or any(not 0.0 <= p <= 1.0 for p in pair):
                raise ValueError(f"{name} must be a pair of probabilities")
        if self.filler_vocab < 1:
            raise ValueError("filler_vocab must be a positive integer")
        if self.doc_len < 1:
            raise ValueError("doc_len must be a positive integer")


def generate_corpus(cfg: SynthConfig) -> Corpus:
    """Draw a corpus from the generative model; deterministic under seed."""
    records = []
    for z in (0, 1):
        n = cfg.n_per_source[z]
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((cfg.seed, z))))
        ys = (rng.random(n) < cfg.base_rate[z]).astype(np.int64)
        sig_draw = rng.random(n)
        nuis_draw = rng.random(n)
        fillers = rng.integers(0, cfg.filler_vocab, size=(n, cfg.doc_len))
        for i in range(n):
            y = int(ys[i])
            tokens = []
            if sig_draw[i] < cfg.signal_emit[y]:
                tokens.append(SIGNAL_TOKEN)
            if nuis_draw[i] < cfg.nuisance_emit[z]:
                tokens.append(NUISANCE_TOKEN)
            tokens.extend(_filler_token(int(j)) for j in fillers[i])
            records.append(
                Record(id=f"s{z}-{i:06d}", y=y, z=z, text=" ".join(tokens))
            )
    return Corpus(records=tuple(records), source_names=cfg.source_names)


def oracle_score(record: Record, cfg: SynthConfig) -> float:
    """Exact posterior P(y=1 | tokens, z) under the generative model.

    Only the signal token carries label information; nuisance and filler
    likelihoods cancel. Raises if the record's tokens are impossible
    under the configuration.
    """
    if record.text is None:
        raise ValueError(f"record {record.id!r} has no text")
    tokens = set(tokenize(record.text))
    known = {SIGNAL_TOKEN, NUISANCE_TOKEN} | {
        _filler_token(i) for i in range(cfg.filler_vocab)
    }
    unknown = tokens - known
    if unknown:
        raise ValueError(
            f"record {record.id!r} contains tokens impossible under this config: "
            f"{', '.join(sorted(unknown))}"
        )
    nuis_present = NUISANCE_TOKEN in tokens
    r_z = cfg.nuisance_emit[record.z]
    if (nuis_present and r_z == 0.0) or (not nuis_present and r_z == 1.0):
        raise ValueError(
            f"record {record.id!r}: nuisance-token state has probability zero under config"
        )

    sig_present = SIGNAL_TOKEN in tokens
    q0, q1 = cfg.signal_emit
    like0 = q0 if sig_present else 1.0 - q0
    like1 = q1 if sig_present else 1.0 - q1
    prior = cfg.base_rate[record.z]
    denom = prior * like1 + (1.0 - prior) * like0
    if denom == 0.0:
        raise ValueError(
            f"record {record.id!r}: signal-token state has probability zero under config"
        )
    return prior * like1 / denom
