from __future__ import annotations

import math

import numpy as np
import pytest

from provshift.corpus import Record, build_vocabulary, unigram_matrix
from provshift.metrics import auprc
from provshift.model import LRConfig, fit_lr
from provshift.synth import (
    NUISANCE_TOKEN,
    SIGNAL_TOKEN,
    SynthConfig,
    generate_corpus,
    oracle_score,
)


def small_cfg(**overrides):
    base = dict(n_per_source=(400, 300), seed=1)
    base.update(overrides)
    return SynthConfig(**base)


class TestGenerate:
    def test_deterministic(self):
        a = generate_corpus(small_cfg())
        b = generate_corpus(small_cfg())
        assert [(r.id, r.y, r.z, r.text) for r in a] == [(r.id, r.y, r.z, r.text) for r in b]

    def test_seed_changes_output(self):
        a = generate_corpus(small_cfg(seed=1))
        b = generate_corpus(small_cfg(seed=2))
        assert [r.text for r in a] != [r.text for r in b]

    def test_defaults_mirror_two_site_prevalences(self):
        cfg = SynthConfig()
        assert cfg.base_rate == (0.411, 0.198)
        assert cfg.n_per_source == (2500, 2000)

    def test_counts_per_source(self):
        corpus = generate_corpus(small_cfg())
        by_source = {0: 0, 1: 0}
        for rec in corpus:
            by_source[rec.z] += 1
        assert by_source == {0: 400, 1: 300}

    def test_base_rate_within_three_sigma(self):
        cfg = SynthConfig(n_per_source=(10000, 10000), seed=5)
        corpus = generate_corpus(cfg)
        for z in (0, 1):
            ys = [r.y for r in corpus if r.z == z]
            n = len(ys)
            p = cfg.base_rate[z]
            sigma = math.sqrt(p * (1 - p) / n)
            assert abs(np.mean(ys) - p) <= 3 * sigma

    def test_uninformative_signal_uncorrelated(self):
        cfg = SynthConfig(
            n_per_source=(5000, 5000), signal_emit=(0.4, 0.4), seed=9
        )
        corpus = generate_corpus(cfg)
        has_sig = np.array([SIGNAL_TOKEN in r.text.split() for r in corpus], dtype=float)
        ys = np.array([r.y for r in corpus], dtype=float)
        corr = np.corrcoef(has_sig, ys)[0, 1]
        assert abs(corr) <= 3.0 / math.sqrt(len(corpus))

    def test_nuisance_depends_on_source_only(self):
        cfg = SynthConfig(n_per_source=(8000, 8000), seed=4)
        corpus = generate_corpus(cfg)
        for z in (0, 1):
            rates = {}
            ns = {}
            for y in (0, 1):
                docs = [r for r in corpus if r.z == z and r.y == y]
                rates[y] = np.mean([NUISANCE_TOKEN in r.text.split() for r in docs])
                ns[y] = len(docs)
            r_z = cfg.nuisance_emit[z]
            sigma = math.sqrt(r_z * (1 - r_z) * (1 / ns[0] + 1 / ns[1]))
            assert abs(rates[1] - rates[0]) <= 3 * sigma

    def test_zero_filler_vocab_rejected(self):
        with pytest.raises(ValueError, match="filler_vocab"):
            SynthConfig(filler_vocab=0)


class TestOracle:
    def test_bayes_update_signal_present(self):
        cfg = SynthConfig(base_rate=(0.5, 0.5), signal_emit=(0.2, 0.8))
        rec = Record(id="x", y=1, z=0, text=f"{SIGNAL_TOKEN} filler0001")
        assert oracle_score(rec, cfg) == pytest.approx(0.8, abs=1e-12)

    def test_uninformative_signal_returns_prior(self):
        cfg = SynthConfig(signal_emit=(0.3, 0.3))
        for z in (0, 1):
            for text in (SIGNAL_TOKEN, "filler0000"):
                rec = Record(id="x", y=0, z=z, text=text)
                assert oracle_score(rec, cfg) == pytest.approx(cfg.base_rate[z], abs=1e-12)

    def test_vacuous_evidence_returns_prior(self):
        cfg = SynthConfig(signal_emit=(0.0, 0.0))
        rec = Record(id="x", y=0, z=1, text="filler0000")
        assert oracle_score(rec, cfg) == pytest.approx(cfg.base_rate[1], abs=1e-15)

    def test_impossible_token_rejected(self):
        cfg = SynthConfig()
        rec = Record(id="x", y=0, z=0, text="unheard word")
        with pytest.raises(ValueError, match="impossible"):
            oracle_score(rec, cfg)

    def test_impossible_signal_state_rejected(self):
        cfg = SynthConfig(signal_emit=(0.0, 0.0))
        rec = Record(id="x", y=0, z=0, text=SIGNAL_TOKEN)
        with pytest.raises(ValueError, match="probability zero"):
            oracle_score(rec, cfg)

    def test_oracle_beats_learned_classifier(self):
        # The exact posterior should outrank anything trained on the same
        # generative data, up to sampling noise.
        cfg = SynthConfig(n_per_source=(2500, 2500), seed=3)
        corpus = generate_corpus(cfg)
        records = list(corpus)
        train, test = records[::2], records[1::2]
        space = build_vocabulary(train, min_df=1)
        X_train, X_test = unigram_matrix(train, space), unigram_matrix(test, space)
        y_train = np.array([r.y for r in train])
        y_test = np.array([r.y for r in test])
        fitted = fit_lr(X_train, y_train, cfg=LRConfig())
        learned = auprc(fitted.predict_conditional(X_test, 0), y_test)
        oracle = auprc([oracle_score(r, cfg) for r in test], y_test)
        assert oracle >= learned - 0.02
