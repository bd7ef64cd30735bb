import json

import numpy as np
import pytest

from mmood.corpus import (
    MODALITIES,
    OOD_LABEL,
    OOD_SENTINEL,
    Corpus,
    CorpusMeta,
    ModalitySynth,
    SynthConfig,
    UtteranceRecord,
    load_corpus,
    make_batches,
    save_corpus,
    synth_corpus,
)
from mmood.errors import FormatError, ParameterError
from mmood.numerics import make_rng


def tiny_cfg(**kw):
    base = dict(
        num_classes=3, n_train=12, n_valid=6, n_test_id=6, n_test_ood=4,
        ood_clusters=2,
        modalities={
            "T": ModalitySynth(seq_len=3, dim=4),
            "V": ModalitySynth(seq_len=4, dim=6),
            "A": ModalitySynth(seq_len=2, dim=2),
        },
    )
    base.update(kw)
    return SynthConfig(**base)


class TestSynth:
    def test_counts_and_splits(self):
        corpus = synth_corpus(tiny_cfg(), make_rng(0))
        assert len(corpus.split("train")) == 12
        assert len(corpus.split("valid")) == 6
        assert len(corpus.split("test")) == 10
        ood = [r for r in corpus.split("test") if r.is_ood]
        assert len(ood) == 4
        # OOD only in test
        for r in corpus.split("train") + corpus.split("valid"):
            assert not r.is_ood

    def test_class_frequencies_deterministic(self):
        corpus = synth_corpus(tiny_cfg(), make_rng(1))
        labels = [r.label for r in corpus.split("train")]
        assert sorted(labels) == sorted([0, 1, 2] * 4)

    def test_zero_sigma_collapses_to_means(self):
        cfg = tiny_cfg(modalities={
            "T": ModalitySynth(3, 4, sigma=0.0),
            "V": ModalitySynth(4, 6, sigma=0.0),
            "A": ModalitySynth(2, 2, sigma=0.0),
        })
        corpus = synth_corpus(cfg, make_rng(2))
        by_class = {}
        for r in corpus.split("train"):
            for m in MODALITIES:
                seq = r.seqs[m]
                assert np.allclose(seq, seq[0])  # every timestep identical
                key = (r.label, m)
                if key in by_class:
                    assert np.array_equal(by_class[key], seq[0])
                else:
                    by_class[key] = seq[0]

    def test_reproducible_across_runs(self):
        a = synth_corpus(tiny_cfg(), make_rng(7))
        b = synth_corpus(tiny_cfg(), make_rng(7))
        for ra, rb in zip(a.records, b.records):
            assert ra.id == rb.id and ra.label == rb.label
            for m in MODALITIES:
                assert np.array_equal(ra.seqs[m], rb.seqs[m])

    def test_invalid_k(self):
        with pytest.raises(ParameterError):
            synth_corpus(tiny_cfg(num_classes=1), make_rng(0))


class TestRoundTrip:
    def test_bit_exact(self, tmp_path):
        corpus = synth_corpus(tiny_cfg(), make_rng(3))
        manifest = save_corpus(corpus, tmp_path / "c")
        loaded = load_corpus(manifest)
        assert loaded.meta.num_classes == corpus.meta.num_classes
        assert loaded.meta.shapes == corpus.meta.shapes
        assert len(loaded.records) == len(corpus.records)
        for ra, rb in zip(corpus.records, loaded.records):
            assert (ra.id, ra.split, ra.label) == (rb.id, rb.split, rb.label)
            for m in MODALITIES:
                assert np.array_equal(ra.seqs[m], rb.seqs[m])

    def test_save_is_deterministic(self, tmp_path):
        corpus = synth_corpus(tiny_cfg(), make_rng(4))
        save_corpus(corpus, tmp_path / "a")
        save_corpus(corpus, tmp_path / "b")
        for name in ["manifest.jsonl"] + [f"seq_{m}.blob" for m in MODALITIES]:
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_empty_train_corpus_valid(self, tmp_path):
        cfg = tiny_cfg(n_train=0, n_valid=0, n_test_id=6, n_test_ood=2)
        corpus = synth_corpus(cfg, make_rng(5))
        loaded = load_corpus(save_corpus(corpus, tmp_path / "t"))
        assert loaded.split("train") == []
        assert len(loaded.split("test")) == 8

    def test_mixed_lengths_rejected(self, tmp_path):
        corpus = synth_corpus(tiny_cfg(), make_rng(6))
        corpus.records[0].seqs["T"] = corpus.records[0].seqs["T"][:-1]
        with pytest.raises(FormatError, match=corpus.records[0].id):
            save_corpus(corpus, tmp_path / "bad")


class TestLoadErrors:
    def _saved(self, tmp_path):
        corpus = synth_corpus(tiny_cfg(), make_rng(8))
        return save_corpus(corpus, tmp_path / "c"), corpus

    def test_missing_blob(self, tmp_path):
        manifest, _ = self._saved(tmp_path)
        (manifest.parent / "seq_V.blob").unlink()
        with pytest.raises(FormatError, match="seq_V"):
            load_corpus(manifest)

    def test_declared_dim_wider_than_blob(self, tmp_path):
        manifest, _ = self._saved(tmp_path)
        lines = manifest.read_text().splitlines()
        header = json.loads(lines[0])
        header["modalities"]["T"]["dim"] += 1
        lines[0] = json.dumps(header, sort_keys=True)
        manifest.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError):
            load_corpus(manifest)

    def test_ood_in_train_rejected(self, tmp_path):
        manifest, _ = self._saved(tmp_path)
        lines = manifest.read_text().splitlines()
        entry = json.loads(lines[1])
        assert entry["split"] == "train"
        entry["label"] = OOD_SENTINEL
        lines[1] = json.dumps(entry, sort_keys=True)
        manifest.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match=entry["id"]):
            load_corpus(manifest)

    def test_unknown_split_rejected(self, tmp_path):
        manifest, _ = self._saved(tmp_path)
        lines = manifest.read_text().splitlines()
        entry = json.loads(lines[1])
        entry["split"] = "dev"
        lines[1] = json.dumps(entry, sort_keys=True)
        manifest.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match="dev"):
            load_corpus(manifest)


class TestBatches:
    def _records(self, n):
        corpus = synth_corpus(tiny_cfg(n_train=n, n_valid=0, n_test_id=2,
                                       n_test_ood=0), make_rng(9))
        return corpus.split("train")

    def test_chunking_drops_tail(self):
        chunks = make_batches(self._records(10), 4, make_rng(0))
        assert len(chunks) == 5  # 10 records in half-batches of 2
        assert all(len(c) == 2 for c in chunks)

    def test_epoch_is_permutation(self):
        records = self._records(12)
        chunks = make_batches(records, 6, make_rng(1))
        seen = [r.id for c in chunks for r in c]
        assert len(seen) == len(set(seen))
        assert len(records) - len(seen) <= 3  # dropped tail < half batch

    def test_same_seed_same_order(self):
        records = self._records(9)
        a = make_batches(records, 4, make_rng(2))
        b = make_batches(records, 4, make_rng(2))
        assert [[r.id for r in c] for c in a] == [[r.id for r in c] for c in b]

    def test_odd_batch_rejected(self):
        with pytest.raises(ParameterError):
            make_batches(self._records(10), 5, make_rng(0))

    def test_batch_too_large(self):
        with pytest.raises(ParameterError):
            make_batches(self._records(3), 8, make_rng(0))


class TestMetaValidation:
    def test_num_classes_floor(self):
        with pytest.raises(ParameterError):
            CorpusMeta(num_classes=1,
                       shapes={m: (2, 2) for m in MODALITIES})

    def test_record_label_range(self, tmp_path):
        meta = CorpusMeta(num_classes=2, shapes={m: (2, 2) for m in MODALITIES})
        rec = UtteranceRecord(
            id="r0", split="train", label=5,
            seqs={m: np.zeros((2, 2)) for m in MODALITIES},
        )
        with pytest.raises(FormatError, match="r0"):
            save_corpus(Corpus(meta=meta, records=[rec]), tmp_path / "x")

    def test_ood_label_constant(self):
        assert OOD_LABEL == -1
