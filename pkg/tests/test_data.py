import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from insertion_gnn import data
from insertion_gnn.errors import (
    ConfigError,
    DataError,
    DomainError,
    FormatError,
    IntegrityError,
    ParseError,
    TruncationError,
    ValidationError,
)
from insertion_gnn.rng import Rng


class TestSplitSentences:
    def test_basic_split(self):
        assert data.split_sentences("A cat sat. A dog ran.") == ["A cat sat.", "A dog ran."]

    def test_abbreviation_not_split(self):
        assert data.split_sentences("Dr. Smith arrived.") == ["Dr. Smith arrived."]
        assert data.split_sentences("See Fig. 2 for details. It helps.") \
            == ["See Fig. 2 for details.", "It helps."]

    def test_decimal_not_split(self):
        assert data.split_sentences("Pi is 3.14 exactly.") == ["Pi is 3.14 exactly."]

    def test_empty(self):
        assert data.split_sentences("") == []
        assert data.split_sentences("   ") == []

    def test_question_and_exclamation(self):
        got = data.split_sentences("Really? Yes! Good.")
        assert got == ["Really?", "Yes!", "Good."]

    def test_et_al(self):
        got = data.split_sentences("Shown by Smith et al. Recently confirmed.")
        assert got == ["Shown by Smith et al. Recently confirmed."]

    def test_quote_start(self):
        got = data.split_sentences('He left. "Stay," she said.')
        assert got == ["He left.", '"Stay," she said.']


class TestFilterAbstract:
    def test_too_few_sentences_rejected(self):
        text = " ".join(["word"] * 400) + ". Also this. And this. And that."
        assert not data.filter_abstract(text)

    def test_accept_case(self):
        sentences = ["This sentence has exactly these many words here now."] * 6
        text = " ".join(sentences)  # 6 sentences, 54 words
        assert data.filter_abstract(text, word_threshold=50)
        assert not data.filter_abstract(text, word_threshold=100)

    def test_empty_rejected(self):
        assert not data.filter_abstract("")


SENTS = [f"Sentence number {i} is here." for i in range(6)]


class TestSynthesize:
    def test_hand_enumerated_gap_example(self):
        # remove index 2 of 6; remaining r = [s0,s1,s3,s4,s5]; gaps {0,2,3,5}
        p = data.problem_from_choices(SENTS, removed=2, distractor_gaps=[0, 3, 5])
        assert p.label == 1  # true gap 2 ranks second among {0,2,3,5}
        assert p.question == SENTS[2]
        assert p.parts[0] == ""
        assert p.parts[1] == f"{SENTS[0]} {SENTS[1]}"
        assert p.parts[2] == SENTS[3]
        assert p.parts[3] == f"{SENTS[4]} {SENTS[5]}"
        assert p.parts[4] == ""

    def test_five_parts_and_roundtrip(self):
        rng = Rng(5)
        for i in range(300):
            n = 5 + rng.below(6)
            sents = [f"S{j} of problem {i}." for j in range(n)]
            p = data.synthesize_problem(sents, rng, problem_id=f"t{i}")
            assert len(p.parts) == 5
            assert data.reassemble(p) == " ".join(sents)

    def test_too_few_sentences(self):
        with pytest.raises(DomainError):
            data.synthesize_problem(SENTS[:4], Rng(1))

    def test_determinism_and_variation(self):
        a = data.synthesize_problem(SENTS, Rng(99))
        b = data.synthesize_problem(SENTS, Rng(99))
        assert a == b
        variants = {data.synthesize_problem(SENTS, Rng(s)).parts[1] for s in range(100)}
        assert len(variants) > 5

    def test_label_frequencies_near_uniform(self):
        rng = Rng(8)
        sents = [f"Sentence {i} speaks." for i in range(9)]
        counts = np.zeros(4)
        n = 4000
        for i in range(n):
            counts[data.synthesize_problem(sents, rng).label] += 1
        assert np.all(np.abs(counts / n - 0.25) <= 0.03)

    def test_choice_validation(self):
        with pytest.raises(DomainError):
            data.problem_from_choices(SENTS, removed=2, distractor_gaps=[0, 2, 3])
        with pytest.raises(DomainError):
            data.problem_from_choices(SENTS, removed=2, distractor_gaps=[0, 1])
        with pytest.raises(DomainError):
            data.problem_from_choices(SENTS, removed=9, distractor_gaps=[0, 1, 2])


def make_problems(k=10, seed=3):
    rng = Rng(seed)
    out = []
    for i in range(k):
        sents = [f"Sentence {j} of item {i} goes here." for j in range(5 + rng.below(4))]
        out.append(data.synthesize_problem(sents, rng, problem_id=f"p{i}"))
    return out


class TestProblemFile:
    def test_round_trip(self, tmp_path):
        problems = make_problems()
        path = tmp_path / "probs.jsonl"
        data.write_problems(path, problems)
        assert data.read_problems(path) == problems

    def test_malformed_line_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = make_problems(2)
        data.write_problems(path, good)
        with open(path, "a") as fh:
            fh.write('{"id": "x", "parts": [truncated\n')
        with pytest.raises(ParseError, match="line 3"):
            data.read_problems(path)

    def test_label_out_of_range(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        rec = '{"id": "a", "parts": ["", "x", "y", "z", ""], "question": "q", "label": 4}\n'
        path.write_text(rec)
        with pytest.raises(ValidationError, match="label"):
            data.read_problems(path)

    def test_duplicate_id(self, tmp_path):
        problems = make_problems(2)
        problems[1].id = problems[0].id
        with pytest.raises(IntegrityError):
            data.write_problems(tmp_path / "d.jsonl", problems)

    def test_read_duplicate_id(self, tmp_path):
        path = tmp_path / "d.jsonl"
        p = make_problems(1)[0]
        data.write_problems(path, [p])
        line = path.read_text()
        path.write_text(line + line)
        with pytest.raises(IntegrityError):
            data.read_problems(path)


def make_records(k=5, dim=7, seed=4):
    rng = Rng(seed)
    recs = []
    for i in range(k):
        parts = [rng.normals(1, dim)[0].astype(np.float32).astype(np.float64)
                 for _ in range(5)]
        if i == 0:
            parts[0] = np.zeros(dim)
        q = rng.normals(1, dim)[0].astype(np.float32).astype(np.float64)
        recs.append(data.EmbeddingRecord(id=f"p{i}", parts=parts, question=q))
    return recs


class TestEmbeddingFile:
    def test_bit_exact_round_trip(self, tmp_path):
        recs = make_records()
        path = tmp_path / "e.bin"
        data.write_embeddings(path, recs)
        back = data.read_embeddings(path)
        assert [r.id for r in back] == [r.id for r in recs]
        for a, b in zip(recs, back):
            for va, vb in zip(a.parts + [a.question], b.parts + [b.question]):
                assert np.array_equal(va, vb)

    def test_write_read_write_same_bytes(self, tmp_path):
        recs = make_records()
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        data.write_embeddings(p1, recs)
        data.write_embeddings(p2, data.read_embeddings(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_part_zero_vector(self, tmp_path):
        path = tmp_path / "e.bin"
        data.write_embeddings(path, make_records())
        back = data.read_embeddings(path)
        assert not back[0].parts[0].any()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "e.bin"
        data.write_embeddings(path, make_records())
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            data.read_embeddings(path)

    def test_truncation(self, tmp_path):
        path = tmp_path / "e.bin"
        data.write_embeddings(path, make_records())
        blob = path.read_bytes()
        path.write_bytes(blob[:-10])
        with pytest.raises(TruncationError):
            data.read_embeddings(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "e.bin"
        data.write_embeddings(path, make_records())
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(TruncationError):
            data.read_embeddings(path)

    def test_dim_mismatch_vs_config(self, tmp_path):
        path = tmp_path / "e.bin"
        data.write_embeddings(path, make_records(dim=7))
        with pytest.raises(ConfigError):
            data.read_embeddings(path, expected_dim=5)

    def test_float32_storage_widens(self, tmp_path):
        recs = make_records()
        recs[1].question[0] = 0.1  # not exactly representable in f32
        path = tmp_path / "e.bin"
        data.write_embeddings(path, recs)
        back = data.read_embeddings(path)
        assert back[1].question[0] == np.float64(np.float32(0.1))
        assert back[1].question.dtype == np.float64


class TestJoinAndSplit:
    def test_join_by_id(self):
        problems = make_problems(5)
        recs = make_records(5)
        embedded = data.join_embeddings(problems, recs)
        assert [e.label for e in embedded] == [p.label for p in problems]

    def test_join_missing_id_names_it(self):
        problems = make_problems(5)
        with pytest.raises(DataError, match="p4"):
            data.join_embeddings(problems, make_records(4))

    def test_split_halves(self):
        items = list(range(156))
        train, val = data.split_dataset(items, 0.5, Rng(11))
        assert len(train) == 78 and len(val) == 78
        assert sorted(train + val) == items

    def test_split_rounding(self):
        train, val = data.split_dataset(list(range(156)), 0.05, Rng(11))
        assert len(val) == 8  # round(7.8)

    def test_split_deterministic(self):
        items = list(range(50))
        a = data.split_dataset(items, 0.3, Rng(5))
        b = data.split_dataset(items, 0.3, Rng(5))
        assert a == b

    def test_split_ratio_domain(self):
        with pytest.raises(ConfigError):
            data.split_dataset([1, 2], 0.0, Rng(1))
        with pytest.raises(ConfigError):
            data.split_dataset([1, 2], 1.0, Rng(1))


class TestPlanted:
    def test_question_near_true_neighbors(self):
        probs = data.make_planted_problems(20, 16, Rng(13))
        for p in probs:
            mean = 0.5 * (p.part_embeddings[p.label] + p.part_embeddings[p.label + 1])
            gap = np.linalg.norm(p.question_embedding - mean)
            assert gap < 1.0  # noise std 0.1 over 16 dims -> norm ~ 0.4
            other = np.linalg.norm(p.question_embedding)
            assert gap < other


def test_synthesize_corpus_filters_and_ids():
    texts = [
        " ".join(f"Sentence {i} of paragraph one is a bit longer now." for i in range(6)),
        "Too short. Really. Just. Tiny. Words.",
    ]
    problems = data.synthesize_corpus(texts, Rng(3), per_paragraph=2, word_threshold=30)
    assert len(problems) == 2
    assert len({p.id for p in problems}) == 2
