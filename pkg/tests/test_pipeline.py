import json

import pytest

from mtprobe.errors import ConfigError, EmptyCorpus, StageFailure
from mtprobe.pipeline import (
    RunConfig,
    TestPair,
    candidate_id_for,
    find_candidates,
    find_valid,
    generate_enumerations,
    run,
)
from mtprobe.runio import load_corpus_aligned, load_corpus_tsv, load_run, save_run
from mtprobe.text_units import UnitKind
from mtprobe.translator import MockDictionaryBackend, TranslationCache

from corpora import identity_corpus, mixed_corpus, planted_pathology_corpus
from oracles import naive_candidate_run


@pytest.fixture
def cache(tmp_path):
    with TranslationCache(tmp_path / "cache.bin") as cache:
        yield cache


identity_backend = MockDictionaryBackend()


class TestRunConfig:
    def test_threshold_ordering_enforced(self):
        with pytest.raises(ConfigError):
            RunConfig(valid_threshold=0.1, candidate_threshold=0.5)
        with pytest.raises(ConfigError):
            RunConfig(valid_threshold=1.2)
        with pytest.raises(ConfigError):
            RunConfig(valid_threshold=0.5, candidate_threshold=0.5)

    def test_round_trips_through_dict(self):
        config = RunConfig(
            unit=UnitKind.WORD,
            valid_threshold=0.6,
            candidate_threshold=0.2,
            seed=7,
            label="demo",
        )
        assert RunConfig.from_dict(config.to_dict()) == config


class TestFindValid:
    def test_identity_corpus_is_fully_valid(self, cache):
        corpus = identity_corpus(10)
        valid = find_valid(corpus, identity_backend, cache, RunConfig())
        assert len(valid) == 10
        assert all(v.bleu.value == 1.0 for v in valid)
        assert [v.pair.pair_id for v in valid] == [p.pair_id for p in corpus]

    def test_boundary_is_inclusive(self, cache):
        corpus = [TestPair("perfect", "a b c d", "a b c d")]
        config = RunConfig(valid_threshold=1.0, candidate_threshold=0.0)
        assert len(find_valid(corpus, identity_backend, cache, config)) == 1

    def test_filters_low_scores(self, cache):
        corpus = [
            TestPair("good", "a b c d", "a b c d"),
            TestPair("bad", "a b c d", "w x y z"),
        ]
        valid = find_valid(corpus, identity_backend, cache, RunConfig())
        assert [v.pair.pair_id for v in valid] == ["good"]

    def test_empty_corpus_rejected(self, cache):
        with pytest.raises(EmptyCorpus):
            find_valid([], identity_backend, cache, RunConfig())


class TestGenerateEnumerations:
    def test_one_record_per_unit(self, cache):
        source = "x" * 40
        corpus = [TestPair("forty", source, source)]
        valid = find_valid(corpus, identity_backend, cache, RunConfig())
        groups = generate_enumerations(valid, RunConfig())
        assert len(groups) == 1
        assert len(groups[0].deletions) == 40

    def test_unsegmentable_names_the_pair(self, cache):
        corpus = [TestPair("zh-001", "职业健康", "职业健康")]
        config = RunConfig(unit=UnitKind.WORD)
        valid = find_valid(corpus, identity_backend, cache, config)
        with pytest.raises(Exception) as err:
            generate_enumerations(valid, config)
        assert "zh-001" in str(err.value)

    def test_word_mode_with_lexicon_file(self, cache, tmp_path):
        lexicon = tmp_path / "words.txt"
        lexicon.write_text("职业\n健康\n", encoding="utf-8")
        corpus = [TestPair("zh-001", "职业健康", "职业健康")]
        config = RunConfig(unit=UnitKind.WORD, lexicon_path=str(lexicon))
        valid = find_valid(corpus, identity_backend, cache, config)
        groups = generate_enumerations(valid, config)
        assert [d.deleted_surface for d in groups[0].deletions] == ["职业", "健康"]
        assert [d.perturbed_text for d in groups[0].deletions] == ["健康", "职业"]

    def test_word_mode_with_external_segmenter(self, cache):
        import sys

        split_pairs = (
            "import sys\n"
            "for line in sys.stdin:\n"
            "    text = line.rstrip('\\n')\n"
            "    print(' '.join(text[i:i+2] for i in range(0, len(text), 2)))\n"
        )
        corpus = [TestPair("zh-002", "职业健康风险", "职业健康风险")]
        config = RunConfig(
            unit=UnitKind.WORD, segmenter_cmd=(sys.executable, "-c", split_pairs)
        )
        valid = find_valid(corpus, identity_backend, cache, config)
        groups = generate_enumerations(valid, config)
        assert [d.deleted_surface for d in groups[0].deletions] == ["职业", "健康", "风险"]


class TestFindCandidates:
    def test_identity_backend_yields_no_candidates(self, cache):
        source = "a b c d e f g h i j"
        corpus = [TestPair("ten", source, source)]
        config = RunConfig()
        valid = find_valid(corpus, identity_backend, cache, config)
        groups = generate_enumerations(valid, config)
        assert find_candidates(groups, identity_backend, cache, config) == []

    def test_planted_rules_flag_exact_positions(self, cache):
        pairs, backend, planted = planted_pathology_corpus()
        config = RunConfig()
        valid = find_valid(pairs, backend, cache, config)
        groups = generate_enumerations(valid, config)
        candidates = find_candidates(groups, backend, cache, config)
        got = {(c.enumeration.deletion.pair_id, c.enumeration.deletion.position) for c in candidates}
        expected = {(pid, pos) for pid, positions in planted.items() for pos in positions}
        assert got == expected

    def test_candidate_ids_are_stable_hashes(self):
        assert candidate_id_for("p", UnitKind.CHARACTER, 3) == candidate_id_for(
            "p", UnitKind.CHARACTER, 3
        )
        assert candidate_id_for("p", UnitKind.CHARACTER, 3) != candidate_id_for(
            "p", UnitKind.WORD, 3
        )


class TestRun:
    def test_identity_run_is_candidate_free(self):
        corpus = identity_corpus(5)
        result = run(corpus, RunConfig(), backend=identity_backend)
        assert result.candidates == []
        assert result.counts["valid"] == 5
        assert result.counts["enumerations"] == sum(len(p.source_text) for p in corpus)

    def test_counts_are_conserved(self, cache):
        pairs, backend, _ = planted_pathology_corpus()
        result = run(pairs, RunConfig(), backend=backend, cache=cache)
        assert result.counts["candidates"] <= result.counts["enumerations"]
        flagged = {
            (c.enumeration.deletion.pair_id, c.enumeration.deletion.position)
            for c in result.candidates
        }
        everything = {
            (e.deletion.pair_id, e.deletion.position) for e in result.enumerations
        }
        non_candidates = {
            (e.deletion.pair_id, e.deletion.position)
            for e in result.enumerations
            if e.bleu.value > 0.1
        }
        assert flagged | non_candidates == everything
        assert flagged & non_candidates == set()

    def test_duplicate_pair_ids_rejected(self):
        corpus = [TestPair("same", "a b", "a b"), TestPair("same", "c d", "c d")]
        with pytest.raises(StageFailure):
            run(corpus, RunConfig(), backend=identity_backend)

    def test_stage_failure_names_stage_and_error(self):
        corpus = [TestPair("zh-77", "职业健康", "职业健康")]
        with pytest.raises(StageFailure) as err:
            run(corpus, RunConfig(unit=UnitKind.WORD), backend=identity_backend)
        message = str(err.value)
        assert "generate_enumerations" in message
        assert "UnsegmentableInput" in message
        assert "zh-77" in message

    def test_missing_backend_spec_rejected(self):
        with pytest.raises(ConfigError):
            run(identity_corpus(1), RunConfig())


class TestOracleEquivalence:
    @pytest.mark.parametrize("unit", [UnitKind.CHARACTER, UnitKind.WORD])
    @pytest.mark.parametrize("thresholds", [(0.5, 0.1), (0.6, 0.2)])
    def test_matches_naive_triple_loop(self, tmp_path, unit, thresholds):
        valid_threshold, candidate_threshold = thresholds
        pairs, backend = mixed_corpus(seed=101, count=50)
        config = RunConfig(
            unit=unit,
            valid_threshold=valid_threshold,
            candidate_threshold=candidate_threshold,
        )
        with TranslationCache(tmp_path / f"{unit.value}.bin") as cache:
            result = run(pairs, config, backend=backend, cache=cache)
        got_valid = [v.pair.pair_id for v in result.valid]
        got_candidates = {
            (c.enumeration.deletion.pair_id, c.enumeration.deletion.position)
            for c in result.candidates
        }
        oracle_valid, oracle_candidates = naive_candidate_run(
            pairs, backend, unit, valid_threshold, candidate_threshold
        )
        assert got_valid == oracle_valid
        assert got_candidates == oracle_candidates

    def test_threshold_monotonicity(self, tmp_path):
        pairs, backend = mixed_corpus(seed=33, count=30)
        with TranslationCache(tmp_path / "cache.bin") as cache:
            def candidate_set(valid_threshold, candidate_threshold):
                result = run(
                    pairs,
                    RunConfig(
                        valid_threshold=valid_threshold,
                        candidate_threshold=candidate_threshold,
                    ),
                    backend=backend,
                    cache=cache,
                )
                return (
                    {v.pair.pair_id for v in result.valid},
                    {
                        (c.enumeration.deletion.pair_id, c.enumeration.deletion.position)
                        for c in result.candidates
                    },
                )

            valid_low, candidates_narrow = candidate_set(0.5, 0.1)
            valid_high, candidates_wide = candidate_set(0.6, 0.2)
            assert valid_high <= valid_low
            narrow_within_high = {
                c for c in candidates_narrow if c[0] in valid_high
            }
            assert narrow_within_high <= candidates_wide


class TestRunSerialization:
    def test_save_and_load_round_trip(self, tmp_path):
        pairs, backend, _ = planted_pathology_corpus()
        result = run(pairs, RunConfig(label="demo"), backend=backend)
        out = save_run(result, tmp_path / "r1")
        for name in ("config.json", "valid.jsonl", "enumerations.jsonl", "candidates.jsonl"):
            assert (out / name).exists()
        loaded = load_run(out)
        assert loaded.counts == result.counts
        assert loaded.backend_fingerprint == result.backend_fingerprint
        assert loaded.config == result.config
        assert [c.candidate_id for c in loaded.candidates] == [
            c.candidate_id for c in result.candidates
        ]
        record = json.loads((out / "candidates.jsonl").read_text().splitlines()[0])
        for key in (
            "pair_id",
            "unit",
            "position",
            "deleted_surface",
            "perturbed_text",
            "translation",
            "bleu",
            "precisions",
            "brevity_penalty",
            "delta",
            "candidate_id",
        ):
            assert key in record

    def test_byte_identical_across_runs(self, tmp_path):
        pairs, backend, _ = planted_pathology_corpus()
        outputs = []
        for name in ("first", "second"):
            result = run(pairs, RunConfig(), backend=backend)
            outputs.append(save_run(result, tmp_path / name))
        first, second = outputs
        for name in ("valid.jsonl", "enumerations.jsonl", "candidates.jsonl"):
            assert (first / name).read_bytes() == (second / name).read_bytes()
        headers = []
        for out in outputs:
            header = json.loads((out / "config.json").read_text())
            header.pop("created_at")
            headers.append(header)
        assert headers[0] == headers[1]


class TestCorpusLoading:
    def test_tsv_two_columns(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text("hola\thello\nadios\tgoodbye\n", encoding="utf-8")
        pairs = load_corpus_tsv(path)
        assert [p.pair_id for p in pairs] == ["000001", "000002"]
        assert pairs[1].reference_text == "goodbye"

    def test_tsv_three_columns_with_ids(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text("x1\thola\thello\n", encoding="utf-8")
        assert load_corpus_tsv(path)[0].pair_id == "x1"

    def test_tsv_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text("x1\ta\tb\nx1\tc\td\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_corpus_tsv(path)

    def test_aligned_files(self, tmp_path):
        (tmp_path / "src.txt").write_text("uno\ndos\n", encoding="utf-8")
        (tmp_path / "ref.txt").write_text("one\ntwo\n", encoding="utf-8")
        pairs = load_corpus_aligned(tmp_path / "src.txt", tmp_path / "ref.txt")
        assert [(p.source_text, p.reference_text) for p in pairs] == [
            ("uno", "one"),
            ("dos", "two"),
        ]

    def test_aligned_length_mismatch(self, tmp_path):
        (tmp_path / "src.txt").write_text("uno\ndos\n", encoding="utf-8")
        (tmp_path / "ref.txt").write_text("one\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_corpus_aligned(tmp_path / "src.txt", tmp_path / "ref.txt")
