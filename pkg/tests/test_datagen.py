import json

import pytest

from patternlm.codec import encode_length
from patternlm.datagen import (
    EDIT_RULES,
    FAMILIES,
    DesignParams,
    affected_panels,
    applicable_rules,
    apply_rule,
    build_pattern,
    caption,
    caption_phrases,
    emit_dataset,
    generate_sample,
    make_edit,
    sample_params,
    split_of,
)
from patternlm.pattern import pattern_to_dict, validate


def test_generation_is_deterministic():
    assert generate_sample(11, 5) == generate_sample(11, 5)
    assert generate_sample(11, 5) != generate_sample(11, 6)


def test_params_respect_activity(samples):
    for s in samples:
        s.params.check()


def test_every_family_appears(samples):
    assert {s.params.family for s in samples} == set(FAMILIES)


def test_caption_words_in_vocabulary(samples, vocab):
    for s in samples:
        assert all(w in vocab.index for w in s.caption)


def test_caption_is_a_shuffle_of_phrases(samples):
    s = samples[0]
    phrases = caption_phrases(s.params)
    assert sorted(s.caption) == sorted(" ".join(phrases).split())
    assert caption(s.params, s.seed) == s.caption


def test_caption_thresholds():
    p = DesignParams("straight_skirt", 45.0, 40.0)
    assert "mini length" in caption_phrases(p)
    assert "fitted" in caption_phrases(p)
    p = DesignParams("straight_skirt", 45.1, 52.0, waistband=True)
    assert "midi length" in caption_phrases(p)
    assert "regular fit" in caption_phrases(p)
    assert "with waistband" in caption_phrases(p)


def test_godet_panel_count_matches_inserts():
    p = DesignParams("godet_skirt", 60.0, 40.0, flare_ratio=1.5, num_inserts=8)
    pat = build_pattern(p)
    assert len(pat.panels) == 8 and len(pat.stitches) == 8
    assert validate(pat) == []


def test_every_rule_fires_somewhere():
    seen = set()
    for i in range(400):
        p = sample_params(i)
        for r in applicable_rules(p):
            seen.add(r.rule_id)
    assert seen == {r.rule_id for r in EDIT_RULES}


def test_edit_changes_only_affected_panels():
    for i in range(150):
        p = sample_params(1000 + i)
        for rule in applicable_rules(p):
            e = apply_rule(p, rule)
            e.params_after.check()
            assert validate(e.after) == []
            allowed = affected_panels(rule.rule_id, p)
            if allowed is None:
                continue
            before = {q.name: json.dumps(pattern_to_dict(e.before)["panels"][k]) for k, q in enumerate(e.before.panels)}
            after = {q.name: json.dumps(pattern_to_dict(e.after)["panels"][k]) for k, q in enumerate(e.after.panels)}
            for name in (before.keys() | after.keys()) - allowed:
                assert before.get(name) == after.get(name), (rule.rule_id, name)


def test_make_edit_deterministic(samples):
    s = samples[2]
    assert make_edit(s.params, s.seed) == make_edit(s.params, s.seed)


def test_split_sizes():
    sp = split_of(7, 1000)
    assert [len(sp[k]) for k in ("train", "val", "test")] == [900, 50, 50]
    assert sorted(sum(sp.values(), [])) == list(range(1000))


def test_emit_dataset_deterministic(tmp_path):
    a = emit_dataset(40, 3, tmp_path / "a")
    b = emit_dataset(40, 3, tmp_path / "b")
    assert a == b
    for name in sorted(p.name for p in (tmp_path / "a").iterdir()):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert a["counts"]["train"]["image"] == 0
    assert a["counts"]["train"]["text"] == a["counts"]["train"]["text_image"]


def test_emit_dataset_rejects_tiny_n(tmp_path):
    with pytest.raises(ValueError):
        emit_dataset(5, 0, tmp_path)


def test_corpus_lengths(samples):
    lengths = [encode_length(s.pattern) for s in samples]
    assert max(lengths) <= 838
    assert min(lengths) > 20
