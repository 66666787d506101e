import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patternlm.codec import (
    PE_BIN_WIDTH,
    CapacityError,
    CodecError,
    DecodeError,
    GarmentGrammar,
    NormStats,
    TokenizedGarment,
    assign_stitch_tags,
    decode,
    encode,
    encode_length,
    fit_norm_stats,
    load_vocabulary,
    pe_bin_index,
    quantize_pe_input,
    save_vocabulary,
)
from patternlm.pattern import (
    Arc,
    CubicBezier,
    Edge,
    Line,
    Panel,
    Placement3,
    Point2,
    SewingPattern,
    Stitch,
    max_abs_difference,
)

P = Point2


def square(name="front", n=4):
    verts = [P(0, 0), P(10, 0), P(10, 10), P(0, 10), P(-5, 5), P(-5, 2)][:n]
    return Panel(name, tuple(verts), tuple(Edge() for _ in range(n)))


def test_pattern_special_count(vocab):
    assert vocab.pattern_special_count == 122


def test_vocabulary_ids_stable(vocab):
    from patternlm.datagen import build_vocabulary

    assert build_vocabulary().tokens == vocab.tokens
    assert len(set(vocab.tokens)) == len(vocab.tokens)


def test_vocabulary_file_roundtrip(vocab, stats, tmp_path):
    save_vocabulary(vocab, stats, tmp_path / "v.json")
    v2, s2 = load_vocabulary(tmp_path / "v.json")
    assert v2.tokens == vocab.tokens and s2 == stats


def test_stitch_tags_first_appearance():
    pat = SewingPattern((square("a"), square("b")), (Stitch((1, 0), (0, 2)), Stitch((0, 0), (0, 1))))
    tags = assign_stitch_tags(pat)
    assert tags[(0, 0)] == tags[(0, 1)] == 1
    assert tags[(0, 2)] == tags[(1, 0)] == 2
    assert tags[(0, 3)] is None


def test_no_stitches_all_null():
    tags = assign_stitch_tags(SewingPattern((square(),)))
    assert set(tags.values()) == {None}


def test_tag_capacity():
    panels = tuple(square(f"p{i}") for i in range(3))
    stitches = [Stitch((i, 0), (i, 1)) for i in range(3)]
    with pytest.raises(CapacityError):
        assign_stitch_tags(SewingPattern(panels, stitches), max_tags=2)


def test_stitch_permutation_invariance(samples, vocab, stats):
    s = samples[3].pattern
    rev = SewingPattern(s.panels, tuple(Stitch(b.second, b.first) for b in reversed(s.stitches)))
    a, b = encode(s, vocab, stats), encode(rev, vocab, stats)
    assert json.dumps(a.to_record(vocab)) == json.dumps(b.to_record(vocab))


def test_empty_pattern_encodes_to_two_tokens(vocab, stats):
    tg = encode(SewingPattern(()), vocab, stats)
    assert vocab.render(tg.tokens) == "<garment_start> <garment_end>"


def test_length_formula_ten_panels(vocab):
    panels = tuple(square("skirt_front", 6) for _ in range(10))
    pat = SewingPattern(panels)
    assert encode_length(pat) == 172
    assert len(encode(pat, vocab, NormStats.identity())) == 172


def test_payload_positions_and_masks(samples, vocab, stats):
    tg = encode(samples[0].pattern, vocab, stats)
    for tok, pay, m in zip(tg.tokens, tg.payloads, tg.masks):
        has = tok in vocab.edge_ids or vocab.tokens[tok] == "<R>"
        assert (pay is not None) == has
        if pay is not None:
            assert np.all(pay[~m] == 0.0)


def test_decode_roundtrip(samples, vocab, stats):
    for s in samples:
        out, repairs = decode(encode(s.pattern, vocab, stats), vocab, stats)
        assert repairs == []
        assert out.stitches == s.pattern.stitches
        assert out == s.pattern


def test_off_grid_pattern_roundtrips_within_grid(vocab):
    panel = Panel("front", (P(0, 0), P(10.1, 0.3), P(9.7, 10.0 / 3)), (Edge(), Edge(), Edge()),
                  Placement3((1 / 3, 2.0, -0.7), (0.9, 0.1, 0.3, 0.2)))
    pat = SewingPattern((panel,))
    st_ = fit_norm_stats([pat])
    out, repairs = decode(encode(pat, vocab, st_), vocab, st_)
    assert repairs == []
    assert max_abs_difference(out, pat) <= 2.0**-30


def test_decode_identity_stats_is_exact(samples, vocab):
    for s in samples[:50]:
        out, _ = decode(encode(s.pattern, vocab, NormStats.identity()), vocab, NormStats.identity())
        assert out == s.pattern


def test_single_use_tag_error(vocab, stats):
    pat = SewingPattern((square(),), (Stitch((0, 0), (0, 1)),))
    tg = encode(pat, vocab, stats)
    t1, tn = vocab["<t1>"], vocab["<tN>"]
    tokens = list(tg.tokens)
    first = tokens.index(t1)
    tokens[first] = tn
    tokens[tokens.index(t1)] = vocab["<t3>"]
    with pytest.raises(DecodeError, match="tag t3 matched 1 edge, expected 2"):
        decode(TokenizedGarment(tokens, tg.payloads, tg.masks), vocab, stats)


def test_open_edge_in_last_slot_is_grammar_error(vocab, stats):
    tg = encode(SewingPattern((square(),)), vocab, stats)
    tokens = [vocab["<line>"] if t == vocab["<cline>"] else t for t in tg.tokens]
    with pytest.raises(DecodeError, match="grammar violation"):
        decode(TokenizedGarment(tokens, tg.payloads, tg.masks), vocab, stats)


def test_missing_payload_is_an_error(vocab, stats):
    tg = encode(SewingPattern((square(),)), vocab, stats)
    i = tg.tokens.index(vocab["<line>"])
    payloads = list(tg.payloads)
    payloads[i] = None
    with pytest.raises(DecodeError, match="payload missing"):
        decode(TokenizedGarment(tg.tokens, payloads, tg.masks), vocab, stats)


def test_closing_endpoint_repair_logged(vocab):
    ident = NormStats.identity()
    tg = encode(SewingPattern((square(),)), vocab, ident)
    i = tg.tokens.index(vocab["<cline>"])
    tg.payloads[i] = tg.payloads[i] + np.array([0.5, 0, 0, 0, 0, 0, 0, 0])
    out, repairs = decode(tg, vocab, ident)
    assert len(repairs) == 1 and "forced" in repairs[0]
    assert out.panels[0].vertices[0] == P(0, 0)


def test_quaternion_repair_logged(vocab):
    ident = NormStats.identity()
    tg = encode(SewingPattern((square(),)), vocab, ident)
    i = tg.tokens.index(vocab["<R>"])
    tg.payloads[i] = np.array([0, 0, 0, 2.0, 0, 0, 0])
    out, repairs = decode(tg, vocab, ident)
    assert any("renormalized" in r for r in repairs)
    assert out.panels[0].placement.rotation == (1.0, 0.0, 0.0, 0.0)


def test_degenerate_arc_repair_logged(vocab):
    ident = NormStats.identity()
    p = Panel("a", (P(0, 0), P(10, 0), P(10, 10)), (Edge(), Edge(Arc(P(12, 5))), Edge()))
    tg = encode(SewingPattern((p,)), vocab, ident)
    i = tg.tokens.index(vocab["<arc>"])
    tg.payloads[i] = np.where(tg.masks[i], np.array([10, 10, 0, 0, 0, 0, 10, 5.0]), 0.0)
    out, repairs = decode(tg, vocab, ident)
    assert len(repairs) == 1 and "collinear" in repairs[0]
    assert out.panels[0].edges[1].geometry == Line()


def test_all_zero_payloads_still_decode(samples, vocab, stats):
    # an untrained regression head predicts the normalized zero everywhere
    for s in samples[:50]:
        tg = encode(s.pattern, vocab, stats)
        tg.payloads = [None if p is None else np.zeros_like(p) for p in tg.payloads]
        out, _ = decode(tg, vocab, stats)
        assert [p.name for p in out.panels] == [p.name for p in s.pattern.panels]


def test_unknown_word_policy(vocab, stats):
    odd = SewingPattern((square("zzz"),))
    with pytest.raises(CodecError, match="not in vocabulary"):
        encode(odd, vocab, stats)
    tg = encode(odd, vocab, stats, allow_unknown=True)
    assert vocab["<unk>"] in tg.tokens


def test_fit_norm_stats_constant_channel():
    pat = SewingPattern((Panel("a", (P(0, 0), P(5, 0), P(5, 5)), (Edge(),) * 3, Placement3((5, 5, 5))),))
    st_ = fit_norm_stats([pat])
    assert st_.transl_mean == (5.0, 5.0, 5.0)
    assert st_.transl_std == (1e-6, 1e-6, 1e-6)


def test_fit_norm_stats_duplication_invariant(samples):
    pats = [s.pattern for s in samples[:100]]
    a, b = fit_norm_stats(pats), fit_norm_stats(pats + pats)
    for x, y in zip(a.to_dict().values(), b.to_dict().values()):
        assert np.allclose(x, y, rtol=1e-12, atol=0)


def _running(values):
    # single pass: Welford's update, independent of the two-pass fsum code
    n, mean, m2 = 0, 0.0, 0.0
    for v in values:
        n += 1
        d = v - mean
        mean += d / n
        m2 += d * (v - mean)
    return mean, math.sqrt(m2 / n)


def test_fit_norm_stats_matches_single_pass_oracle(samples):
    pats = [s.pattern for s in samples]
    xs, ys, tr = [], [], []
    for p in pats:
        for panel in p.panels:
            pts = list(panel.vertices) + [c for e in panel.edges for c in vars(e.geometry).values()]
            xs += [q.x for q in pts]
            ys += [q.y for q in pts]
            tr.append(panel.placement.translation)
    got = fit_norm_stats(pats)
    for axis, vals in enumerate((xs, ys)):
        mean, std = _running(vals)
        assert got.coord_mean[axis] == pytest.approx(mean, rel=1e-9)
        assert got.coord_std[axis] == pytest.approx(std, rel=1e-9)
    for c in range(3):
        mean, std = _running([t[c] for t in tr])
        assert got.transl_mean[c] == pytest.approx(mean, rel=1e-9, abs=1e-12)
        assert got.transl_std[c] == pytest.approx(max(std, 1e-6), rel=1e-9)


@pytest.mark.parametrize("v, bin_, centre", [(-4.0, 0, -3.984375), (0.0, 128, 0.015625), (10.0, 255, 3.984375)])
def test_pe_bins(v, bin_, centre):
    assert pe_bin_index(v) == bin_
    assert quantize_pe_input(v) == centre


def test_pe_last_bin_closed_first_open():
    assert pe_bin_index(4.0) == 255
    assert pe_bin_index(-4.0 + 1 / 32) == 1
    assert pe_bin_index(-100.0) == 0


@settings(max_examples=300, deadline=None)
@given(st.floats(-4, 4, allow_nan=False))
def test_quantization_error_bound(v):
    assert abs(quantize_pe_input(v) - v) <= PE_BIN_WIDTH / 2 + 1e-15


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_roundtrip_property(seed):
    from patternlm.datagen import build_vocabulary, generate_sample

    vocab = _VOCAB.setdefault("v", build_vocabulary())
    pat = generate_sample(seed, 0).pattern
    stats = fit_norm_stats([pat])
    tg = encode(pat, vocab, stats)
    assert len(tg) == encode_length(pat)
    out, repairs = decode(tg, vocab, stats)
    assert repairs == [] and out == pat


_VOCAB: dict = {}


def test_grammar_strict_mode_limits(vocab):
    g = GarmentGrammar(vocab, strict=True)
    assert g.allowed() == {vocab["<garment_start>"]}
    g.feed(vocab["<garment_start>"])
    g.feed(vocab["<panel_start>"])
    g.feed(vocab["front"])
    g.feed(vocab["<R>"])
    # a closing edge is not offered before two open edges
    assert vocab["<cline>"] not in g.allowed()
    g.feed(vocab["<line>"])
    assert vocab["<t1>"] in g.allowed() and vocab["<t2>"] not in g.allowed()


def test_grammar_accepts_every_encoded_sample(samples, vocab, stats):
    for s in samples:
        g = GarmentGrammar(vocab, strict=True)
        for t in encode(s.pattern, vocab, stats).tokens:
            assert t in g.allowed()
            g.feed(t)
        assert g.done


def test_token_line_roundtrip(samples, vocab, stats):
    tg = encode(samples[5].pattern, vocab, stats)
    rec = json.loads(json.dumps(tg.to_record(vocab)))
    back = TokenizedGarment.from_record(rec, vocab)
    assert back.tokens == tg.tokens
    assert all((a is None and b is None) or np.array_equal(a, b) for a, b in zip(back.payloads, tg.payloads))


def test_shuffled_stitch_order_random(samples, vocab, stats):
    rng = random.Random(0)
    for s in samples[:30]:
        st_ = list(s.pattern.stitches)
        rng.shuffle(st_)
        shuffled = SewingPattern(s.pattern.panels, tuple(st_))
        assert encode(shuffled, vocab, stats).tokens == encode(s.pattern, vocab, stats).tokens


def test_curved_edges_keep_control_points(vocab):
    panel = Panel(
        "front",
        (P(0, 0), P(10, 0), P(10, 10), P(0, 10)),
        (Edge(Line()), Edge(CubicBezier(P(12, 3), P(11, 7))), Edge(Arc(P(5, 12))), Edge(Line())),
    )
    stats = NormStats.identity()
    out, _ = decode(encode(SewingPattern((panel,)), vocab, stats), vocab, stats)
    assert out.panels[0] == panel
