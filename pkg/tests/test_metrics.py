from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from chatsumm.errors import LengthMismatch
from chatsumm.metrics import (
    PRF,
    MetricScores,
    aggregate,
    bleu,
    lcs_length,
    metric_tokens,
    punct_accuracy,
    reward_score,
    rouge,
    score_texts,
)
from chatsumm.punctuation import PunctLabel
from helpers import METRIC_CASES, bleu_oracle, lcs_oracle, rouge1_oracle, rougeL_oracle

O, C, P, Q = PunctLabel.O, PunctLabel.COMMA, PunctLabel.PERIOD, PunctLabel.QUESTION
tokens = st.lists(st.sampled_from(list("abcdef")), max_size=12)


@pytest.mark.parametrize("cand,ref,hand", METRIC_CASES)
class TestFixture:
    def test_bleu(self, cand, ref, hand):
        c, r = cand.split(), ref.split()
        assert bleu(c, r) == pytest.approx(bleu_oracle(c, r), abs=1e-9)
        if "bleu" in hand:
            assert bleu(c, r) == pytest.approx(hand["bleu"], abs=1e-9)

    def test_rouge(self, cand, ref, hand):
        c, r = cand.split(), ref.split()
        r1, rl = rouge(c, r, "R1"), rouge(c, r, "RL")
        assert (r1.precision, r1.recall, r1.f1) == pytest.approx(rouge1_oracle(c, r), abs=1e-9)
        assert (rl.precision, rl.recall, rl.f1) == pytest.approx(rougeL_oracle(c, r), abs=1e-9)
        if "r1" in hand:
            assert r1.f1 == pytest.approx(hand["r1"], abs=1e-9)
        if "rl" in hand:
            assert rl.f1 == pytest.approx(hand["rl"], abs=1e-9)


class TestBleu:
    def test_identity(self):
        x = "my router keeps dropping the connection".split()
        assert bleu(x, x) == 1.0

    def test_disjoint_long_candidate_near_floor(self):
        cand = [f"x{i}" for i in range(100)]
        ref = [f"y{i}" for i in range(100)]
        assert bleu(cand, ref) < 0.05

    def test_empty(self):
        assert bleu([], ["a"]) == 0.0

    @given(tokens, tokens)
    def test_bounded(self, c, r):
        assert 0.0 <= bleu(c, r) <= 1.0 + 1e-12


class TestRouge:
    def test_worked_examples(self):
        r1 = rouge("a b c".split(), "a b d".split(), "rouge1")
        assert (r1.precision, r1.recall, r1.f1) == pytest.approx((2 / 3, 2 / 3, 2 / 3))
        assert lcs_length("a b c d".split(), "a c b d".split()) == 3
        assert rouge("a b c d".split(), "a c b d".split(), "rougeL").f1 == pytest.approx(0.75)

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            rouge(["a"], ["a"], "rouge2")

    @given(tokens.filter(bool))
    def test_identity(self, x):
        assert rouge(x, x, "R1").f1 == pytest.approx(1.0)
        assert rouge(x, x, "RL").f1 == pytest.approx(1.0)

    @given(tokens, tokens)
    def test_r1_f1_symmetric(self, a, b):
        assert rouge(a, b, "R1").f1 == pytest.approx(rouge(b, a, "R1").f1, abs=1e-12)

    @given(tokens, tokens)
    def test_bounded_and_lcs_oracle(self, a, b):
        for v in ("R1", "RL"):
            s = rouge(a, b, v)
            assert all(0.0 <= x <= 1.0 for x in (s.precision, s.recall, s.f1))
        assert lcs_length(a, b) == lcs_oracle(a, b)

    @given(tokens, tokens.filter(bool), st.data())
    def test_appending_match_keeps_recall(self, c, r, data):
        tok = data.draw(st.sampled_from(r))
        assert rouge(c + [tok], r, "R1").recall >= rouge(c, r, "R1").recall


class TestPunctAccuracy:
    def test_identical(self):
        assert punct_accuracy([O, P, C], [O, P, C]) == 100.0

    def test_two_thirds(self):
        assert punct_accuracy([O, P, O], [O, O, O]) == pytest.approx(66.67, abs=0.01)

    def test_mismatch(self):
        with pytest.raises(LengthMismatch):
            punct_accuracy([O], [O, O])

    def test_periods_only_coerces(self):
        assert punct_accuracy([C, Q], [O, P], periods_only=True) == 100.0
        assert punct_accuracy([C, Q], [O, P]) == 0.0

    @given(st.lists(st.tuples(st.sampled_from([O, C, P, Q]), st.sampled_from([O, C, P, Q])), max_size=30))
    def test_bounded(self, pairs):
        a = punct_accuracy([x for x, _ in pairs], [y for _, y in pairs])
        assert 0.0 <= a <= 100.0


def _scores(rng: random.Random, punct=True) -> MetricScores:
    def prf():
        return PRF(rng.random(), rng.random(), rng.random())

    return MetricScores(rng.random(), prf(), prf(), rng.uniform(0, 100) if punct and rng.random() < 0.7 else None)


class TestAggregate:
    def test_single(self):
        s = MetricScores(0.5, PRF(0.1, 0.2, 0.3), PRF(0.4, 0.5, 0.6), 80.0)
        ch = aggregate([("customer", s)]).channels["customer"]
        assert ch.count == 1 and ch.means["bleu"] == 0.5 and ch.means["rougeL_f1"] == 0.6
        assert ch.punct_accuracy == 80.0

    def test_mean(self):
        a = MetricScores(0.2, PRF(), PRF())
        b = MetricScores(0.4, PRF(), PRF())
        ch = aggregate([("agent", a), ("agent", b)]).channels["agent"]
        assert ch.means["bleu"] == pytest.approx(0.3)
        assert ch.punct_accuracy is None and ch.punct_count == 0

    def test_brute_force(self):
        rng = random.Random(11)
        items = [(rng.choice(["customer", "agent"]), _scores(rng)) for _ in range(1000)]
        rep = aggregate(items)
        for channel in ("customer", "agent"):
            mine = [s for c, s in items if c == channel]
            ch = rep.channels[channel]
            assert ch.count == len(mine)
            total = 0.0
            for s in mine:
                total = total + s.rougeL.recall
            assert ch.means["rougeL_recall"] == pytest.approx(total / len(mine), abs=1e-12)
            assert ch.means["bleu"] == pytest.approx(sum(s.bleu for s in mine) / len(mine), abs=1e-12)
            ps = [s.punct_accuracy for s in mine if s.punct_accuracy is not None]
            assert ch.punct_count == len(ps)
            assert ch.punct_accuracy == pytest.approx(sum(ps) / len(ps), abs=1e-12)

    def test_round_trip_dict(self):
        s = _scores(random.Random(2))
        assert MetricScores.from_dict(s.to_dict()) == s


class TestTextHelpers:
    def test_tokens(self):
        assert metric_tokens("Hi, I can't log-in!") == ["hi", "i", "can't", "log", "in"]

    def test_score_texts_ignores_case_and_punct(self):
        s = score_texts("Reset the router.", "reset the router")
        assert s.rouge1.f1 == 1.0 and s.rougeL.f1 == 1.0

    def test_reward_metrics(self):
        assert reward_score("a b c", "a b d", "rouge1") == pytest.approx(2 / 3)
        assert reward_score("a b c d", "a c b d", "rougeL") == pytest.approx(0.75)
        with pytest.raises(ValueError):
            reward_score("a", "a", "meteor")
