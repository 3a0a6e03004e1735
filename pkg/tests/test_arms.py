from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from chatsumm import synth
from chatsumm.arms import (
    ExtractiveArm,
    RemoteArm,
    SimulatedArm,
    SimulatedArmSpec,
    ThresholdEffect,
    subsample_to_score,
)
from chatsumm.bandit import Context
from chatsumm.config import SummarizerConfig
from chatsumm.errors import ArmFailure, ProtocolError
from chatsumm.extractive import Resources, summarize_extractive
from chatsumm.metrics import metric_tokens, reward_score
from chatsumm.transcript import ChannelKind, ChatTranscript, Utterance, separate_channels


def ctx(frac):
    return Context(100, frac, 1, 0.5, 10, 30)


@pytest.fixture(scope="module")
def cfg():
    return SummarizerConfig(topic_grid_max=5, lda_iters=10)


class TestExtractiveArm:
    def test_delegates(self, synth_vectors, synth_transcripts, cfg):
        t = synth_transcripts[0]
        arm = ExtractiveArm(0, cfg, Resources(synth_vectors, synth.role_map()))
        expected = summarize_extractive(t, cfg, Resources(synth_vectors, synth.role_map()))
        assert arm.summarize(t, cfg.desired_summary_length) == expected.customer.summary.punctuated_text

    def test_single_sentence(self, synth_vectors, synth_transcripts, cfg):
        arm = ExtractiveArm(0, cfg, Resources(synth_vectors, synth.role_map()))
        out = arm.summarize(synth_transcripts[3], 1)
        res = Resources(synth_vectors, synth.role_map())
        r = summarize_extractive(synth_transcripts[3], replace(cfg, desired_summary_length=1), res)
        assert len(r.customer.summary.sentences) == 1
        assert out == r.customer.summary.punctuated_text

    def test_channel_input_and_agent(self, synth_vectors, synth_transcripts, cfg):
        res = Resources(synth_vectors, synth.role_map())
        customer, agent = separate_channels(synth_transcripts[1], res.role_map)
        arm = ExtractiveArm(0, cfg, res, channel=ChannelKind.AGENT)
        assert arm.summarize(agent, 2) == arm.summarize(synth_transcripts[1], 2)

    def test_deterministic_batch(self, synth_vectors, synth_transcripts, cfg):
        def run():
            arm = ExtractiveArm(0, cfg, Resources(synth_vectors, synth.role_map()))
            return [arm.summarize(t, 3) for t in synth_transcripts]

        assert run() == run()


TRANSCRIPT = ChatTranscript("t1", (Utterance(0, "cust", "my bill is wrong"), Utterance(1, "agent", "let me check")))


class TestRemoteArm:
    def test_fixed_summary(self, mock_service):
        mock_service.responses = [(200, {"summary": "Bill is wrong."})]
        arm = RemoteArm(0, mock_service.url)
        assert arm.summarize(TRANSCRIPT, 3) == "Bill is wrong."
        assert mock_service.paths == ["/v1/summarize"]
        assert mock_service.requests == [{"id": "t1", "text": TRANSCRIPT.text(), "channel": "customer",
                                          "max_sentences": 3}]

    def test_two_failures_then_success(self, mock_service):
        mock_service.responses = [(503, "busy"), (500, "oops"), (200, {"summary": "ok"})]
        assert RemoteArm(0, mock_service.url, retries=3).summarize(TRANSCRIPT, 1) == "ok"
        assert len(mock_service.requests) == 3

    def test_malformed_json(self, mock_service):
        mock_service.responses = [(200, b"not json at all")]
        with pytest.raises(ProtocolError):
            RemoteArm(0, mock_service.url).summarize(TRANSCRIPT, 1)

    def test_missing_summary(self, mock_service):
        mock_service.responses = [(200, {"text": "x"})]
        with pytest.raises(ProtocolError):
            RemoteArm(0, mock_service.url).summarize(TRANSCRIPT, 1)

    def test_non_2xx_is_arm_failure(self, mock_service):
        mock_service.responses = [(404, {"error": "nope"})]
        with pytest.raises(ArmFailure):
            RemoteArm(0, mock_service.url, retries=1).summarize(TRANSCRIPT, 1)
        mock_service.responses = [(500, "down")]
        with pytest.raises(ArmFailure):
            RemoteArm(1, mock_service.url, retries=1).summarize(TRANSCRIPT, 1)

    def test_byte_stable_and_no_mutation(self, mock_service):
        mock_service.responses = [(200, {"summary": "s"})]
        before = TRANSCRIPT
        arm = RemoteArm(0, mock_service.url)
        arm.summarize(TRANSCRIPT, 2)
        arm.summarize(TRANSCRIPT, 2)
        assert mock_service.raw_bodies[0] == mock_service.raw_bodies[1]
        assert TRANSCRIPT == before

    def test_agent_channel_body(self):
        agent = ChatTranscript("t", (Utterance(0, "agent", "hi"),), ChannelKind.AGENT)
        assert RemoteArm(0, "http://x").request_body(agent, 2)["channel"] == "agent"


class TestSimulatedArm:
    def test_constant(self):
        arm = SimulatedArm(0, SimulatedArmSpec(0.7))
        assert {arm.direct_reward(ctx(f / 10), str(f)) for f in range(10)} == {0.7}

    def test_coefficient_gap(self):
        arm = SimulatedArm(0, SimulatedArmSpec(0.3, {"length_fraction": 0.2}))
        assert arm.direct_reward(ctx(1.0)) - arm.direct_reward(ctx(0.0)) == pytest.approx(0.2, abs=1e-15)

    def test_standardized_coefficients(self):
        spec = SimulatedArmSpec(0.5, {"length_fraction": 0.1}, use_standardized=True)
        arm = SimulatedArm(0, spec)
        c = replace(ctx(0.5), standardized=(0.0, 2.0, 0.0, 0.0, 0.0))
        assert arm.mean_reward(c) == pytest.approx(0.7)
        assert arm.mean_reward(ctx(0.5)) == 0.5

    def test_threshold(self):
        arm = SimulatedArm(0, SimulatedArmSpec(0.5, threshold_effects=(ThresholdEffect("length_fraction", 0.5, 0.15),)))
        assert arm.expected_reward(ctx(0.6)) == pytest.approx(0.65)
        assert arm.expected_reward(ctx(0.4)) == 0.5

    def test_law_of_large_numbers(self):
        arm = SimulatedArm(0, SimulatedArmSpec(0.5, noise_sd=0.1, rng_seed=9))
        draws = np.array([arm.direct_reward(ctx(0.5), f"k{i}") for i in range(10_000)])
        assert abs(draws.mean() - 0.5) <= 0.01
        assert draws.min() >= 0.0 and draws.max() <= 1.0

    def test_reproducible_per_seed(self):
        a = SimulatedArm(0, SimulatedArmSpec(0.5, noise_sd=0.2, rng_seed=1))
        b = SimulatedArm(0, SimulatedArmSpec(0.5, noise_sd=0.2, rng_seed=1))
        c = SimulatedArm(0, SimulatedArmSpec(0.5, noise_sd=0.2, rng_seed=2))
        assert a.direct_reward(ctx(0.5), "x") == b.direct_reward(ctx(0.5), "x")
        assert a.direct_reward(ctx(0.5), "x") != c.direct_reward(ctx(0.5), "x")

    def test_clipped(self):
        assert SimulatedArm(0, SimulatedArmSpec(1.4)).direct_reward(ctx(0.5)) == 1.0
        assert SimulatedArm(0, SimulatedArmSpec(-0.3)).direct_reward(ctx(0.5)) == 0.0

    def test_text_mode_approximates_reward(self):
        arm = SimulatedArm(0, SimulatedArmSpec(0.6), mode="text")
        ref = " ".join(f"w{i}" for i in range(400))
        scores = [reward_score(arm.summarize(ChatTranscript(f"t{i}"), 5, context=ctx(0.5), reference=ref), ref,
                               "rouge1") for i in range(30)]
        assert abs(np.mean(scores) - 0.6) < 0.03

    def test_subsample_is_subsequence(self):
        ref = metric_tokens("a b c d e f g h")
        out = subsample_to_score(ref, 0.5, np.random.default_rng(0)).split()
        it = iter(ref)
        assert all(tok in it for tok in out)
        assert subsample_to_score(ref, 1.0, np.random.default_rng(0)).split() == ref

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            SimulatedArm(0, SimulatedArmSpec(0.5), mode="audio")
