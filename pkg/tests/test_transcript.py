from __future__ import annotations

import io
import json
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from chatsumm.errors import EmptyInput, MalformedRecord, UnknownSpeaker
from chatsumm.transcript import (
    ChannelKind,
    ChatTranscript,
    Role,
    RoleMap,
    Utterance,
    join_utterances,
    parse_role_map,
    parse_transcripts,
    separate_channels,
    split_sentences,
    transcript_to_record,
)

ROLES = {"C": Role.CUSTOMER, "A": Role.AGENT}


def make(pairs, tid="t"):
    return ChatTranscript(tid, tuple(Utterance(i, s, x) for i, (s, x) in enumerate(pairs)))


class TestParse:
    def test_order_preserved(self):
        line = json.dumps({"id": "x", "utterances": [{"speaker": "C", "text": "hi"}, {"speaker": "A", "text": "yo"}]})
        [t] = parse_transcripts(io.StringIO(line + "\n"))
        assert [u.index for u in t.utterances] == [0, 1]
        assert [u.text for u in t.utterances] == ["hi", "yo"]
        assert t.channel_kind is ChannelKind.FULL

    def test_empty_stream(self):
        with pytest.raises(EmptyInput):
            parse_transcripts(io.StringIO(""))
        with pytest.raises(EmptyInput):
            parse_transcripts(io.StringIO("\n  \n"))

    def test_missing_speaker_reports_line(self):
        good = json.dumps({"id": "a", "utterances": []})
        bad = json.dumps({"id": "b", "utterances": [{"text": "hello"}]})
        with pytest.raises(MalformedRecord) as ei:
            parse_transcripts([good, bad])
        assert ei.value.line_no == 2

    def test_invalid_json(self):
        with pytest.raises(MalformedRecord):
            parse_transcripts(["{not json"])

    def test_bytes_lines(self):
        line = json.dumps({"id": "é", "utterances": [{"speaker": "C", "text": "ça va"}]}).encode()
        [t] = parse_transcripts(io.BytesIO(line))
        assert t.utterances[0].text == "ça va"

    def test_empty_text_allowed(self):
        [t] = parse_transcripts([json.dumps({"id": "a", "utterances": [{"speaker": "C", "text": ""}]})])
        assert t.utterances[0].text == ""

    def test_record_round_trip(self):
        t = make([("C", "hi"), ("A", "hello")])
        [back] = parse_transcripts([json.dumps(transcript_to_record(t))])
        assert back == t

    def test_indices_must_increase(self):
        with pytest.raises(ValueError):
            ChatTranscript("x", (Utterance(1, "C", "a"), Utterance(0, "C", "b")))


class TestRoleMap:
    def test_parse(self):
        rm = parse_role_map(["# roles", "cust=customer", "bot = Agent", ""])
        assert rm["cust"] is Role.CUSTOMER and rm["bot"] is Role.AGENT
        assert len(rm) == 2

    def test_bad_role(self):
        with pytest.raises(MalformedRecord):
            parse_role_map(["x=manager"])

    def test_pattern_fallback(self):
        rm = RoleMap({}, customer_pattern=r"cust.*")
        assert rm["cust42"] is Role.CUSTOMER
        assert rm["someone"] is Role.AGENT


class TestSeparate:
    def test_concatenation(self):
        c, a = separate_channels(make([("C", "hi"), ("A", "hello"), ("C", "bill is wrong")]), ROLES)
        assert c.text() == "hi. bill is wrong"
        assert a.text() == "hello"
        assert c.channel_kind is ChannelKind.CUSTOMER and a.channel_kind is ChannelKind.AGENT

    def test_all_customer(self):
        c, a = separate_channels(make([("C", "a"), ("C", "b")]), ROLES)
        assert len(c.utterances) == 2 and len(a.utterances) == 0

    def test_alternating(self):
        c, a = separate_channels(make([("C", "1"), ("A", "2"), ("C", "3"), ("A", "4")]), ROLES)
        assert [u.text for u in c.utterances] == ["1", "3"]
        assert [u.text for u in a.utterances] == ["2", "4"]

    def test_unknown_speaker(self):
        with pytest.raises(UnknownSpeaker):
            separate_channels(make([("Z", "who")]), ROLES)

    def test_multiple_agents_merge(self):
        roles = {"C": Role.CUSTOMER, "A1": Role.AGENT, "A2": Role.AGENT}
        _, a = separate_channels(make([("A1", "x"), ("C", "y"), ("A2", "z")]), roles)
        assert [u.speaker_id for u in a.utterances] == ["A1", "A2"]

    def test_no_double_period(self):
        assert join_utterances(["done.", "next", "", "why?", "ok"]) == "done. next. why? ok"

    @given(st.lists(st.tuples(st.sampled_from(["C", "A"]), st.text(max_size=8)), max_size=20))
    def test_partition(self, pairs):
        t = make(pairs)
        c, a = separate_channels(t, ROLES)
        assert Counter(c.utterances) + Counter(a.utterances) == Counter(t.utterances)
        for part in (c, a):
            idx = [u.index for u in part.utterances]
            assert idx == sorted(idx)

    @given(st.lists(st.text(max_size=8), max_size=10))
    def test_idempotent_on_customer(self, texts):
        c, _ = separate_channels(make([("C", x) for x in texts]), ROLES)
        c2, a2 = separate_channels(c, ROLES)
        assert c2 == c and a2.utterances == ()


class TestSplitSentences:
    def test_basic(self):
        assert [s.text for s in split_sentences("a b. c d.")] == ["a b.", "c d."]

    def test_empty(self):
        assert split_sentences("") == []

    def test_no_delimiter(self):
        assert [s.text for s in split_sentences("no delimiter at end")] == ["no delimiter at end"]

    def test_ten_sentence_fixture(self):
        expected = [
            "Hello there.", "Can you help me?", "My router keeps dropping.", "It started yesterday!",
            "I restarted it twice.", "Nothing changed.", "Is there an outage?", "Please check.",
            "Thanks a lot.", "bye for now",
        ]
        got = split_sentences(" ".join(expected))
        assert [s.text for s in got] == expected
        assert [s.index for s in got] == list(range(10))

    def test_no_empty_sentences(self):
        assert [s.text for s in split_sentences(". . a. ?")] == ["a."]

    @given(st.lists(st.from_regex(r"[a-z]{1,6}( [a-z]{1,6}){0,4}\.", fullmatch=True), max_size=10))
    def test_join_identity(self, sentences):
        assert [s.text for s in split_sentences(" ".join(sentences))] == sentences
