"""Seeded synthetic support-chat transcripts and matching word vectors.

Each transcript is about one or two service topics.  Customer and agent
turns are drawn from templates whose slots are filled with that topic's
vocabulary, and every topic has its own cluster in the vector space, so
keyword similarity and topic structure are both recoverable.
"""

from __future__ import annotations

import re
from collections.abc import Sequence

import numpy as np

from .embeddings import WordVectorStore
from .transcript import ChatTranscript, Role, RoleMap, Utterance

TOPICS: dict[str, tuple[str, ...]] = {
    "billing": ("invoice", "payment", "charge", "refund", "balance", "statement", "discount",
                "credit", "billing", "receipt", "overcharge", "installment"),
    "internet": ("router", "modem", "signal", "outage", "connection", "bandwidth", "wireless",
                 "network", "ethernet", "latency", "firmware", "hotspot"),
    "mobile": ("phone", "roaming", "device", "handset", "number", "voicemail", "coverage",
               "message", "contract", "upgrade", "screen", "battery"),
    "television": ("channel", "remote", "receiver", "package", "streaming", "recording",
                   "program", "subscription", "picture", "guide", "cable", "decoder"),
    "security": ("password", "login", "account", "verification", "profile", "email",
                 "identity", "access", "username", "security", "address", "question"),
    "moving": ("appointment", "technician", "installation", "schedule", "relocation",
               "equipment", "delivery", "transfer", "service", "apartment", "visit", "window"),
}

CUSTOMER_TEMPLATES = (
    "my {a} stopped working since yesterday",
    "i have a problem with the {a} and the {b}",
    "can you check the {a} on my side",
    "why is the {a} so slow again",
    "the {a} shows an error about the {b}",
    "i was told the {a} would be fixed",
    "is there a fee for the {a}",
    "what happened to my {a}",
    "please update the {a} and the {b}",
    "the {a} keeps failing after the {b}",
    "i need help with my {a} today",
    "could you explain the {a} charge",
)
AGENT_TEMPLATES = (
    "i can help you with the {a}",
    "let me check the {a} on your file",
    "i have reset the {a} and refreshed the {b}",
    "the {a} should work within the hour",
    "please restart the {a} and wait a moment",
    "i see a note about the {b} on your {a}",
    "do you still see the problem with the {a}",
    "is the {a} showing any lights right now",
    "i have sent a confirmation about the {a}",
    "your {a} is now linked to the {b}",
)
FILLERS = (
    ("customer", "hello"),
    ("customer", "thanks a lot"),
    ("customer", "okay let me try that"),
    ("agent", "thank you for waiting"),
    ("agent", "is there anything else i can do"),
    ("agent", "have a great day"),
)
CUSTOMER_ID = "cust"
AGENT_IDS = ("agent", "agent2")

_WORD_RE = re.compile(r"[a-z0-9]+")


def role_map() -> RoleMap:
    return RoleMap({CUSTOMER_ID: Role.CUSTOMER, **{a: Role.AGENT for a in AGENT_IDS}})


def _fill(template: str, words: Sequence[str], rng: np.random.Generator) -> str:
    a, b = rng.choice(len(words), size=2, replace=False)
    return template.format(a=words[a], b=words[b])


def _punctuate(text: str, rng: np.random.Generator) -> str:
    words = text.split()
    if len(words) > 6 and rng.random() < 0.3:
        cut = int(rng.integers(3, len(words) - 2))
        words[cut] += ","
    end = "?" if words[0].lower() in ("can", "why", "is", "what", "could", "do") else "."
    return " ".join(words)[0].upper() + " ".join(words)[1:] + end


def make_transcript(tid: str, rng: np.random.Generator, turns: tuple[int, int] = (6, 14)) -> ChatTranscript:
    names = list(TOPICS)
    k = 1 if rng.random() < 0.6 else 2
    topics = [names[i] for i in rng.choice(len(names), size=k, replace=False)]
    n_turns = int(rng.integers(turns[0], turns[1] + 1))
    second_agent = rng.random() < 0.1
    utterances = []
    for i in range(n_turns):
        role = "customer" if i % 2 == 0 else "agent"
        if rng.random() < 0.15:
            role, text = FILLERS[int(rng.integers(len(FILLERS)))]
        else:
            words = TOPICS[topics[int(rng.integers(len(topics)))]]
            pool = CUSTOMER_TEMPLATES if role == "customer" else AGENT_TEMPLATES
            text = _fill(pool[int(rng.integers(len(pool)))], words, rng)
            if rng.random() < 0.3:
                extra = CUSTOMER_TEMPLATES if role == "customer" else AGENT_TEMPLATES
                text = _punctuate(text, rng) + " " + _fill(extra[int(rng.integers(len(extra)))], words, rng)
        speaker = CUSTOMER_ID if role == "customer" else (AGENT_IDS[1] if second_agent and i > n_turns // 2
                                                          else AGENT_IDS[0])
        utterances.append(Utterance(i, speaker, _punctuate(text, rng)))
    return ChatTranscript(tid, tuple(utterances))


def make_transcripts(n: int, seed: int = 0, turns: tuple[int, int] = (6, 14)) -> list[ChatTranscript]:
    rng = np.random.default_rng(seed)
    return [make_transcript(f"t{i:05d}", rng, turns) for i in range(n)]


def vocabulary() -> list[str]:
    words: dict[str, None] = {}
    for group in TOPICS.values():
        for w in group:
            words.setdefault(w, None)
    for tpl in CUSTOMER_TEMPLATES + AGENT_TEMPLATES + tuple(t for _, t in FILLERS):
        for w in _WORD_RE.findall(tpl):
            words.setdefault(w, None)
    return list(words)


def make_word_vectors(dim: int = 32, seed: int = 0, spread: float = 0.8) -> WordVectorStore:
    """Topic words cluster around per-topic centers; other words are
    low-norm random vectors."""
    rng = np.random.default_rng(seed)
    centers = {name: rng.normal(size=dim) for name in TOPICS}
    table: dict[str, np.ndarray] = {}
    for name, group in TOPICS.items():
        c = centers[name] / np.linalg.norm(centers[name])
        for w in group:
            if w not in table:
                table[w] = c + spread * rng.normal(size=dim) / np.sqrt(dim)
    for w in vocabulary():
        if w not in table:
            table[w] = 0.3 * rng.normal(size=dim) / np.sqrt(dim)
    return WordVectorStore(dim, table)
