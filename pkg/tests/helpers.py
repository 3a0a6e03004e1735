"""Shared fixture builders and independent reference implementations."""

from __future__ import annotations

import math

import numpy as np

from chatsumm.preprocess import Document, build_corpus


def disjoint_topic_corpus(n_docs: int, n_topics: int = 3, words_per_topic: int = 20, doc_len: int = 40,
                          seed: int = 0, mix: float = 0.0):
    """Documents drawn from topics with disjoint vocabularies.

    Each document has one main topic; with ``mix`` > 0 that fraction of its
    tokens comes from a second random topic.  Returns (corpus, true
    topic-word matrix over the corpus vocabulary order, main topic per doc).
    """
    rng = np.random.default_rng(seed)
    vocab = [[f"t{k}w{i:02d}" for i in range(words_per_topic)] for k in range(n_topics)]
    # Zipf-like word weights so top words are identifiable
    w = 1.0 / np.arange(1, words_per_topic + 1)
    w /= w.sum()
    docs, mains = [], []
    for d in range(n_docs):
        k = d % n_topics
        other = int(rng.integers(n_topics))
        toks = []
        for _ in range(doc_len):
            kk = other if rng.random() < mix else k
            toks.append(vocab[kk][rng.choice(words_per_topic, p=w)])
        docs.append(Document(f"d{d}", tuple(toks)))
        mains.append(k)
    corpus = build_corpus(docs)
    truth = np.zeros((n_topics, len(corpus.vocabulary)))
    for k in range(n_topics):
        for i, word in enumerate(vocab[k]):
            if word in corpus.vocabulary:
                truth[k, corpus.vocabulary[word]] = w[i]
    return corpus, truth, mains


def umass_oracle(ranked_words, doc_sets) -> float:
    """UMass coherence by direct enumeration over document sets."""
    total = 0.0
    for m in range(1, len(ranked_words)):
        for l in range(m):
            wm, wl = ranked_words[m], ranked_words[l]
            both = sum(1 for s in doc_sets if wm in s and wl in s)
            single = max(1, sum(1 for s in doc_sets if wl in s))
            total += math.log((both + 1) / single)
    return total


def best_matching_overlap(fitted: np.ndarray, truth: np.ndarray, n: int = 5) -> list[int]:
    """Top-``n`` word overlap per true topic under the best one-to-one matching."""
    from itertools import permutations

    top_f = [set(np.argsort(-r, kind="stable")[:n]) for r in fitted]
    top_t = [set(np.argsort(-r, kind="stable")[:n]) for r in truth]
    best = None
    for perm in permutations(range(len(top_f)), len(top_t)):
        ov = [len(top_t[k] & top_f[perm[k]]) for k in range(len(top_t))]
        if best is None or sum(ov) > sum(best):
            best = ov
    return best


# ---------------------------------------------------------------------------
# metric oracles


def _grams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def bleu_oracle(cand, ref, max_n=4) -> float:
    """BLEU with add-one smoothing on zero-match orders, by list scanning."""
    from fractions import Fraction

    if not cand:
        return 0.0
    logs = 0.0
    for n in range(1, max_n + 1):
        cg, pool = _grams(cand, n), _grams(ref, n)
        matched = 0
        for g in cg:
            if g in pool:
                pool.remove(g)
                matched += 1
        p = Fraction(matched, len(cg)) if matched else Fraction(1, len(cg) + 1)
        logs += math.log(p) / max_n
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * math.exp(logs)


def lcs_oracle(a, b) -> int:
    """LCS by exhaustive search over subsequences of the shorter input."""
    from itertools import combinations

    short, long_ = (a, b) if len(a) <= len(b) else (b, a)

    def is_subseq(sub, seq):
        it = iter(seq)
        return all(x in it for x in sub)

    for k in range(len(short), 0, -1):
        for idx in combinations(range(len(short)), k):
            if is_subseq([short[i] for i in idx], long_):
                return k
    return 0


def prf_oracle(match, nc, nr):
    if nc == 0 or nr == 0:
        return (0.0, 0.0, 0.0)
    p, r = match / nc, match / nr
    return (p, r, 0.0 if match == 0 else 2 * p * r / (p + r))


def rouge1_oracle(cand, ref):
    pool = list(ref)
    match = 0
    for t in cand:
        if t in pool:
            pool.remove(t)
            match += 1
    return prf_oracle(match, len(cand), len(ref))


def rougeL_oracle(cand, ref):
    return prf_oracle(lcs_oracle(cand, ref), len(cand), len(ref))


# 25 (candidate, reference, hand values) cases.  Hand values, where given,
# are worked out on paper and double as a check on the oracles.
_CAT_BLEU = math.exp(1 - 6 / 5) * (1 * (3 / 4) * (2 / 3) * (1 / 2)) ** 0.25
METRIC_CASES = [
    ("a b c", "a b d", {"r1": 2 / 3}),
    ("a b c d", "a c b d", {"rl": 3 / 4}),
    ("the cat sat on mat", "the cat sat on the mat", {"bleu": _CAT_BLEU}),
    ("the quick brown fox jumps", "the quick brown fox jumps", {"bleu": 1.0, "r1": 1.0, "rl": 1.0}),
    ("", "a b c", {"bleu": 0.0, "r1": 0.0, "rl": 0.0}),
    ("a b c", "", {"r1": 0.0, "rl": 0.0}),
    ("x y z w", "a b c d", {"r1": 0.0, "rl": 0.0, "bleu": (1 / 5 * 1 / 4 * 1 / 3 * 1 / 2) ** 0.25}),
    ("a a a a", "a b c d", {"r1": 1 / 4}),
    ("a b", "a b c d e f", {"r1": 2 / (1 + 3)}),
    ("the the the", "the cat", {}),
    ("a b c d e f g h", "h g f e d c b a", {"rl": 1 / 8}),
    ("my bill is wrong again", "my bill is wrong", {}),
    ("please reset my router now please", "reset the router please", {}),
    ("one two three four five six", "one two three four five six seven eight", {}),
    ("a b a b a b", "b a b a", {}),
    ("internet outage in my area", "is there an internet outage in my area", {}),
    ("refund", "refund the charge", {}),
    ("i was charged twice for the same order", "charged twice for order", {}),
    ("can you help me", "can you help me", {"bleu": 1.0}),
    ("x a b c d y", "a b c d", {}),
    ("a b c d", "x a b c d y", {}),
    ("cat dog cat dog cat", "dog cat dog", {}),
    ("the service was slow but the agent was kind", "the agent was kind but the service was slow", {}),
    ("alpha beta gamma delta epsilon zeta", "alpha gamma epsilon", {}),
    ("q r s t u v w", "q r s t u v w x y z", {}),
]


# acceptance outcomes, printed in the terminal summary
ACCEPTANCE: list[str] = []


def report(criterion: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {criterion} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
