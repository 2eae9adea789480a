"""Autoregressive sequence-model slot: a trainable smoothed n-gram
reference model and the wire contract for external LLM backends.

Any model exposing generate(prompt, max_new, seed, temperature) over
merged-vocabulary ids satisfies the engine's needs. By construction the
end token is always the last vocabulary id.
"""

from __future__ import annotations

import struct
import threading
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import requests

from .errors import (BackendTimeout, BackendUnreachable, EmptyCorpus,
                     InvalidBackendOutput, IoFailure)

NGRAM_MAGIC = b"PFNGRAM\x00"
NGRAM_VERSION = 1
DEFAULT_ORDER = 3
DEFAULT_ALPHA = 0.4


@dataclass
class NGramModel:
    """Stupid-backoff n-gram model with add-one smoothing at the unigram level."""

    order: int
    vocab_size: int
    alpha: float = DEFAULT_ALPHA
    counts: dict = field(default_factory=dict, repr=False)
    _dist_cache: dict = field(default_factory=dict, repr=False, compare=False)
    _unigram: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def end_id(self) -> int:
        return self.vocab_size - 1

    def _unigram_dist(self) -> np.ndarray:
        if self._unigram is None:
            vec = np.ones(self.vocab_size)
            for token, c in self.counts.get((), {}).items():
                vec[token] += c
            self._unigram = vec / vec.sum()
        return self._unigram

    def _scores(self, context: tuple) -> np.ndarray:
        if not context:
            return self._unigram_dist()
        lower = self._scores(context[1:])
        counter = self.counts.get(context)
        if not counter:
            return self.alpha * lower
        out = self.alpha * lower
        total = sum(counter.values())
        for token, c in counter.items():
            out[token] = c / total
        return out

    def distribution(self, context) -> np.ndarray:
        """Normalized next-token distribution given the trailing context."""
        key = tuple(int(t) for t in context[-(self.order - 1):]) if self.order > 1 else ()
        cached = self._dist_cache.get(key)
        if cached is None:
            scores = self._scores(key)
            cached = scores / scores.sum()
            self._dist_cache[key] = cached
        return cached

    def log_prob(self, context, next_id: int) -> float:
        return float(np.log(self.distribution(context)[next_id]))

    def generate(self, prompt, max_new: int, seed: int,
                 temperature: float = 0.0) -> list[int]:
        """Ancestral sampling; temperature 0 is argmax with lowest-id ties.

        Stops after the end token or max_new ids, returning only the
        newly generated ids (end token included when emitted).
        """
        rng = np.random.default_rng(seed)
        context = list(prompt)
        out = []
        for _ in range(max_new):
            dist = self.distribution(context)
            if temperature == 0.0:
                next_id = int(dist.argmax())
            else:
                p = dist ** (1.0 / temperature)
                p /= p.sum()
                next_id = int(rng.choice(self.vocab_size, p=p))
            out.append(next_id)
            context.append(next_id)
            if next_id == self.end_id:
                break
        return out

    def save(self, path) -> None:
        entries = []
        for context, counter in self.counts.items():
            for token, c in counter.items():
                entries.append((len(context), tuple(context), token, c))
        entries.sort()
        try:
            with open(path, "wb") as fh:
                fh.write(NGRAM_MAGIC)
                fh.write(struct.pack("<IIIdQ", NGRAM_VERSION, self.order,
                                     self.vocab_size, self.alpha, len(entries)))
                for ctx_len, context, token, c in entries:
                    fh.write(struct.pack(f"<B{ctx_len}IIQ", ctx_len, *context, token, c))
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "NGramModel":
        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        if data[:8] != NGRAM_MAGIC:
            raise ValueError(f"{path}: not an n-gram model file")
        version, order, vocab_size, alpha, n_entries = struct.unpack_from("<IIIdQ", data, 8)
        if version != NGRAM_VERSION:
            raise ValueError(f"{path}: unsupported model version {version}")
        counts: dict = {}
        offset = 8 + struct.calcsize("<IIIdQ")
        for _ in range(n_entries):
            (ctx_len,) = struct.unpack_from("<B", data, offset)
            offset += 1
            *context, token, c = struct.unpack_from(f"<{ctx_len}IIQ", data, offset)
            offset += struct.calcsize(f"<{ctx_len}IIQ")
            counts.setdefault(tuple(context), Counter())[token] = c
        return cls(order=order, vocab_size=vocab_size, alpha=alpha, counts=counts)


def train(corpus: list[list[int]], vocab_size: int, order: int = DEFAULT_ORDER,
          alpha: float = DEFAULT_ALPHA) -> NGramModel:
    """Accumulate counts for every context length 0..order-1."""
    if not corpus:
        raise EmptyCorpus("n-gram training needs a non-empty corpus")
    counts: dict = {}
    for seq in corpus:
        if len(seq) < order:
            raise ValueError(f"sequence of length {len(seq)} shorter than order {order}")
        seq = [int(t) for t in seq]
        for pos, token in enumerate(seq):
            for ctx_len in range(min(pos, order - 1) + 1):
                context = tuple(seq[pos - ctx_len:pos])
                counts.setdefault(context, Counter())[token] += 1
    return NGramModel(order=order, vocab_size=vocab_size, alpha=alpha, counts=counts)


def perplexity(model, corpus: list[list[int]]) -> float:
    """exp(-mean log prob) over all transitions with at least one context token."""
    if not corpus:
        raise EmptyCorpus("perplexity needs a non-empty corpus")
    log_probs = []
    for seq in corpus:
        for pos in range(1, len(seq)):
            log_probs.append(model.log_prob(seq[:pos], seq[pos]))
    if not log_probs:
        raise EmptyCorpus("corpus has no transitions")
    return float(np.exp(-np.mean(log_probs)))


def external_generate(endpoint: str, prompt, max_new: int, seed: int,
                      timeout: float = 30.0, vocab_size: int | None = None) -> list[int]:
    """POST /generate on the backend and validate the returned ids."""
    url = endpoint.rstrip("/") + "/generate"
    payload = {"prompt_ids": [int(t) for t in prompt], "max_new": int(max_new),
               "seed": int(seed)}
    try:
        response = requests.post(url, json=payload, timeout=timeout)
    except requests.exceptions.Timeout as exc:
        raise BackendTimeout(f"{url}: no reply within {timeout} s") from exc
    except requests.exceptions.RequestException as exc:
        raise BackendUnreachable(f"{url}: {exc}") from exc
    if response.status_code != 200:
        raise InvalidBackendOutput(f"{url}: status {response.status_code}")
    try:
        ids = response.json()["ids"]
    except (ValueError, KeyError, TypeError) as exc:
        raise InvalidBackendOutput(f"{url}: malformed response body") from exc
    if not isinstance(ids, list) or not all(isinstance(t, int) for t in ids):
        raise InvalidBackendOutput(f"{url}: ids must be a list of integers")
    if vocab_size is not None and any(not 0 <= t < vocab_size for t in ids):
        raise InvalidBackendOutput(f"{url}: id outside vocabulary of size {vocab_size}")
    return ids


class ExternalBackend:
    """SequenceModel adapter over the HTTP wire contract.

    In-flight requests are bounded by pool_size; excess callers queue.
    """

    def __init__(self, endpoint: str, vocab_size: int, timeout: float = 30.0,
                 pool_size: int = 8):
        self.endpoint = endpoint
        self.vocab_size = vocab_size
        self.timeout = timeout
        self._slots = threading.Semaphore(pool_size)

    def generate(self, prompt, max_new: int, seed: int,
                 temperature: float = 0.0) -> list[int]:
        # temperature is the backend's concern; the wire carries the seed
        with self._slots:
            return external_generate(self.endpoint, prompt, max_new, seed,
                                     timeout=self.timeout, vocab_size=self.vocab_size)

    def log_prob(self, context, next_id: int) -> float:
        raise NotImplementedError("external backends do not expose log probabilities")
