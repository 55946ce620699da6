"""Sentence-level topic model over review corpora.

Each review is a document; every sentence carries exactly one aspect
label and every token a background/topic switch, so aspect word
distributions stay purified of corpus-wide filler.  Inference is
collapsed Gibbs sampling with symmetric priors; the returned aspect
word distributions and background distribution are posterior means
averaged over thinned post-burn-in sweeps.
"""

import struct
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .corpus import RESERVED
from .errors import DataError, UsageError
from .gibbs_kernels import get_sweep
from .rng import pcg_stream

MODEL_MAGIC = b"RVGA"
MODEL_VERSION = 1

AspectAssignment = namedtuple("AspectAssignment", ["aspect", "oov_fallback"])


@dataclass
class SamplerState:
    """Final-sweep assignments and count tables, kept for inspection."""
    tokens: np.ndarray
    sent_ptr: np.ndarray
    sent_doc: np.ndarray
    z_sent: np.ndarray
    x_bg: np.ndarray
    n_da: np.ndarray
    n_aw: np.ndarray
    n_a: np.ndarray
    n_bw: np.ndarray
    n_switch: np.ndarray


@dataclass
class AspectModel:
    A: int
    vocab_size: int
    theta: np.ndarray            # A x |V| aspect word probabilities
    background: np.ndarray       # |V| background word probabilities
    p_bg: float                  # posterior mean of the background switch
    doc_alpha: float
    word_beta: float
    switch_gamma: float
    aspect_sentence_counts: np.ndarray   # sentences per aspect, final sweep
    backend: str = "numba"
    sampler_state: SamplerState = field(default=None, repr=False)


def _flatten(reviews):
    """Corpus -> (tokens, sent_ptr, sent_doc); empty sentences dropped."""
    tokens = []
    ptr = [0]
    sent_doc = []
    for d, rv in enumerate(reviews):
        for sent in rv.sentences:
            if not sent:
                continue
            tokens.extend(sent)
            ptr.append(len(tokens))
            sent_doc.append(d)
    return (np.asarray(tokens, dtype=np.int64),
            np.asarray(ptr, dtype=np.int64),
            np.asarray(sent_doc, dtype=np.int64))


def check_count_conservation(state, n_docs):
    """Raise if the count tables drifted from the assignments."""
    n_sent = state.sent_ptr.shape[0] - 1
    n_tok = state.tokens.shape[0]
    if int(state.n_da.sum()) != n_sent:
        raise AssertionError("doc-aspect counts do not sum to #sentences")
    if int(state.n_aw.sum() + state.n_bw.sum()) != n_tok:
        raise AssertionError("aspect-word + background counts != #tokens")
    if int(state.n_switch.sum()) != n_tok:
        raise AssertionError("switch counts != #tokens")
    if (state.n_da < 0).any() or (state.n_aw < 0).any() \
            or (state.n_bw < 0).any():
        raise AssertionError("negative count")


def fit_gibbs(reviews, A, vocab_size, iterations=200, burn_in=100,
              seed=0, thin=10, doc_alpha=None, word_beta=0.01,
              switch_gamma=20.0, check_invariants=False):
    """Train the topic model by collapsed Gibbs sampling.

    ``doc_alpha`` defaults to 50/A.  Posterior means are accumulated
    every ``thin``-th sweep once ``burn_in`` sweeps have passed.
    Deterministic for a given (corpus, A, iterations, seed): all
    randomness is drawn up front per sweep from one PCG64 stream.
    """
    if A < 1:
        raise UsageError(f"aspect count must be >= 1, got {A}")
    if not iterations > burn_in >= 0:
        raise UsageError("need iterations > burn_in >= 0")
    tokens, sent_ptr, sent_doc = _flatten(reviews)
    n_sent = sent_ptr.shape[0] - 1
    n_tok = tokens.shape[0]
    if n_sent == 0:
        raise DataError("corpus has no sentences")
    if doc_alpha is None:
        doc_alpha = 50.0 / A
    n_docs = int(sent_doc.max()) + 1 if n_sent else 0

    rng = pcg_stream(seed, "gibbs")
    z_sent = np.minimum((rng.random(n_sent) * A).astype(np.int64), A - 1)
    x_bg = (rng.random(n_tok) < 0.5).astype(np.int64)

    n_da = np.zeros((n_docs, A), dtype=np.int64)
    n_aw = np.zeros((A, vocab_size), dtype=np.int64)
    n_a = np.zeros(A, dtype=np.int64)
    n_bw = np.zeros(vocab_size, dtype=np.int64)
    n_switch = np.zeros(2, dtype=np.int64)
    np.add.at(n_da, (sent_doc, z_sent), 1)
    token_aspect = np.repeat(z_sent, np.diff(sent_ptr))
    topic_mask = x_bg == 0
    np.add.at(n_aw, (token_aspect[topic_mask], tokens[topic_mask]), 1)
    np.add.at(n_a, token_aspect[topic_mask], 1)
    np.add.at(n_bw, tokens[~topic_mask], 1)
    n_switch[0] = topic_mask.sum()
    n_switch[1] = n_tok - n_switch[0]

    sweep, backend = get_sweep()
    vbeta = vocab_size * word_beta
    theta_acc = np.zeros((A, vocab_size))
    bg_acc = np.zeros(vocab_size)
    pbg_acc = 0.0
    n_samples = 0
    state = SamplerState(tokens, sent_ptr, sent_doc, z_sent, x_bg,
                         n_da, n_aw, n_a, n_bw, n_switch)
    for it in range(iterations):
        uniforms = rng.random(n_sent + n_tok)
        sweep(tokens, sent_ptr, sent_doc, z_sent, x_bg,
              n_da, n_aw, n_a, n_bw, n_switch,
              doc_alpha, word_beta, switch_gamma, uniforms)
        if check_invariants:
            check_count_conservation(state, n_docs)
        if it >= burn_in and (it - burn_in) % thin == 0:
            theta_acc += (n_aw + word_beta) / (n_a + vbeta)[:, None]
            bg_acc += (n_bw + word_beta) / (n_switch[1] + vbeta)
            pbg_acc += (n_switch[1] + switch_gamma) / (n_tok + 2 * switch_gamma)
            n_samples += 1

    theta = theta_acc / n_samples
    background = bg_acc / n_samples
    counts = np.bincount(z_sent, minlength=A).astype(np.int64)
    return AspectModel(A=A, vocab_size=vocab_size, theta=theta,
                       background=background, p_bg=pbg_acc / n_samples,
                       doc_alpha=doc_alpha, word_beta=word_beta,
                       switch_gamma=switch_gamma,
                       aspect_sentence_counts=counts, backend=backend,
                       sampler_state=state)


def sentence_log_likelihoods(model, tokens):
    """Per-aspect total log likelihood of the mixture for one sentence."""
    toks = np.asarray(tokens, dtype=np.int64)
    mix = (1.0 - model.p_bg) * model.theta[:, toks] \
        + model.p_bg * model.background[toks]
    return np.log(mix).sum(axis=1)


def assign_aspect(model, tokens):
    """Tag one sentence with its maximum-posterior aspect.

    Scoring uses a uniform aspect prior; OOV and reserved tokens are
    skipped.  If nothing is scorable the globally most frequent aspect
    is returned with ``oov_fallback=True``.  Ties break toward the
    lowest aspect id.
    """
    if len(tokens) == 0:
        raise UsageError("cannot tag an empty sentence")
    scorable = [t for t in tokens if t >= len(RESERVED)]
    if not scorable:
        return AspectAssignment(int(np.argmax(model.aspect_sentence_counts)),
                                True)
    scores = sentence_log_likelihoods(model, scorable)
    return AspectAssignment(int(np.argmax(scores)), False)


def top_words(model, aspect, k):
    """The k highest-probability word indices of an aspect.

    Ordering is probability descending with ties broken by ascending
    word index; k larger than the vocabulary truncates.
    """
    if not 0 <= aspect < model.A:
        raise UsageError(f"aspect {aspect} out of range [0, {model.A})")
    if k < 1:
        raise UsageError("k must be >= 1")
    row = model.theta[aspect]
    order = np.lexsort((np.arange(row.shape[0]), -row))
    return [int(i) for i in order[:k]]


def heldout_perplexity(model, reviews):
    """Per-token perplexity under the background/aspect mixture.

    Every sentence is first tagged with its max-posterior aspect, then
    each token is scored under the (background, tagged-aspect) mixture;
    the result is exp of the mean negative log likelihood.
    """
    total_ll = 0.0
    total_tok = 0
    for rv in reviews:
        for sent in rv.sentences:
            if not sent:
                continue
            a = assign_aspect(model, sent).aspect
            toks = np.asarray(sent, dtype=np.int64)
            mix = (1.0 - model.p_bg) * model.theta[a, toks] \
                + model.p_bg * model.background[toks]
            total_ll += float(np.log(mix).sum())
            total_tok += len(sent)
    if total_tok == 0:
        raise DataError("empty corpus")
    return float(np.exp(-total_ll / total_tok))


def save_model(model, path):
    """Versioned binary dump: header, theta rows, background row."""
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<IIQ", MODEL_VERSION, model.A,
                             model.vocab_size))
        fh.write(struct.pack("<dddd", model.doc_alpha, model.word_beta,
                             model.switch_gamma, model.p_bg))
        fh.write(model.aspect_sentence_counts.astype("<i8").tobytes())
        fh.write(model.theta.astype("<f8").tobytes())
        fh.write(model.background.astype("<f8").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MODEL_MAGIC:
            raise DataError(f"not an aspect model file: {path}")
        version, A, V = struct.unpack("<IIQ", fh.read(16))
        if version != MODEL_VERSION:
            raise DataError(f"unsupported aspect model version {version}")
        alpha, beta, gamma, p_bg = struct.unpack("<dddd", fh.read(32))
        counts = np.frombuffer(fh.read(8 * A), dtype="<i8").copy()
        theta = np.frombuffer(fh.read(8 * A * V), dtype="<f8")
        theta = theta.reshape(A, V).copy()
        background = np.frombuffer(fh.read(8 * V), dtype="<f8").copy()
        if theta.size != A * V or background.size != V:
            raise DataError(f"truncated aspect model file: {path}")
    return AspectModel(A=A, vocab_size=V, theta=theta, background=background,
                       p_bg=p_bg, doc_alpha=alpha, word_beta=beta,
                       switch_gamma=gamma, aspect_sentence_counts=counts)


def top_words_report(model, vocab, k=50):
    """Plain-text report of the top-k words per aspect."""
    lines = []
    for a in range(model.A):
        lines.append(f"aspect {a}")
        for idx in top_words(model, a, k):
            lines.append(f"  {vocab.word(idx)}\t{model.theta[a, idx]:.6f}")
    return "\n".join(lines) + "\n"
