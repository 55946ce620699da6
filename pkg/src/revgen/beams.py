"""Beam search over single-step decoder functions.

No length normalization is applied (scores are sums of log
probabilities); completed hypotheses are collected in a pool that is
never pruned, and hypotheses still alive at ``max_len`` complete
as-is.  ``width=1`` therefore reduces to a greedy rollout.
"""

from dataclasses import dataclass, field

import numpy as np


def log_softmax_np(logits):
    z = logits - logits.max()
    return z - np.log(np.exp(z).sum())


@dataclass
class Hypothesis:
    tokens: list
    score: float
    # states trail the hypothesis by one token: they have consumed
    # everything up to (not including) tokens[-1]
    states: list = field(repr=False, default=None)
    ended: bool = False


def beam_search(initial_states, start_id, step_fn, end_id, max_len, width,
                forbid=(), finalize_states=False):
    """Expand ``step_fn(states, prev_id) -> (states, log_probs)``.

    Returns completed hypotheses sorted by total log-prob (best
    first).  ``forbid`` class ids are never selected.  Hypotheses that
    end via ``end_id`` carry the states that consumed their full token
    sequence; with ``finalize_states`` the same holds for hypotheses
    cut off at ``max_len`` (one extra step is spent consuming their
    last token), which cross-sentence state chaining relies on.
    """
    if width < 1:
        raise ValueError("beam width must be >= 1")
    live = [Hypothesis([], 0.0, initial_states)]
    done = []
    forbid = tuple(forbid)
    for _ in range(max_len):
        candidates = []
        for hyp in live:
            prev = hyp.tokens[-1] if hyp.tokens else start_id
            states, logp = step_fn(hyp.states, prev)
            if forbid:
                logp = logp.copy()
                logp[list(forbid)] = -np.inf
            top = np.argsort(-logp)[:width + 1]
            for token in top:
                if logp[token] == -np.inf:
                    continue
                candidates.append(Hypothesis(hyp.tokens + [int(token)],
                                             hyp.score + float(logp[token]),
                                             states))
        candidates.sort(key=lambda h: -h.score)
        live = []
        for cand in candidates:
            if end_id is not None and cand.tokens[-1] == end_id:
                done.append(Hypothesis(cand.tokens[:-1], cand.score,
                                       cand.states, ended=True))
            elif len(live) < width:
                live.append(cand)
        if not live:
            break
    for hyp in live:
        if finalize_states and hyp.tokens:
            hyp.states, _ = step_fn(hyp.states, hyp.tokens[-1])
        done.append(hyp)
    done.sort(key=lambda h: -h.score)
    return done
