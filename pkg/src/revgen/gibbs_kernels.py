"""Collapsed Gibbs sweep kernel for the sentence-level topic model.

The sweep is a sequential scalar loop (every sentence update depends on
the counts left by the previous one), which makes it the one genuinely
hot kernel in the package.  It is written once as a plain function and
compiled with numba's ``@njit`` on first use; setting the environment
variable ``REVGEN_NUMBA=0`` selects the uncompiled pure-Python path
instead (same code object, so both paths are bit-identical -- all
randomness comes from the pre-drawn ``uniforms`` array).

``benchmarks/bench_gibbs.py`` compares the two paths.
"""

import math
import os

import numpy as np

ENV_FLAG = "REVGEN_NUMBA"


def _sweep_impl(tokens, sent_ptr, sent_doc, z_sent, x_bg,
                n_da, n_aw, n_a, n_bw, n_switch,
                alpha, beta, gamma, uniforms):
    """One full Gibbs sweep, updating assignments and counts in place.

    Consumes exactly one uniform per sentence (aspect draw) plus one
    per token (background switch draw), in corpus order.

    Count tables: n_da (doc x aspect sentence counts), n_aw (aspect x
    word topic-token counts), n_a (aspect topic-token totals), n_bw
    (background word counts), n_switch ([topic_total, bg_total]).
    """
    A, V = n_aw.shape
    n_sent = sent_ptr.shape[0] - 1
    vbeta = V * beta
    u = 0
    lp = np.empty(A, dtype=np.float64)
    for s in range(n_sent):
        d = sent_doc[s]
        lo = sent_ptr[s]
        hi = sent_ptr[s + 1]
        a_old = z_sent[s]

        # detach this sentence's aspect-dependent counts
        n_da[d, a_old] -= 1
        n_topic = 0
        for t in range(lo, hi):
            if x_bg[t] == 0:
                w = tokens[t]
                n_aw[a_old, w] -= 1
                n_a[a_old] -= 1
                n_topic += 1

        # unique topic-flagged words of the sentence, with multiplicity
        m = hi - lo
        uw = np.empty(m, dtype=np.int64)
        uc = np.empty(m, dtype=np.int64)
        n_uniq = 0
        for t in range(lo, hi):
            if x_bg[t] == 0:
                w = tokens[t]
                found = False
                for k in range(n_uniq):
                    if uw[k] == w:
                        uc[k] += 1
                        found = True
                        break
                if not found:
                    uw[n_uniq] = w
                    uc[n_uniq] = 1
                    n_uniq += 1

        # log posterior over aspects (Polya terms handle repeats)
        for a in range(A):
            acc = math.log(n_da[d, a] + alpha)
            for k in range(n_uniq):
                base = n_aw[a, uw[k]] + beta
                for i in range(uc[k]):
                    acc += math.log(base + i)
            tot = n_a[a] + vbeta
            for i in range(n_topic):
                acc -= math.log(tot + i)
            lp[a] = acc

        mx = lp[0]
        for a in range(1, A):
            if lp[a] > mx:
                mx = lp[a]
        total = 0.0
        for a in range(A):
            lp[a] = math.exp(lp[a] - mx)
            total += lp[a]
        r = uniforms[u] * total
        u += 1
        a_new = A - 1
        cum = 0.0
        for a in range(A):
            cum += lp[a]
            if r < cum:
                a_new = a
                break
        z_sent[s] = a_new

        # reattach under the sampled aspect
        n_da[d, a_new] += 1
        for t in range(lo, hi):
            if x_bg[t] == 0:
                w = tokens[t]
                n_aw[a_new, w] += 1
                n_a[a_new] += 1

        # resample the background/topic switch of every token
        for t in range(lo, hi):
            w = tokens[t]
            if x_bg[t] == 1:
                n_bw[w] -= 1
                n_switch[1] -= 1
            else:
                n_aw[a_new, w] -= 1
                n_a[a_new] -= 1
                n_switch[0] -= 1
            p_top = (n_switch[0] + gamma) * (n_aw[a_new, w] + beta) \
                / (n_a[a_new] + vbeta)
            p_bg = (n_switch[1] + gamma) * (n_bw[w] + beta) \
                / (n_switch[1] + vbeta)
            r = uniforms[u] * (p_top + p_bg)
            u += 1
            if r < p_bg:
                x_bg[t] = 1
                n_bw[w] += 1
                n_switch[1] += 1
            else:
                x_bg[t] = 0
                n_aw[a_new, w] += 1
                n_a[a_new] += 1
                n_switch[0] += 1


_COMPILED = None


def numba_enabled():
    return os.environ.get(ENV_FLAG, "1") != "0"


def get_sweep():
    """Return (sweep_callable, backend_name) honoring REVGEN_NUMBA."""
    global _COMPILED
    if not numba_enabled():
        return _sweep_impl, "python"
    if _COMPILED is None:
        from numba import njit
        _COMPILED = njit(cache=True)(_sweep_impl)
    return _COMPILED, "numba"
