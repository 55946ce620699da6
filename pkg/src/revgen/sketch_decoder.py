"""Aspect-conditioned sketch sequence decoding.

Every GRU input is the element-wise product of the previous sketch
symbol's embedding and the current sentence's aspect embedding, so the
aspect modulates each time step multiplicatively.  The first sentence's
state starts at the encoded context vector; each following sentence
starts from the previous sketch's final hidden state, which carries the
review's flow across sentences.  The output layer adds a separate
aspect projection on top of the attention-blended state.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import affine2, dropout, mul, tanh
from .beams import beam_search, log_softmax_np
from .errors import UsageError
from .sketcher import SK_END_ID, SK_START_ID
from .substrate import ContextAttention, StackedGru, init_matrix


class SketchDecoder:
    def __init__(self, vocab_size, d_sketch, d_hidden, d_emb, num_layers,
                 rng, dtype=np.float64):
        self.vocab_size = vocab_size
        self.d_sketch = d_sketch
        self.d_hidden = d_hidden
        self.dtype = dtype
        self.params = {"sketch.emb":
                       init_matrix(rng, (vocab_size, d_sketch), dtype)}
        self.gru = StackedGru("sketch.gru", d_sketch, d_hidden, num_layers,
                              rng, dtype)
        self.attn = ContextAttention("sketch.attn", d_hidden, d_emb, rng,
                                     dtype)
        self.params.update(self.gru.params)
        self.params.update(self.attn.params)
        self.params["sketch.W_2"] = init_matrix(rng, (d_hidden, d_emb), dtype)
        self.params["sketch.W_3"] = init_matrix(rng, (d_hidden, d_hidden),
                                                dtype)
        self.params["sketch.W_5"] = init_matrix(rng, (vocab_size, d_hidden),
                                                dtype)
        self.params["sketch.W_6"] = init_matrix(rng, (vocab_size, d_sketch),
                                                dtype)
        self.params["sketch.b_2"] = ad.param(np.zeros(vocab_size,
                                                      dtype=dtype))

    def symbol_embedding(self, symbol_id):
        return ad.lookup_row(self.params["sketch.emb"], symbol_id)

    def initial_state(self, ctx):
        states = self.gru.zero_state()
        states[0] = ctx.v_c
        return states

    def step(self, hs, prev_id, v_aspect, ctx, drop=None):
        """One step; the GRU input is emb(prev) * v_aspect (Eq. fusion)."""
        x = mul(self.symbol_embedding(prev_id), v_aspect)
        hs, top = self.gru.step(hs, x, drop=drop)
        _, mixed = self.attn.attend(top, ctx.embeddings)
        h_tilde = tanh(affine2(self.params["sketch.W_2"], mixed,
                               self.params["sketch.W_3"], top))
        if drop is not None:
            h_tilde = dropout(h_tilde, drop[0], drop[1])
        logits = affine2(self.params["sketch.W_5"], h_tilde,
                         self.params["sketch.W_6"], v_aspect,
                         self.params["sketch.b_2"])
        return hs, logits

    def sequence_loss(self, ctx, aspect_embeddings, sketches, drop=None,
                      state_trace=None):
        """Teacher-forced mean NLL over all sentences of one review.

        ``aspect_embeddings`` and ``sketches`` (symbol-id lists) run in
        parallel; hidden state chains across sentences.  Passing a list
        as ``state_trace`` records each sentence's initial state for
        instrumentation.
        """
        if len(aspect_embeddings) != len(sketches):
            raise UsageError(f"{len(aspect_embeddings)} aspects vs "
                             f"{len(sketches)} sketches")
        if not sketches:
            raise UsageError("empty sketch sequence")
        hs = self.initial_state(ctx)
        losses = []
        for v_a, symbols in zip(aspect_embeddings, sketches):
            if state_trace is not None:
                state_trace.append([h.data.copy() for h in hs])
            inputs = [SK_START_ID] + list(symbols)
            targets = list(symbols) + [SK_END_ID]
            for prev, tgt in zip(inputs, targets):
                hs, logits = self.step(hs, prev, v_a, ctx, drop=drop)
                loss, _ = ad.xent_logits(logits, tgt)
                losses.append(loss)
        return ad.scale(ad.sum_tensors(losses), 1.0 / len(losses))

    def generate(self, ctx, aspect_embeddings, beam=4, max_len=50):
        """One sketch per aspect, chaining the top beam's final state.

        Returns one best Hypothesis (tokens = symbol ids, score, ended)
        per aspect.
        """
        best_hyps = []
        with ad.no_grad():
            hs = self.initial_state(ctx)
            for v_a in aspect_embeddings:
                def step_fn(states, prev_id, _va=v_a):
                    new_hs, logits = self.step(states, prev_id, _va, ctx)
                    return new_hs, log_softmax_np(logits.data)

                hyps = beam_search(hs, SK_START_ID, step_fn,
                                   end_id=SK_END_ID, max_len=max_len,
                                   width=beam, forbid=(SK_START_ID,),
                                   finalize_states=True)
                best = hyps[0]
                best_hyps.append(best)
                hs = best.states
        return best_hyps
