"""Sketch-conditioned word decoding with aspect-boosted softmax.

The sketch is first encoded with a bidirectional GRU (both directions
concatenated and projected back down), giving one vector per slot.
Each word step consumes [slot vector ; previous word embedding], blends
the GRU state with context attention, and produces an intermediate
vocabulary-sized vector z = tanh(W7 [state ; slot symbol embedding]).
The final distribution is softmax(z + lambda * theta[aspect]) so words
that rank high in the sentence's aspect get a bounded additive boost.

N-gram slots cover several word positions; the sketch is expanded so
every covered position carries its covering slot's vector and symbol.
At inference, word and n-gram slots force-copy their surfaces (log-prob
contribution 0 by convention) and beam search only fills POS slots.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import add_const, affine, affine2, concat, dropout, tanh
from .beams import Hypothesis, log_softmax_np
from .corpus import RESERVED, START_ID
from .errors import DataError, UsageError
from .sketcher import SK_END_ID
from .substrate import ContextAttention, StackedGru, init_matrix


class ReviewDecoder:
    def __init__(self, vocab_size, sketch_vocab_size, d_word, d_hidden,
                 d_sketch, d_sketch_hidden, d_emb, num_layers, rng,
                 boost_table=None, boost_lambda=1.0, dtype=np.float64):
        self.vocab_size = vocab_size
        self.end_class = vocab_size           # END is the extra class
        self.n_classes = vocab_size + 1
        self.d_word = d_word
        self.d_hidden = d_hidden
        self.d_sketch_hidden = d_sketch_hidden
        self.boost_lambda = boost_lambda
        self.dtype = dtype
        self.set_boost_table(boost_table)

        self.params = {"review.emb":
                       init_matrix(rng, (vocab_size, d_word), dtype)}
        self.enc_fwd = StackedGru("review.enc_fwd", d_sketch,
                                  d_sketch_hidden, 1, rng, dtype)
        self.enc_bwd = StackedGru("review.enc_bwd", d_sketch,
                                  d_sketch_hidden, 1, rng, dtype)
        self.params.update(self.enc_fwd.params)
        self.params.update(self.enc_bwd.params)
        self.params["review.W_enc"] = init_matrix(
            rng, (d_sketch_hidden, 2 * d_sketch_hidden), dtype)
        self.gru = StackedGru("review.gru", d_sketch_hidden + d_word,
                              d_hidden, num_layers, rng, dtype)
        self.attn = ContextAttention("review.attn", d_hidden, d_emb, rng,
                                     dtype)
        self.params.update(self.gru.params)
        self.params.update(self.attn.params)
        self.params["review.W_2"] = init_matrix(rng, (d_hidden, d_emb), dtype)
        self.params["review.W_3"] = init_matrix(rng, (d_hidden, d_hidden),
                                                dtype)
        self.params["review.W_7"] = init_matrix(
            rng, (self.n_classes, d_hidden + d_sketch), dtype)
        self.params["review.b_3"] = ad.param(np.zeros(self.n_classes,
                                                      dtype=dtype))

    def set_boost_table(self, boost_table):
        """Freeze aspect word probabilities (A x |V|) for the boost."""
        if boost_table is None:
            self.boost_table = None
            return
        boost_table = np.asarray(boost_table, dtype=self.dtype)
        if boost_table.shape[1] != self.vocab_size:
            raise DataError(f"boost table has {boost_table.shape[1]} "
                            f"columns, vocabulary has {self.vocab_size}")
        self.boost_table = boost_table

    def boost_row(self, aspect_id):
        """lambda * theta[aspect] padded with 0 for the END class."""
        row = np.zeros(self.n_classes, dtype=self.dtype)
        if self.boost_table is not None and aspect_id is not None:
            row[:self.vocab_size] = self.boost_lambda \
                * self.boost_table[aspect_id]
        return row

    def encode_sketch(self, symbol_ids, sketch_emb, drop=None):
        """Bi-GRU over sketch symbols -> one projected vector per slot."""
        if not symbol_ids:
            raise UsageError("cannot encode an empty sketch")
        embs = [ad.lookup_row(sketch_emb, s) for s in symbol_ids]
        fwd_states = []
        hs = self.enc_fwd.zero_state()
        for e in embs:
            hs, top = self.enc_fwd.step(hs, e, drop=drop)
            fwd_states.append(top)
        bwd_states = [None] * len(embs)
        hs = self.enc_bwd.zero_state()
        for t in range(len(embs) - 1, -1, -1):
            hs, top = self.enc_bwd.step(hs, embs[t], drop=drop)
            bwd_states[t] = top
        w_enc = self.params["review.W_enc"]
        return [affine(w_enc, concat([f, b]))
                for f, b in zip(fwd_states, bwd_states)]

    def initial_state(self, ctx):
        states = self.gru.zero_state()
        states[0] = ctx.v_c
        return states

    def step(self, hs, prev_word, slot_vec, slot_emb, boost, ctx, drop=None):
        """One word step; returns (new_states, z, boosted logits)."""
        x = concat([slot_vec, ad.lookup_row(self.params["review.emb"],
                                            prev_word)])
        hs, top = self.gru.step(hs, x, drop=drop)
        _, mixed = self.attn.attend(top, ctx.embeddings)
        h_tilde = tanh(affine2(self.params["review.W_2"], mixed,
                               self.params["review.W_3"], top))
        if drop is not None:
            h_tilde = dropout(h_tilde, drop[0], drop[1])
        z = tanh(affine(self.params["review.W_7"],
                        concat([h_tilde, slot_emb]),
                        self.params["review.b_3"]))
        logits = add_const(z, boost) if boost is not None else z
        return hs, z, logits

    def sentence_loss(self, ctx, sketch_ids, alignment, word_ids, aspect_id,
                      sketch_emb, drop=None):
        """Teacher-forced mean NLL over the words plus a final END step.

        The END step conditions on the appended sketch END symbol's
        encoder state and embedding.
        """
        if len(alignment) != len(word_ids):
            raise UsageError(f"alignment width {len(alignment)} != "
                             f"sentence length {len(word_ids)}")
        if not word_ids:
            raise UsageError("empty sentence")
        enc = self.encode_sketch(list(sketch_ids) + [SK_END_ID], sketch_emb,
                                 drop=drop)
        boost = self.boost_row(aspect_id)
        hs = self.initial_state(ctx)
        losses = []
        prev_words = [START_ID] + list(word_ids)
        slots = list(alignment) + [len(sketch_ids)]
        targets = list(word_ids) + [self.end_class]
        for prev, slot, tgt in zip(prev_words, slots, targets):
            sym = sketch_ids[slot] if slot < len(sketch_ids) else SK_END_ID
            hs, _, logits = self.step(hs, prev, enc[slot],
                                      ad.lookup_row(sketch_emb, sym),
                                      boost, ctx, drop=drop)
            loss, _ = ad.xent_logits(logits, tgt)
            losses.append(loss)
        return ad.scale(ad.sum_tensors(losses), 1.0 / len(losses))

    def sentence_loss_free(self, ctx, cond_vec, cond_emb, word_ids,
                           aspect_id, drop=None):
        """Sketch-free teacher forcing: a fixed conditioning vector
        stands in for the slot encoder state and slot embedding at
        every step (the no-sketch ablation)."""
        if not word_ids:
            raise UsageError("empty sentence")
        boost = self.boost_row(aspect_id)
        hs = self.initial_state(ctx)
        losses = []
        prev_words = [START_ID] + list(word_ids)
        targets = list(word_ids) + [self.end_class]
        for prev, tgt in zip(prev_words, targets):
            hs, _, logits = self.step(hs, prev, cond_vec, cond_emb, boost,
                                      ctx, drop=drop)
            loss, _ = ad.xent_logits(logits, tgt)
            losses.append(loss)
        return ad.scale(ad.sum_tensors(losses), 1.0 / len(losses))

    def generate_sentence_free(self, ctx, cond_vec, cond_emb, aspect_id,
                               beam=4, max_len=50):
        """Sketch-free generation: words until the END class fires."""
        from .beams import beam_search

        with ad.no_grad():
            boost = self.boost_row(aspect_id)

            def step_fn(states, prev_id):
                hs, _, logits = self.step(states, prev_id, cond_vec,
                                          cond_emb, boost, ctx)
                logp = log_softmax_np(logits.data)
                return hs, logp

            hyps = beam_search(self.initial_state(ctx), START_ID, step_fn,
                               end_id=self.end_class, max_len=max_len,
                               width=beam, forbid=tuple(range(len(RESERVED))))
            return hyps[0].tokens, hyps[0].score

    def generate_sentence(self, ctx, sketch_ids, positions, aspect_id,
                          sketch_emb, beam=4):
        """Fill an expanded slot plan; returns (word ids, score, forced).

        ``positions`` is the expanded plan: one (slot_index,
        forced_word_id_or_None) pair per output word position.  Word
        and n-gram slots arrive pre-encoded as forced vocabulary ids
        and contribute 0 log-prob; POS slots (forced id None) are
        selected by beam search over real words (reserved ids and the
        END class are masked).  The sentence ends when the slots are
        exhausted.
        """
        with ad.no_grad():
            enc = self.encode_sketch(list(sketch_ids) + [SK_END_ID],
                                     sketch_emb)
            boost = self.boost_row(aspect_id)
            hyps = [Hypothesis([], 0.0, self.initial_state(ctx))]
            n_forbid = len(RESERVED)
            for k, forced in positions:
                sym_emb = ad.lookup_row(sketch_emb, sketch_ids[k])
                new_hyps = []
                for hyp in hyps:
                    prev = hyp.tokens[-1] if hyp.tokens else START_ID
                    states, _, logits = self.step(hyp.states, prev, enc[k],
                                                  sym_emb, boost, ctx)
                    if forced is not None:
                        new_hyps.append(Hypothesis(hyp.tokens + [forced],
                                                   hyp.score, states))
                        continue
                    logp = log_softmax_np(logits.data)
                    logp[:n_forbid] = -np.inf
                    logp[self.end_class] = -np.inf
                    for wid in np.argsort(-logp)[:beam]:
                        if logp[wid] == -np.inf:
                            continue
                        new_hyps.append(
                            Hypothesis(hyp.tokens + [int(wid)],
                                       hyp.score + float(logp[wid]), states))
                new_hyps.sort(key=lambda h: -h.score)
                hyps = new_hyps[:beam]
            best = hyps[0]
            forced_mask = [forced is not None for _, forced in positions]
            return best.tokens, best.score, forced_mask
