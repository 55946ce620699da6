"""Context encoding and aspect sequence decoding.

The context encoder embeds (user, item, rating) and squeezes the
concatenation through an MLP into a single vector that seeds every
decoder's recurrent state.  The aspect decoder is a stacked GRU over
aspect-label embeddings whose output state is blended with a three-way
attention over the raw context embeddings before the softmax over
aspect ids plus an END class.

Unknown user/item ids at inference fall back to a dedicated UNK
embedding row and are flagged in the result.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import affine, affine2, concat, dropout, tanh
from .beams import beam_search, log_softmax_np
from .errors import UsageError
from .substrate import ContextAttention, Mlp, StackedGru, init_matrix


class ContextBundle:
    """Encoded context: v_c plus the raw embeddings for attention."""

    __slots__ = ("v_c", "embeddings", "unk_user", "unk_item")

    def __init__(self, v_c, embeddings, unk_user, unk_item):
        self.v_c = v_c
        self.embeddings = embeddings
        self.unk_user = unk_user
        self.unk_item = unk_item

    @property
    def flagged(self):
        return self.unk_user or self.unk_item


class ContextEncoder:
    def __init__(self, n_users, n_items, n_ratings, d_emb, d_ctx, rng,
                 dtype=np.float64):
        self.n_users = n_users
        self.n_items = n_items
        self.n_ratings = n_ratings
        self.d_emb = d_emb
        self.d_ctx = d_ctx
        # one extra row per table = UNK fallback
        self.params = {
            "ctx.emb_user": init_matrix(rng, (n_users + 1, d_emb), dtype),
            "ctx.emb_item": init_matrix(rng, (n_items + 1, d_emb), dtype),
            "ctx.emb_rating": init_matrix(rng, (n_ratings, d_emb), dtype),
        }
        self.mlp = Mlp("ctx.mlp", 3 * d_emb, d_ctx, d_ctx, rng, dtype)
        self.params.update(self.mlp.params)

    def encode(self, user, item, rating):
        if not 0 <= rating < self.n_ratings:
            raise UsageError(f"rating index {rating} out of range "
                             f"[0, {self.n_ratings})")
        unk_user = not 0 <= user < self.n_users
        unk_item = not 0 <= item < self.n_items
        u_row = self.n_users if unk_user else user
        i_row = self.n_items if unk_item else item
        v_u = ad.lookup_row(self.params["ctx.emb_user"], u_row)
        v_i = ad.lookup_row(self.params["ctx.emb_item"], i_row)
        v_r = ad.lookup_row(self.params["ctx.emb_rating"], rating)
        v_c = self.mlp.forward(concat([v_u, v_i, v_r]))
        return ContextBundle(v_c, [v_u, v_i, v_r], unk_user, unk_item)


def encode_context(encoder, user, item, rating):
    return encoder.encode(user, item, rating)


class AspectDecoder:
    """GRU decoder over aspect labels; output classes = A aspects + END."""

    def __init__(self, n_aspects, d_aspect, d_hidden, d_emb, num_layers,
                 rng, dtype=np.float64):
        self.A = n_aspects
        self.d_aspect = d_aspect
        self.d_hidden = d_hidden
        self.start_id = n_aspects          # embedding row for START
        self.end_class = n_aspects         # softmax class for END
        self.n_classes = n_aspects + 1
        self.dtype = dtype
        # rows: aspects, START, END (END row kept for table symmetry)
        self.params = {"aspect.emb":
                       init_matrix(rng, (n_aspects + 2, d_aspect), dtype)}
        self.gru = StackedGru("aspect.gru", d_aspect, d_hidden, num_layers,
                              rng, dtype)
        self.attn = ContextAttention("aspect.attn", d_hidden, d_emb, rng,
                                     dtype)
        self.params.update(self.gru.params)
        self.params.update(self.attn.params)
        self.params["aspect.W_2"] = init_matrix(rng, (d_hidden, d_emb), dtype)
        self.params["aspect.W_3"] = init_matrix(rng, (d_hidden, d_hidden),
                                                dtype)
        self.params["aspect.W_4"] = init_matrix(rng,
                                                (self.n_classes, d_hidden),
                                                dtype)
        self.params["aspect.b_1"] = ad.param(np.zeros(self.n_classes,
                                                      dtype=dtype))

    def aspect_embedding(self, aspect_id):
        if not 0 <= aspect_id < self.A:
            raise UsageError(f"aspect id {aspect_id} out of range")
        return ad.lookup_row(self.params["aspect.emb"], aspect_id)

    def initial_state(self, ctx):
        """Layer 1 starts at v_c, upper layers at zero."""
        states = self.gru.zero_state()
        states[0] = ctx.v_c
        return states

    def step(self, hs, prev_id, ctx, drop=None):
        """One decode step; returns (new_states, h_tilde, logits)."""
        x = ad.lookup_row(self.params["aspect.emb"], prev_id)
        hs, top = self.gru.step(hs, x, drop=drop)
        _, mixed = self.attn.attend(top, ctx.embeddings)
        h_tilde = tanh(affine2(self.params["aspect.W_2"], mixed,
                               self.params["aspect.W_3"], top))
        if drop is not None:
            h_tilde = dropout(h_tilde, drop[0], drop[1])
        logits = affine(self.params["aspect.W_4"], h_tilde,
                        self.params["aspect.b_1"])
        return hs, h_tilde, logits

    def sequence_loss(self, ctx, aspects, drop=None):
        """Teacher-forced mean NLL over the sequence plus its END."""
        if not aspects:
            raise UsageError("empty aspect sequence")
        hs = self.initial_state(ctx)
        inputs = [self.start_id] + list(aspects)
        targets = list(aspects) + [self.end_class]
        losses = []
        for prev, tgt in zip(inputs, targets):
            hs, _, logits = self.step(hs, prev, ctx, drop=drop)
            loss, _ = ad.xent_logits(logits, tgt)
            losses.append(loss)
        return ad.scale(ad.sum_tensors(losses), 1.0 / len(losses))

    def generate(self, ctx, beam=4, max_len=5):
        """Beam-search aspect sequences; ranked by total log-prob."""
        with ad.no_grad():
            init = self.initial_state(ctx)

            def step_fn(states, prev_id):
                hs, _, logits = self.step(states, prev_id, ctx)
                return hs, log_softmax_np(logits.data)

            return beam_search(init, self.start_id, step_fn,
                               end_id=self.end_class, max_len=max_len,
                               width=beam)
