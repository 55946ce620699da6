"""Assembled generation model: context encoder plus three decoders.

Shared parameters: the context encoder feeds all three decoders, the
aspect embedding table feeds the sketch decoder's fusion and output,
and the sketch symbol embedding table feeds the review decoder's
encoder and output. Parameter groups expose exactly these boundaries
so staged training can freeze what a stage does not own.
"""

import numpy as np

from .aspect_decoder import AspectDecoder, ContextEncoder
from .errors import DataError
from .review_decoder import ReviewDecoder
from .rng import pcg_stream
from .sketch_decoder import SketchDecoder


class ModelSizes:
    def __init__(self, n_users, n_items, n_ratings, n_aspects, vocab_size,
                 sketch_vocab_size):
        self.n_users = n_users
        self.n_items = n_items
        self.n_ratings = n_ratings
        self.n_aspects = n_aspects
        self.vocab_size = vocab_size
        self.sketch_vocab_size = sketch_vocab_size

    def to_dict(self):
        return {"n_users": self.n_users, "n_items": self.n_items,
                "n_ratings": self.n_ratings, "n_aspects": self.n_aspects,
                "vocab_size": self.vocab_size,
                "sketch_vocab_size": self.sketch_vocab_size}

    @classmethod
    def from_dict(cls, d):
        return cls(d["n_users"], d["n_items"], d["n_ratings"],
                   d["n_aspects"], d["vocab_size"], d["sketch_vocab_size"])


class ReviewGenModel:
    def __init__(self, model_cfg, sizes, seed, boost_table=None):
        self.cfg = model_cfg
        self.sizes = sizes
        self.seed = seed
        dtype = np.float64 if model_cfg.dtype == "float64" else np.float32
        self.dtype = dtype
        rng = pcg_stream(seed, "init")
        # construction order is fixed; it defines the init RNG stream
        self.ctx_encoder = ContextEncoder(sizes.n_users, sizes.n_items,
                                          sizes.n_ratings, model_cfg.d_emb,
                                          model_cfg.d_ctx, rng, dtype)
        self.aspect = AspectDecoder(sizes.n_aspects, model_cfg.d_aspect,
                                    model_cfg.d_hidden_aspect,
                                    model_cfg.d_emb, model_cfg.gru_layers,
                                    rng, dtype)
        self.sketch = SketchDecoder(sizes.sketch_vocab_size,
                                    model_cfg.d_sketch,
                                    model_cfg.d_hidden_sketch,
                                    model_cfg.d_emb, model_cfg.gru_layers,
                                    rng, dtype)
        self.review = ReviewDecoder(sizes.vocab_size,
                                    sizes.sketch_vocab_size,
                                    model_cfg.d_word,
                                    model_cfg.d_hidden_word,
                                    model_cfg.d_sketch,
                                    model_cfg.d_hidden_sketch,
                                    model_cfg.d_emb, model_cfg.gru_layers,
                                    rng, boost_table=boost_table,
                                    boost_lambda=model_cfg.boost_lambda,
                                    dtype=dtype)

    @property
    def ablation(self):
        return self.cfg.ablation

    def param_groups(self):
        return {"context": dict(self.ctx_encoder.params),
                "aspect": dict(self.aspect.params),
                "sketch": dict(self.sketch.params),
                "review": dict(self.review.params)}

    def all_params(self):
        merged = {}
        for group in self.param_groups().values():
            merged.update(group)
        return merged

    def zero_grad(self):
        for p in self.all_params().values():
            p.zero_grad()

    def sketch_embedding_table(self):
        return self.sketch.params["sketch.emb"]

    def constant_aspect_embedding(self):
        """Row 0 of the aspect table: the no-aspect ablation's constant."""
        return self.aspect.aspect_embedding(0)

    def to_blocks(self):
        blocks = {f"param.{k}": p.data for k, p in self.all_params().items()}
        if self.review.boost_table is not None:
            blocks["boost.theta"] = self.review.boost_table
        return blocks

    def load_blocks(self, blocks):
        params = self.all_params()
        for name, p in params.items():
            key = f"param.{name}"
            if key not in blocks:
                raise DataError(f"checkpoint missing parameter {name}")
            arr = blocks[key]
            if tuple(arr.shape) != tuple(p.data.shape):
                raise DataError(f"shape mismatch for {name}: checkpoint "
                                f"{arr.shape} vs model {p.data.shape}")
            p.data = arr.astype(p.data.dtype, copy=True)
        if "boost.theta" in blocks:
            self.review.set_boost_table(blocks["boost.theta"])

    def geometry(self):
        return {"sizes": self.sizes.to_dict(),
                "d_emb": self.cfg.d_emb, "d_ctx": self.cfg.d_ctx,
                "d_aspect": self.cfg.d_aspect,
                "d_hidden_aspect": self.cfg.d_hidden_aspect,
                "d_sketch": self.cfg.d_sketch,
                "d_hidden_sketch": self.cfg.d_hidden_sketch,
                "d_word": self.cfg.d_word,
                "d_hidden_word": self.cfg.d_hidden_word,
                "gru_layers": self.cfg.gru_layers,
                "dropout": self.cfg.dropout,
                "boost_lambda": self.cfg.boost_lambda,
                "ablation": self.cfg.ablation,
                "dtype": self.cfg.dtype,
                "word_init_chain": self.cfg.word_init_chain}

    def check_geometry(self, meta):
        mine = self.geometry()
        for key in ("sizes", "d_emb", "d_ctx", "d_aspect", "d_hidden_aspect",
                    "d_sketch", "d_hidden_sketch", "d_word", "d_hidden_word",
                    "gru_layers", "ablation"):
            if meta.get(key) != mine[key]:
                raise DataError(f"checkpoint geometry mismatch on {key}: "
                                f"{meta.get(key)} vs {mine[key]}")
