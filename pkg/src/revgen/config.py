"""Run configuration: INI file round-trip, presets, validation.

The config file is flat ``key = value`` text with one section per
module.  Every published hyperparameter has a named key (dims 512,
2 GRU layers, aspect batch 1024 / lr 2e-5, sketch & review batch 64 /
lr 2e-4 with decay 0.8 every 2 epochs, dropout 0.2, beam 4, max
lengths 5/50).  The ``desk`` preset divides dims by 16 and batches by
8 and raises the learning rates so small corpora memorize in minutes;
it is what the test-suite trains with.

A ``SEED`` environment variable overrides every seed in the file.
"""

import configparser
import os
from dataclasses import dataclass, field, fields

from .errors import UsageError

ABLATIONS = ("none", "no_aspect", "no_sketch")


@dataclass
class CorpusSection:
    max_review_tokens: int = 100
    min_word_count: int = 10
    min_user_count: int = 5
    min_item_count: int = 5
    rating_levels: int = 5
    split_seed: int = 13
    train_ratio: float = 0.8
    valid_ratio: float = 0.1
    test_ratio: float = 0.1


@dataclass
class LdaSection:
    aspects: int = 10
    iterations: int = 200
    burn_in: int = 100
    thin: int = 10
    doc_alpha: float = 0.0       # <= 0 means the 50/A default
    word_beta: float = 0.01
    switch_gamma: float = 20.0
    seed: int = 7


@dataclass
class SketcherSection:
    top_ngrams: int = 200
    keep_words: int = 50


@dataclass
class ModelSection:
    d_emb: int = 512             # context embedding size (d_E)
    d_ctx: int = 512             # encoded context size (d_C)
    d_aspect: int = 512          # aspect embedding size (d_A)
    d_hidden_aspect: int = 512   # aspect GRU hidden (d_H_A)
    d_sketch: int = 512          # sketch symbol embedding size (d_S)
    d_hidden_sketch: int = 512   # sketch GRU hidden (d_H_S)
    d_word: int = 512            # word embedding size (d_Y)
    d_hidden_word: int = 512     # word GRU hidden (d_H_Y)
    gru_layers: int = 2
    dropout: float = 0.2
    boost_lambda: float = 1.0
    ablation: str = "none"
    dtype: str = "float32"
    word_init_chain: bool = False


@dataclass
class StageSection:
    batch_size: int = 64
    learning_rate: float = 0.0002
    lr_decay_factor: float = 1.0
    lr_decay_epochs: int = 0     # 0 disables decay
    epochs: int = 10


@dataclass
class GenerateSection:
    beam: int = 4
    max_aspects: int = 5
    max_sketch_len: int = 50
    length_normalize: bool = False


@dataclass
class RunConfig:
    corpus: CorpusSection = field(default_factory=CorpusSection)
    lda: LdaSection = field(default_factory=LdaSection)
    sketcher: SketcherSection = field(default_factory=SketcherSection)
    model: ModelSection = field(default_factory=ModelSection)
    aspect_stage: StageSection = field(default_factory=lambda: StageSection(
        batch_size=1024, learning_rate=0.00002, epochs=10))
    sketch_stage: StageSection = field(default_factory=lambda: StageSection(
        batch_size=64, learning_rate=0.0002, lr_decay_factor=0.8,
        lr_decay_epochs=2, epochs=10))
    review_stage: StageSection = field(default_factory=lambda: StageSection(
        batch_size=64, learning_rate=0.0002, lr_decay_factor=0.8,
        lr_decay_epochs=2, epochs=10))
    joint_stage: StageSection = field(default_factory=lambda: StageSection(
        batch_size=64, learning_rate=0.0002, lr_decay_factor=0.8,
        lr_decay_epochs=2, epochs=2))
    generate: GenerateSection = field(default_factory=GenerateSection)
    train_seed: int = 11
    tune_shared_in_stages: bool = False

    def validate(self):
        m = self.model
        if m.d_ctx != m.d_hidden_aspect or m.d_ctx != m.d_hidden_sketch:
            raise UsageError("d_ctx, d_hidden_aspect and d_hidden_sketch "
                             "must be equal (the context vector seeds both "
                             "recurrent states)")
        if m.d_aspect != m.d_sketch:
            raise UsageError("d_aspect must equal d_sketch (element-wise "
                             "fusion of the two embeddings)")
        if not m.word_init_chain and m.d_hidden_word != m.d_ctx:
            raise UsageError("d_hidden_word must equal d_ctx when the word "
                             "decoder state restarts from the context")
        if m.ablation not in ABLATIONS:
            raise UsageError(f"ablation must be one of {ABLATIONS}")
        if m.ablation == "no_sketch" and m.d_aspect != m.d_hidden_sketch:
            raise UsageError("no_sketch ablation feeds the aspect embedding "
                             "where slot vectors go: d_aspect must equal "
                             "d_hidden_sketch")
        if not 0.0 <= m.dropout < 1.0:
            raise UsageError("dropout must be in [0, 1)")
        if self.generate.beam < 1:
            raise UsageError("beam width must be >= 1")
        if m.dtype not in ("float32", "float64"):
            raise UsageError("dtype must be float32 or float64")
        ratios = (self.corpus.train_ratio, self.corpus.valid_ratio,
                  self.corpus.test_ratio)
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise UsageError(f"split ratios must sum to 1, got {ratios}")
        return self

    def apply_seed_env(self):
        """A single SEED environment variable overrides all seeds."""
        seed = os.environ.get("SEED")
        if seed is not None:
            try:
                seed = int(seed)
            except ValueError:
                raise UsageError(f"SEED must be an integer, got {seed!r}")
            self.corpus.split_seed = seed
            self.lda.seed = seed
            self.train_seed = seed
        return self


_SECTIONS = {
    "corpus": "corpus",
    "lda": "lda",
    "sketcher": "sketcher",
    "model": "model",
    "train.aspect": "aspect_stage",
    "train.sketch": "sketch_stage",
    "train.review": "review_stage",
    "train.joint": "joint_stage",
    "generate": "generate",
}


def _parse_value(current, text):
    if isinstance(current, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise UsageError(f"expected boolean, got {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    return text


def load_config(path):
    """Parse an INI config file into a validated RunConfig."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise UsageError(f"cannot read config file: {path}")
    cfg = RunConfig()
    for section in cp.sections():
        if section == "train":
            for key, text in cp["train"].items():
                if key == "seed":
                    cfg.train_seed = int(text)
                elif key == "tune_shared_in_stages":
                    cfg.tune_shared_in_stages = _parse_value(False, text)
                else:
                    raise UsageError(f"unknown key in [train]: {key}")
            continue
        if section not in _SECTIONS:
            raise UsageError(f"unknown config section [{section}]")
        target = getattr(cfg, _SECTIONS[section])
        names = {f.name for f in fields(target)}
        for key, text in cp[section].items():
            if key not in names:
                raise UsageError(f"unknown key in [{section}]: {key}")
            setattr(target, key, _parse_value(getattr(target, key), text))
    return cfg.apply_seed_env().validate()


def save_config(cfg, path):
    cp = configparser.ConfigParser()
    for section, attr in _SECTIONS.items():
        target = getattr(cfg, attr)
        cp[section] = {f.name: str(getattr(target, f.name))
                       for f in fields(target)}
    cp["train"] = {"seed": str(cfg.train_seed),
                   "tune_shared_in_stages": str(cfg.tune_shared_in_stages)}
    with open(path, "w", encoding="utf-8") as fh:
        cp.write(fh)


def desk_preset(seed=11):
    """Desk-scale config: dims / 16, batches / 8, faster learning rates."""
    cfg = RunConfig()
    m = cfg.model
    for name in ("d_emb", "d_ctx", "d_aspect", "d_hidden_aspect", "d_sketch",
                 "d_hidden_sketch", "d_word", "d_hidden_word"):
        setattr(m, name, getattr(m, name) // 16)
    m.dtype = "float64"
    cfg.aspect_stage.batch_size = 1024 // 8
    cfg.aspect_stage.learning_rate = 0.003
    cfg.aspect_stage.epochs = 30
    for stage in (cfg.sketch_stage, cfg.review_stage):
        stage.batch_size = 64 // 8
        stage.learning_rate = 0.003
        stage.lr_decay_factor = 0.9
        stage.lr_decay_epochs = 10
        stage.epochs = 30
    cfg.joint_stage.batch_size = 64 // 8
    cfg.joint_stage.learning_rate = 0.001
    cfg.joint_stage.epochs = 2
    cfg.lda.aspects = 3
    cfg.lda.iterations = 120
    cfg.lda.burn_in = 60
    cfg.lda.thin = 10
    cfg.train_seed = seed
    return cfg.apply_seed_env().validate()
