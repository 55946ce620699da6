"""Corpus ingestion, normalization, filtering, vocabulary and splits.

Raw reviews arrive as line-delimited JSON records.  Preprocessing
lowercases, sentence-splits and tokenizes the text, drops over-long
reviews, iteratively prunes rare users/items, builds the vocabulary and
encodes every surviving review as lists of token indices.

The tokenizer is deliberately self-contained and deterministic: split
on whitespace, then peel leading/trailing punctuation into separate
tokens, keeping internal apostrophes and hyphens ("don't", "blu-ray").
Sentences are split on ``. ! ?`` followed by whitespace; abbreviations
are not special-cased.
"""

import json
import os
import string
from dataclasses import dataclass, field

from .errors import DataError, UsageError
from .rng import Xoshiro256StarStar

PAD, OOV, START, END = "PAD", "OOV", "START", "END"
RESERVED = (PAD, OOV, START, END)
PAD_ID, OOV_ID, START_ID, END_ID = 0, 1, 2, 3

_PUNCT = set(string.punctuation)
_SENT_END = {".", "!", "?"}


@dataclass
class PreprocessConfig:
    max_review_tokens: int = 100
    min_word_count: int = 10
    min_user_count: int = 5
    min_item_count: int = 5
    rating_levels: int = 5


@dataclass
class RawReview:
    user_id: str
    item_id: str
    rating: int
    text: str


@dataclass
class Review:
    user_idx: int
    item_idx: int
    rating_idx: int          # 0-based, rating - 1
    sentences: list          # list of lists of vocabulary indices

    def num_tokens(self):
        return sum(len(s) for s in self.sentences)


@dataclass
class Vocabulary:
    words: list              # index -> word, reserved block first
    counts: list             # index -> corpus count (0 for reserved)
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self):
        return len(self.words)

    def encode(self, token):
        return self.index.get(token, OOV_ID)

    def word(self, idx):
        return self.words[idx]


@dataclass
class CorpusSplit:
    train: list
    valid: list
    test: list
    seed: int
    ratios: tuple = (0.8, 0.1, 0.1)


@dataclass
class IngestReport:
    reviews: list
    errors: list             # (line_number, reason) pairs


def tokenize(text):
    """Whitespace split with punctuation peeled off token edges."""
    tokens = []
    for chunk in text.split():
        head = []
        tail = []
        while chunk and chunk[0] in _PUNCT:
            head.append(chunk[0])
            chunk = chunk[1:]
        while chunk and chunk[-1] in _PUNCT:
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(head)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(tail))
    return tokens


def detokenize(tokens):
    return " ".join(tokens)


def split_sentences(text):
    """Split on sentence-final punctuation followed by whitespace."""
    sentences = []
    buf = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        buf.append(ch)
        if ch in _SENT_END and i + 1 < n and text[i + 1].isspace():
            sentence = "".join(buf).strip()
            if sentence:
                sentences.append(sentence)
            buf = []
        i += 1
    last = "".join(buf).strip()
    if last:
        sentences.append(last)
    return sentences


def ingest(path, schema=None):
    """Read line-delimited JSON reviews.

    ``schema`` maps the canonical field names (user_id, item_id,
    rating, text) onto the file's own field names.  Malformed lines are
    collected into the report instead of being dropped silently; more
    than 10% malformed lines is fatal.
    """
    schema = schema or {}
    f_user = schema.get("user_id", "user_id")
    f_item = schema.get("item_id", "item_id")
    f_rating = schema.get("rating", "rating")
    f_text = schema.get("text", "text")

    if not os.path.exists(path):
        raise DataError(f"cannot read corpus file: {path}")
    reviews = []
    errors = []
    total = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            total += 1
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append((lineno, f"invalid JSON: {exc.msg}"))
                continue
            missing = [f for f in (f_user, f_item, f_rating, f_text)
                       if f not in rec]
            if missing:
                errors.append((lineno, "missing field(s): " + ", ".join(missing)))
                continue
            try:
                rating = int(rec[f_rating])
            except (TypeError, ValueError):
                errors.append((lineno, f"non-integer rating: {rec[f_rating]!r}"))
                continue
            text = str(rec[f_text]).strip()
            if not text:
                errors.append((lineno, "empty text"))
                continue
            reviews.append(RawReview(str(rec[f_user]), str(rec[f_item]),
                                     rating, text))
    if total == 0:
        raise DataError("empty corpus")
    if errors and len(errors) > 0.10 * total:
        lines = ", ".join(str(ln) for ln, _ in errors[:20])
        raise DataError(
            f"{len(errors)}/{total} malformed lines (first at: {lines})")
    return IngestReport(reviews=reviews, errors=errors)


def _sentences_of(raw):
    """Lowercase, sentence-split and tokenize one raw review."""
    out = []
    for sent in split_sentences(raw.text.lower()):
        toks = tokenize(sent)
        if toks:
            out.append(toks)
    return out


def preprocess(raw_reviews, rules=None):
    """Filter reviews and build the vocabulary.

    Returns (reviews, vocabulary, id_maps) where id_maps carries the
    user/item identifier -> dense index dictionaries.  Length filtering
    runs first, then user/item pruning iterates to a fixpoint (removing
    one user's reviews can push an item below threshold and vice
    versa), then the vocabulary is counted over the survivors.
    """
    rules = rules or PreprocessConfig()
    tokenized = []
    for raw in raw_reviews:
        if not (1 <= raw.rating <= rules.rating_levels):
            continue
        sents = _sentences_of(raw)
        if not sents:
            continue
        n_tokens = sum(len(s) for s in sents)
        if n_tokens > rules.max_review_tokens:
            continue
        tokenized.append((raw, sents))

    # user/item pruning to a fixpoint
    while True:
        user_counts = {}
        item_counts = {}
        for raw, _ in tokenized:
            user_counts[raw.user_id] = user_counts.get(raw.user_id, 0) + 1
            item_counts[raw.item_id] = item_counts.get(raw.item_id, 0) + 1
        kept = [(raw, s) for raw, s in tokenized
                if user_counts[raw.user_id] >= rules.min_user_count
                and item_counts[raw.item_id] >= rules.min_item_count]
        if len(kept) == len(tokenized):
            break
        tokenized = kept
    if not tokenized:
        raise DataError("corpus empty after filtering")

    word_counts = {}
    for _, sents in tokenized:
        for sent in sents:
            for tok in sent:
                word_counts[tok] = word_counts.get(tok, 0) + 1
    vocab_words = sorted(w for w, c in word_counts.items()
                         if c >= rules.min_word_count and w not in RESERVED)
    vocab = Vocabulary(words=list(RESERVED) + vocab_words,
                       counts=[0] * len(RESERVED)
                       + [word_counts[w] for w in vocab_words])

    users = sorted({raw.user_id for raw, _ in tokenized})
    items = sorted({raw.item_id for raw, _ in tokenized})
    user_idx = {u: i for i, u in enumerate(users)}
    item_idx = {it: i for i, it in enumerate(items)}

    reviews = []
    for raw, sents in tokenized:
        encoded = [[vocab.encode(t) for t in sent] for sent in sents]
        reviews.append(Review(user_idx[raw.user_id], item_idx[raw.item_id],
                              raw.rating - 1, encoded))
    id_maps = {"users": users, "items": items,
               "rating_levels": rules.rating_levels}
    return reviews, vocab, id_maps


def split(reviews, ratios=(0.8, 0.1, 0.1), seed=0):
    """Deterministic shuffled split using xoshiro256**.

    Partition sizes follow the largest-remainder rule so they always
    sum to len(reviews) and sit within one review of the requested
    proportions.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise UsageError(f"split ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise UsageError("split ratios must be non-negative")
    if len(reviews) < 3:
        raise DataError("need at least 3 reviews to split")

    order = list(range(len(reviews)))
    Xoshiro256StarStar(seed).shuffle(order)
    n = len(reviews)
    exact = [r * n for r in ratios]
    sizes = [int(x) for x in exact]
    remainders = sorted(range(3), key=lambda i: (exact[i] - sizes[i], -i),
                        reverse=True)
    for i in range(n - sum(sizes)):
        sizes[remainders[i % 3]] += 1
    b1, b2 = sizes[0], sizes[0] + sizes[1]
    shuffled = [reviews[i] for i in order]
    return CorpusSplit(train=shuffled[:b1], valid=shuffled[b1:b2],
                       test=shuffled[b2:], seed=seed, ratios=tuple(ratios))


# ---------------------------------------------------------------------------
# bundle directory serialization

def _review_to_record(rv):
    return {"user": rv.user_idx, "item": rv.item_idx,
            "rating": rv.rating_idx, "sentences": rv.sentences}


def _review_from_record(rec):
    return Review(rec["user"], rec["item"], rec["rating"],
                  [list(s) for s in rec["sentences"]])


def save_bundle(out_dir, corpus_split, vocab, id_maps):
    """Write the corpus bundle directory.

    Layout: ``vocab.tsv`` (word<TAB>count, one per line; the index of a
    word is its line order offset by the reserved block PAD/OOV/START/
    END), ``users.txt``/``items.txt`` (id per line, index = line
    order), ``{train,valid,test}.jsonl`` review index files and
    ``manifest.json`` recording seed, ratios and counts.
    """
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "vocab.tsv"), "w", encoding="utf-8") as fh:
        for w, c in zip(vocab.words[len(RESERVED):],
                        vocab.counts[len(RESERVED):]):
            fh.write(f"{w}\t{c}\n")
    for name, values in (("users.txt", id_maps["users"]),
                         ("items.txt", id_maps["items"])):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            for v in values:
                fh.write(f"{v}\n")
    for name, part in (("train", corpus_split.train),
                       ("valid", corpus_split.valid),
                       ("test", corpus_split.test)):
        with open(os.path.join(out_dir, f"{name}.jsonl"), "w",
                  encoding="utf-8") as fh:
            for rv in part:
                fh.write(json.dumps(_review_to_record(rv),
                                    sort_keys=True) + "\n")
    manifest = {"seed": corpus_split.seed,
                "ratios": list(corpus_split.ratios),
                "counts": {"train": len(corpus_split.train),
                           "valid": len(corpus_split.valid),
                           "test": len(corpus_split.test)},
                "vocab_size": len(vocab),
                "rating_levels": id_maps["rating_levels"]}
    with open(os.path.join(out_dir, "manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_bundle(bundle_dir):
    """Load a bundle directory written by save_bundle."""
    vocab_path = os.path.join(bundle_dir, "vocab.tsv")
    if not os.path.exists(vocab_path):
        raise DataError(f"not a corpus bundle (missing vocab.tsv): {bundle_dir}")
    words = list(RESERVED)
    counts = [0] * len(RESERVED)
    with open(vocab_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            w, c = line.split("\t")
            words.append(w)
            counts.append(int(c))
    vocab = Vocabulary(words=words, counts=counts)

    def read_lines(name):
        with open(os.path.join(bundle_dir, name), encoding="utf-8") as fh:
            return [ln.rstrip("\n") for ln in fh if ln.strip()]

    users = read_lines("users.txt")
    items = read_lines("items.txt")
    with open(os.path.join(bundle_dir, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)

    parts = {}
    for name in ("train", "valid", "test"):
        with open(os.path.join(bundle_dir, f"{name}.jsonl"),
                  encoding="utf-8") as fh:
            parts[name] = [_review_from_record(json.loads(ln))
                           for ln in fh if ln.strip()]
    corpus_split = CorpusSplit(train=parts["train"], valid=parts["valid"],
                               test=parts["test"], seed=manifest["seed"],
                               ratios=tuple(manifest["ratios"]))
    id_maps = {"users": users, "items": items,
               "rating_levels": manifest.get("rating_levels", 5)}
    return corpus_split, vocab, id_maps


def sentence_words(vocab, sentence):
    """Token indices -> surface words (OOV index renders as 'OOV')."""
    return [vocab.word(i) for i in sentence]
