"""Sketch derivation: n-gram symbols, kept words, POS slots.

A sketch is the per-sentence symbol sequence the sketch decoder is
trained on.  Derivation runs two passes over a tokenized sentence:

1. greedy left-to-right, longest-first replacement of bi/tri-grams
   found in the mined ``NgramTable`` (a tri-gram starting at a position
   beats a bi-gram starting there);
2. every remaining word is kept verbatim when it belongs to the
   sentence aspect's keep set or the global keep set, otherwise it is
   replaced by its POS tag.

The alignment maps every word position to the sketch slot covering it,
which is what lets ``realize`` invert the derivation exactly.
"""

import string
from dataclasses import dataclass, field

from .corpus import RESERVED
from .errors import DataError, UsageError

TAGSET = ("NN", "NNS", "VB", "VBD", "VBZ", "VBP", "VBN",
          "JJ", "JJS", "JJR", "RB", "IN", "DT", "PRP", "CD", "OTHER")

SK_START, SK_END = "START", "END"
SK_START_ID, SK_END_ID = 0, 1

_LEXICON = {
    "the": "DT", "a": "DT", "an": "DT", "this": "DT", "that": "DT",
    "these": "DT", "those": "DT", "some": "DT", "any": "DT", "each": "DT",
    "every": "DT", "no": "DT", "another": "DT", "all": "DT", "both": "DT",
    "in": "IN", "of": "IN", "on": "IN", "at": "IN", "by": "IN", "for": "IN",
    "with": "IN", "from": "IN", "to": "IN", "into": "IN", "over": "IN",
    "under": "IN", "about": "IN", "after": "IN", "before": "IN",
    "between": "IN", "during": "IN", "without": "IN", "through": "IN",
    "against": "IN", "across": "IN", "within": "IN", "upon": "IN",
    "i": "PRP", "you": "PRP", "he": "PRP", "she": "PRP", "it": "PRP",
    "we": "PRP", "they": "PRP", "me": "PRP", "him": "PRP", "her": "PRP",
    "us": "PRP", "them": "PRP", "my": "PRP", "your": "PRP", "his": "PRP",
    "its": "PRP", "our": "PRP", "their": "PRP", "mine": "PRP",
    "myself": "PRP", "yourself": "PRP", "itself": "PRP",
    "is": "VBZ", "was": "VBD", "are": "VBP", "were": "VBD", "am": "VBP",
    "be": "VB", "been": "VBN", "being": "VB",
    "has": "VBZ", "have": "VBP", "had": "VBD", "having": "VB",
    "do": "VBP", "does": "VBZ", "did": "VBD", "done": "VBN",
    "not": "RB", "n't": "RB", "very": "RB", "too": "RB", "so": "RB",
    "also": "RB", "just": "RB", "really": "RB", "quite": "RB",
    "never": "RB", "always": "RB", "again": "RB", "well": "RB",
    "and": "OTHER", "or": "OTHER", "but": "OTHER", "if": "OTHER",
    "because": "OTHER", "as": "OTHER", "than": "OTHER", "when": "OTHER",
    "while": "OTHER", "where": "OTHER", "will": "OTHER", "would": "OTHER",
    "could": "OTHER", "should": "OTHER", "can": "OTHER", "may": "OTHER",
    "might": "OTHER", "must": "OTHER", "there": "OTHER", "what": "OTHER",
    "which": "OTHER", "who": "OTHER", "how": "OTHER", "why": "OTHER",
    "one": "CD", "two": "CD", "three": "CD", "four": "CD", "five": "CD",
    "six": "CD", "seven": "CD", "eight": "CD", "nine": "CD", "ten": "CD",
}

_JJ_SUFFIXES = ("ous", "ful", "able", "ible", "ive", "ish", "less")
_PUNCT = set(string.punctuation)


class HeuristicTagger:
    """Lexicon -> suffix rules -> NN default; every token gets a tag.

    ``overrides`` extends (and wins over) the built-in lexicon, which is
    how gold tags from an annotated corpus slot in without touching the
    rules.
    """

    tagset = TAGSET

    def __init__(self, overrides=None):
        self.overrides = dict(overrides or {})

    def tag(self, token):
        if token in self.overrides:
            return self.overrides[token]
        if token in _LEXICON:
            return _LEXICON[token]
        if all(ch in _PUNCT for ch in token):
            return "OTHER"
        if token[0].isdigit():
            return "CD"
        if token.endswith("ly"):
            return "RB"
        if token.endswith("ing") and len(token) > 4:
            return "VB"
        if token.endswith("ed") and len(token) > 3:
            return "VBD"
        if token.endswith("est") and len(token) > 4:
            return "JJS"
        if token.endswith(_JJ_SUFFIXES):
            return "JJ"
        if token.endswith("s") and len(token) > 3 \
                and not token.endswith(("ss", "us", "is")):
            return "NNS"
        return "NN"

    def tag_sentence(self, tokens):
        if not tokens:
            raise UsageError("cannot tag an empty token list")
        return [self.tag(t) for t in tokens]


@dataclass
class NgramEntry:
    words: tuple
    count: int

    @property
    def symbol(self):
        return "_".join(self.words)


@dataclass
class NgramTable:
    entries: list

    def __post_init__(self):
        self._by_words = {e.words: e for e in self.entries}
        self._by_symbol = {e.symbol: e for e in self.entries}

    def __len__(self):
        return len(self.entries)

    def __contains__(self, words):
        return tuple(words) in self._by_words

    def words_of(self, symbol):
        return self._by_symbol[symbol].words

    def has_symbol(self, symbol):
        return symbol in self._by_symbol


def mine_ngrams(sentences, top_ngrams=200):
    """Count within-sentence bi/tri-grams and keep the top entries.

    Ranking at equal frequency prefers the longer n-gram, then the
    lexicographically smaller word tuple.  N-grams touching reserved
    surfaces (OOV etc.) are skipped.
    """
    counts = {}
    reserved = set(RESERVED)
    for sent in sentences:
        for n in (2, 3):
            for i in range(len(sent) - n + 1):
                gram = tuple(sent[i:i + n])
                if any(w in reserved for w in gram):
                    continue
                counts[gram] = counts.get(gram, 0) + 1
    ranked = sorted(counts.items(),
                    key=lambda kv: (-kv[1], -len(kv[0]), kv[0]))
    return NgramTable([NgramEntry(words, c)
                       for words, c in ranked[:top_ngrams]])


@dataclass
class KeepSets:
    aspect_sets: list      # one set of words per aspect
    global_set: set

    def kept(self, word, aspect_id):
        return word in self.global_set or word in self.aspect_sets[aspect_id]


def build_keep_sets(model, vocab, k=50, stop_lists=None):
    """Top-k aspect words (via the topic model) and top-k corpus words.

    ``stop_lists`` is an optional per-aspect iterable of words to drop
    before truncation, mirroring manual cleanup of noisy aspect words.
    Reserved surfaces never enter a keep set.
    """
    from .aspect_lda import top_words

    reserved = set(RESERVED)
    stop_lists = stop_lists or {}
    aspect_sets = []
    for a in range(model.A):
        stop = set(stop_lists.get(a, ()))
        words = []
        for idx in top_words(model, a, min(k + len(reserved) + len(stop),
                                           len(vocab))):
            w = vocab.word(idx)
            if w in reserved or w in stop:
                continue
            words.append(w)
            if len(words) == k:
                break
        aspect_sets.append(set(words))
    order = sorted(range(len(vocab)),
                   key=lambda i: (-vocab.counts[i], vocab.words[i]))
    global_words = []
    for i in order:
        w = vocab.words[i]
        if w in reserved or vocab.counts[i] == 0:
            continue
        global_words.append(w)
        if len(global_words) == k:
            break
    return KeepSets(aspect_sets=aspect_sets, global_set=set(global_words))


@dataclass
class Slot:
    symbol: str
    kind: str              # "word" | "ngram" | "pos"
    words: tuple = None    # surface words for word/ngram slots
    width: int = 1


@dataclass
class Sketch:
    symbols: list          # slot symbols, no START/END
    alignment: list        # word position -> slot index
    slots: list = field(default_factory=list)

    def width(self):
        return sum(s.width for s in self.slots)


def derive_sketch(words, aspect_id, ngrams, keep_sets, tagger):
    """Two-pass sketch derivation with per-word alignment."""
    if not words:
        raise UsageError("cannot sketch an empty sentence")
    slots = []
    alignment = []
    i = 0
    n = len(words)
    while i < n:
        matched = None
        for width in (3, 2):
            if i + width <= n and tuple(words[i:i + width]) in ngrams:
                matched = width
                break
        if matched:
            gram = tuple(words[i:i + matched])
            slots.append(Slot("_".join(gram), "ngram", gram, matched))
            alignment.extend([len(slots) - 1] * matched)
            i += matched
        else:
            w = words[i]
            if keep_sets.kept(w, aspect_id):
                slots.append(Slot(w, "word", (w,), 1))
            else:
                slots.append(Slot(tagger.tag(w), "pos", None, 1))
            alignment.append(len(slots) - 1)
            i += 1
    return Sketch(symbols=[s.symbol for s in slots], alignment=alignment,
                  slots=slots)


def realize(sketch, per_slot_words):
    """Invert a sketch back into a sentence.

    Word and n-gram slots copy their stored surfaces; each POS slot
    takes its word from ``per_slot_words`` keyed by slot index.
    """
    out = []
    for idx, slot in enumerate(sketch.slots):
        if slot.kind == "pos":
            if idx not in per_slot_words:
                raise UsageError(f"no word supplied for POS slot {idx} "
                                 f"({slot.symbol})")
            out.append(per_slot_words[idx])
        else:
            out.extend(slot.words)
    return out


def plan_from_symbols(symbols, ngrams, tagset=None):
    """Slot plan for a generated sketch (symbols only, no alignment).

    N-gram symbols expand via the table, tagset members become POS
    slots, anything else is copied verbatim.
    """
    tagset = set(tagset or TAGSET)
    slots = []
    for sym in symbols:
        if ngrams.has_symbol(sym):
            words = ngrams.words_of(sym)
            slots.append(Slot(sym, "ngram", tuple(words), len(words)))
        elif sym in tagset:
            slots.append(Slot(sym, "pos", None, 1))
        else:
            slots.append(Slot(sym, "word", (sym,), 1))
    return slots


@dataclass
class SketchVocab:
    symbols: list
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {s: i for i, s in enumerate(self.symbols)}

    def __len__(self):
        return len(self.symbols)

    def encode(self, symbol):
        if symbol not in self.index:
            raise DataError(f"symbol outside sketch vocabulary: {symbol!r}")
        return self.index[symbol]

    def word(self, idx):
        return self.symbols[idx]


def build_sketch_vocab(ngrams, keep_sets, tagset=None):
    """Frozen sketch vocabulary: START/END, tags, keep words, n-grams."""
    tagset = tagset or TAGSET
    symbols = [SK_START, SK_END]
    seen = set(symbols)
    for group in (list(tagset),
                  sorted(keep_sets.global_set),
                  sorted(set().union(*keep_sets.aspect_sets)
                         if keep_sets.aspect_sets else set()),
                  [e.symbol for e in ngrams.entries]):
        for sym in group:
            if sym not in seen:
                seen.add(sym)
                symbols.append(sym)
    return SketchVocab(symbols=symbols)


# plain-text serialization -------------------------------------------------

def save_ngrams(table, path):
    with open(path, "w", encoding="utf-8") as fh:
        for e in table.entries:
            fh.write(" ".join(e.words) + "\t" + str(e.count) + "\n")


def load_ngrams(path):
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            words, count = line.split("\t")
            entries.append(NgramEntry(tuple(words.split(" ")), int(count)))
    return NgramTable(entries)


def save_keep_sets(keep_sets, path):
    with open(path, "w", encoding="utf-8") as fh:
        for w in sorted(keep_sets.global_set):
            fh.write(f"global\t{w}\n")
        for a, words in enumerate(keep_sets.aspect_sets):
            for w in sorted(words):
                fh.write(f"a{a}\t{w}\n")


def load_keep_sets(path):
    global_set = set()
    aspect_map = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, w = line.split("\t")
            if key == "global":
                global_set.add(w)
            else:
                aspect_map.setdefault(int(key[1:]), set()).add(w)
    n_aspects = max(aspect_map) + 1 if aspect_map else 0
    return KeepSets(aspect_sets=[aspect_map.get(a, set())
                                 for a in range(n_aspects)],
                    global_set=global_set)


def save_sketch_vocab(sv, path):
    with open(path, "w", encoding="utf-8") as fh:
        for s in sv.symbols:
            fh.write(s + "\n")


def load_sketch_vocab(path):
    with open(path, encoding="utf-8") as fh:
        symbols = [ln.rstrip("\n") for ln in fh if ln.strip()]
    return SketchVocab(symbols=symbols)
