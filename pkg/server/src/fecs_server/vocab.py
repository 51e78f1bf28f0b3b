"""Word-level tokenizer for the built-in toy model.

Tokens are either a newline or a maximal run of non-whitespace characters;
unknown words map to <unk>. Decoding joins word tokens with single spaces and
splices newline tokens in verbatim, so prompts built from vocabulary words
round-trip exactly.
"""

from __future__ import annotations

import re

UNK = "<unk>"
EOS = "<eos>"
NEWLINE = "\n"

STRUCTURAL = (UNK, EOS, NEWLINE, "Article:", "Summary:", "Knowledge:", "User:", "Assistant:")

# Words used by the engine's shipped few-shot templates.
TEMPLATE_WORDS = (
    "the", "mayor", "opened", "new", "river", "bridge", "on", "friday", "after",
    "years", "of", "delays", "heavy", "rain", "flooded", "valley", "farms",
    "overnight", "and", "damaged", "grain", "stores", "violin", "is", "a",
    "wooden", "string", "instrument", "with", "four", "strings", "what", "can",
    "you", "tell", "me", "about", "violins", "honey", "stored", "in", "sealed",
    "jars", "never", "spoils", "does", "go", "bad", "when", "it",
)

CONTENT_WORDS = (
    "city", "council", "voted", "to", "fund", "two", "schools", "harbor", "storm",
    "closed", "north", "road", "for", "repairs", "local", "team", "won", "final",
    "match", "museum", "shows", "old", "maps", "farmers", "market", "moved",
    "near", "station", "library", "added", "reading", "rooms", "clinic", "offers",
    "free", "checks", "students", "built", "solar", "boat", "garden", "festival",
    "drew", "large", "crowds", "bakery", "sells", "rye", "bread", "daily",
    "miners", "found", "copper", "seam", "deep", "below", "ridge", "rangers",
    "counted", "wolf", "packs", "this", "winter", "engineers", "tested", "dam",
    "gates", "at", "dawn", "pilots", "trained", "over", "coast", "nurses",
    "opened", "night", "ward", "chef", "cooked", "lake", "fish", "stew",
    "singer", "gave", "quiet", "show", "judge", "ruled", "case", "today",
    "traders", "watched", "wheat", "price", "rise", "child", "drew", "bright",
    "kite", "crew", "paved", "south", "lane",
)


def build_vocab() -> list[str]:
    """Deduplicated vocabulary; structural tokens keep the lowest ids."""
    seen: dict[str, None] = {}
    for word in STRUCTURAL + TEMPLATE_WORDS + CONTENT_WORDS:
        seen.setdefault(word)
    return list(seen)


class WordTokenizer:
    _SPLIT = re.compile(r"\n|[^\s]+")

    def __init__(self, vocab: list[str] | None = None):
        self.vocab = list(vocab) if vocab is not None else build_vocab()
        self._ids = {word: i for i, word in enumerate(self.vocab)}
        if UNK not in self._ids or EOS not in self._ids or NEWLINE not in self._ids:
            raise ValueError("vocabulary must contain <unk>, <eos>, and the newline token")
        self.unk_id = self._ids[UNK]
        self.eos_id = self._ids[EOS]
        self.newline_id = self._ids[NEWLINE]

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def encode(self, text: str) -> list[int]:
        return [self._ids.get(piece, self.unk_id) for piece in self._SPLIT.findall(text)]

    def decode(self, ids: list[int]) -> str:
        parts: list[str] = []
        for tid in ids:
            if not 0 <= tid < len(self.vocab):
                raise ValueError(f"unknown token id {tid}")
            word = self.vocab[tid]
            if word == NEWLINE:
                parts.append(NEWLINE)
            else:
                if parts and not parts[-1].endswith(NEWLINE):
                    parts.append(" ")
                parts.append(word)
        return "".join(parts)

    def content_ids(self) -> list[int]:
        """Ids of plain content words (everything after the structural block)."""
        structural = set(STRUCTURAL)
        return [i for i, word in enumerate(self.vocab) if word not in structural]
