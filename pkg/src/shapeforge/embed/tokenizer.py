"""Word-level tokenizer built from the caption corpus."""

import json
import re
from pathlib import Path

_WORD = re.compile(r"[a-z0-9]+")

UNK_ID = 0
MAX_LEN = 16


class Tokenizer:
    def __init__(self, vocab, max_len=MAX_LEN):
        self.vocab = dict(vocab)  # word -> id (>= 1; 0 is unknown)
        self.max_len = max_len
        self._inverse = {i: w for w, i in self.vocab.items()}

    @classmethod
    def build(cls, captions, max_len=MAX_LEN):
        words = sorted({w for c in captions for w in _WORD.findall(c.lower())})
        return cls({w: i + 1 for i, w in enumerate(words)}, max_len)

    @property
    def vocab_size(self):
        return len(self.vocab) + 1  # unknown id 0

    def encode(self, text):
        """Token ids, truncated to max_len; unknown words map to UNK_ID."""
        words = _WORD.findall(text.lower())[: self.max_len]
        return [self.vocab.get(w, UNK_ID) for w in words]

    def decode(self, ids):
        return " ".join(self._inverse.get(i, "<unk>") for i in ids)

    def save(self, path):
        Path(path).write_text(json.dumps(
            {"max_len": self.max_len, "vocab": self.vocab}, sort_keys=True))

    @classmethod
    def load(cls, path):
        data = json.loads(Path(path).read_text())
        return cls(data["vocab"], data["max_len"])
