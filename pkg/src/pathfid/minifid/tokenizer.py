from __future__ import annotations

from typing import Iterable, Sequence

from ..blocks import MARKERS

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)


class Tokenizer:
    """Word-level vocabulary; every marker is a reserved single id."""

    def __init__(self, words: Iterable[str] = ()):
        reserved = [*SPECIALS, *MARKERS.all_tokens()]
        extra = sorted(set(words) - set(reserved))
        self.itos: list[str] = reserved + extra
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> Tokenizer:
        words: set[str] = set()
        for t in texts:
            words.update(t.split())
        return cls(words)

    @classmethod
    def from_vocab(cls, itos: Sequence[str]) -> Tokenizer:
        tok = cls.__new__(cls)
        tok.itos = list(itos)
        tok.stoi = {t: i for i, t in enumerate(tok.itos)}
        if tok.itos[: len(SPECIALS)] != list(SPECIALS):
            raise ValueError("vocabulary does not start with the reserved specials")
        return tok

    def __len__(self) -> int:
        return len(self.itos)

    @property
    def pad_id(self) -> int:
        return self.stoi[PAD]

    @property
    def bos_id(self) -> int:
        return self.stoi[BOS]

    @property
    def eos_id(self) -> int:
        return self.stoi[EOS]

    @property
    def unk_id(self) -> int:
        return self.stoi[UNK]

    def encode(self, tokens: Sequence[str] | str) -> list[int]:
        if isinstance(tokens, str):
            tokens = tokens.split()
        unk = self.unk_id
        return [self.stoi.get(t, unk) for t in tokens]

    def decode(self, ids: Iterable[int], strip_special: bool = True) -> list[str]:
        out = []
        for i in ids:
            t = self.itos[i]
            if strip_special and t in (PAD, BOS, EOS):
                continue
            out.append(t)
        return out
