"""Closed word vocabulary and fixed-length tokenization.

Captions are lowercased and split on whitespace; every word must be in the
vocabulary. A tokenized caption is ``<bos> w1 .. wn <eos>`` padded with
``<pad>`` to the configured length. The serialized vocabulary is one token
per line (UTF-8); line order defines the ids.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Final

import numpy as np

from dense_face.constants import Constants
from dense_face.exceptions import ArtifactIOError, ConfigError, TokenizationError

PAD: Final[str] = "<pad>"
BOS: Final[str] = "<bos>"
EOS: Final[str] = "<eos>"
FACE: Final[str] = "face"
SPECIAL_TOKENS: Final[tuple[str, ...]] = (PAD, BOS, EOS)


class Vocabulary:
    """Bidirectional token/id mapping.

    Ids 0, 1 and 2 are always ``<pad>``, ``<bos>`` and ``<eos>``; the word
    ``face`` is always present and doubles as the base token of the
    identity text embedding.
    """

    def __init__(self, tokens: Sequence[str]) -> None:
        if tuple(tokens[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            msg = f"vocabulary must start with {', '.join(SPECIAL_TOKENS)}"
            raise ConfigError(msg)
        if len(set(tokens)) != len(tokens):
            msg = "vocabulary contains duplicate tokens"
            raise ConfigError(msg)
        if FACE not in tokens:
            msg = f"vocabulary must contain the '{FACE}' token"
            raise ConfigError(msg)
        if len(tokens) > Constants.VOCAB_LIMIT:
            msg = f"vocabulary has {len(tokens)} tokens; limit is {Constants.VOCAB_LIMIT}"
            raise ConfigError(msg)
        self._tokens: tuple[str, ...] = tuple(tokens)
        self._ids: dict[str, int] = {tok: i for i, tok in enumerate(self._tokens)}

    @classmethod
    def from_words(cls, words: Iterable[str]) -> Vocabulary:
        """Build a vocabulary from content words (specials first, then sorted words)."""
        content = {w.lower() for w in words if w} | {FACE}
        content -= set(SPECIAL_TOKENS)
        return cls([*SPECIAL_TOKENS, *sorted(content)])

    @classmethod
    def parse(cls, text: str) -> Vocabulary:
        return cls([line for line in text.splitlines() if line])

    @classmethod
    def load(cls, path: Path) -> Vocabulary:
        try:
            return cls.parse(path.read_text(encoding="utf-8"))
        except OSError as exc:
            msg = f"cannot read vocabulary {path}: {exc}"
            raise ArtifactIOError(msg) from exc

    def serialize(self) -> str:
        return "\n".join(self._tokens) + "\n"

    def save(self, path: Path) -> None:
        try:
            path.write_text(self.serialize(), encoding="utf-8")
        except OSError as exc:
            msg = f"cannot write vocabulary {path}: {exc}"
            raise ArtifactIOError(msg) from exc

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def bos_id(self) -> int:
        return 1

    @property
    def eos_id(self) -> int:
        return 2

    @property
    def face_id(self) -> int:
        return self._ids[FACE]

    def id_of(self, word: str) -> int:
        try:
            return self._ids[word]
        except KeyError:
            msg = f"word '{word}' is not in the vocabulary"
            raise TokenizationError(msg) from None

    def word_of(self, token_id: int) -> str:
        return self._tokens[token_id]

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, word: object) -> bool:
        return word in self._ids

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    def __hash__(self) -> int:
        return hash(self._tokens)


def tokenize(caption: str, vocab: Vocabulary, length: int = Constants.MAX_TOKENS) -> np.ndarray:
    """Map a caption to ``length`` token ids.

    Raises:
        TokenizationError: On an out-of-vocabulary word or a caption longer
            than ``length - 2`` words
    """
    words = caption.lower().split()
    if len(words) > length - 2:
        msg = f"caption has {len(words)} words; at most {length - 2} fit in {length} tokens"
        raise TokenizationError(msg)
    ids = [vocab.bos_id, *(vocab.id_of(w) for w in words), vocab.eos_id]
    ids.extend([vocab.pad_id] * (length - len(ids)))
    return np.asarray(ids, dtype=np.int64)


def tokenize_batch(
    captions: Sequence[str], vocab: Vocabulary, length: int = Constants.MAX_TOKENS
) -> np.ndarray:
    return np.stack([tokenize(c, vocab, length) for c in captions])


def detokenize(ids: Sequence[int] | np.ndarray, vocab: Vocabulary) -> str:
    """Inverse of ``tokenize`` for well-formed id sequences."""
    words: list[str] = []
    for token_id in np.asarray(ids, dtype=np.int64).tolist():
        if token_id == vocab.eos_id:
            break
        if token_id in (vocab.bos_id, vocab.pad_id):
            continue
        words.append(vocab.word_of(token_id))
    return " ".join(words)


def token_mask(ids: np.ndarray, vocab: Vocabulary | None = None) -> np.ndarray:
    """Boolean mask of non-padding positions."""
    pad = 0 if vocab is None else vocab.pad_id
    return np.asarray(ids) != pad
