"""Character vocabulary and password <-> token-id conversion.

The canonical vocabulary has 100 tokens: the 95 printable ASCII characters
(0x20-0x7E) in code-point order at ids 0-94, followed by the five specials
[PAD], [SOS], [EOS], [UNK], [MASK] at ids 95-99.  Reduced vocabularies over a
smaller character set keep the same shape (characters first, the five specials
last, same order) so that toy models and the full pipeline share one code path.
[UNK] and [MASK] are reserved ids: this pipeline never emits them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import TokenizeError

PRINTABLE_ASCII = "".join(chr(c) for c in range(0x20, 0x7F))

SPECIAL_TOKENS = ("[PAD]", "[SOS]", "[EOS]", "[UNK]", "[MASK]")


@dataclass(frozen=True)
class Vocabulary:
    """Bijective token <-> id mapping over a character set plus five specials."""

    charset: str = PRINTABLE_ASCII
    _char_to_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.charset)) != len(self.charset):
            raise TokenizeError("charset contains duplicate characters")
        if not self.charset:
            raise TokenizeError("charset is empty")
        object.__setattr__(
            self, "_char_to_id", {c: i for i, c in enumerate(self.charset)}
        )

    @property
    def tokens(self) -> list[str]:
        return list(self.charset) + list(SPECIAL_TOKENS)

    def __len__(self) -> int:
        return len(self.charset) + len(SPECIAL_TOKENS)

    @property
    def pad_id(self) -> int:
        return len(self.charset)

    @property
    def sos_id(self) -> int:
        return len(self.charset) + 1

    @property
    def eos_id(self) -> int:
        return len(self.charset) + 2

    @property
    def unk_id(self) -> int:
        return len(self.charset) + 3

    @property
    def mask_id(self) -> int:
        return len(self.charset) + 4

    def encode(self, password: str) -> list[int]:
        """Token ids for a password: [SOS], one id per character, [EOS].

        Raises TokenizeError on any out-of-charset character; training data is
        never silently mapped to [UNK].
        """
        ids = [self.sos_id]
        lookup = self._char_to_id
        for pos, ch in enumerate(password):
            cid = lookup.get(ch)
            if cid is None:
                raise TokenizeError(
                    f"character {ch!r} at position {pos} is outside the vocabulary charset"
                )
            ids.append(cid)
        ids.append(self.eos_id)
        return ids

    def decode(self, ids: list[int]) -> str:
        """Concatenate character tokens, stripping [SOS]/[EOS]/[PAD].

        [UNK] or [MASK] in the sequence is a contract violation and raises.
        """
        chars = []
        for i in ids:
            if i == self.unk_id or i == self.mask_id:
                raise TokenizeError(f"reserved token id {i} cannot be decoded")
            if i in (self.sos_id, self.eos_id, self.pad_id):
                continue
            if not 0 <= i < len(self.charset):
                raise TokenizeError(f"token id {i} out of range for this vocabulary")
            chars.append(self.charset[i])
        return "".join(chars)

    def to_token_list(self) -> list[str]:
        """Serialized form used in checkpoint and bundle manifests."""
        return self.tokens

    @classmethod
    def from_token_list(cls, tokens: list[str]) -> "Vocabulary":
        if len(tokens) < len(SPECIAL_TOKENS) + 1:
            raise TokenizeError("token list too short to be a vocabulary")
        if tuple(tokens[-len(SPECIAL_TOKENS):]) != SPECIAL_TOKENS:
            raise TokenizeError("token list does not end with the five special tokens")
        charset = tokens[: -len(SPECIAL_TOKENS)]
        if any(len(t) != 1 for t in charset):
            raise TokenizeError("character tokens must be single characters")
        return cls("".join(charset))


def default_vocabulary() -> Vocabulary:
    """The canonical 100-token vocabulary (95 printable ASCII + 5 specials)."""
    return Vocabulary(PRINTABLE_ASCII)
