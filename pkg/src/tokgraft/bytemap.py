"""Reversible byte <-> printable-unicode rendering for token strings.

Byte-level BPE files store tokens as unicode strings in which every byte is
one printable character: visible ASCII (0x21-0x7E) and the non-control
Latin-1 printables (0xA1-0xAC, 0xAE-0xFF) stand for themselves, and the
remaining 68 bytes are relocated, in increasing byte order, to code points
256..323.  This is the widespread GPT-2 convention, so files written by the
common tokenizer libraries load unchanged.
"""

from functools import lru_cache


@lru_cache(maxsize=1)
def byte_to_char() -> dict[int, str]:
    """256-entry injective map from byte value to rendering character."""
    fixed = set(range(0x21, 0x7F)) | set(range(0xA1, 0xAD)) | set(range(0xAE, 0x100))
    mapping = {}
    relocated = 0
    for b in range(256):
        if b in fixed:
            mapping[b] = chr(b)
        else:
            mapping[b] = chr(256 + relocated)
            relocated += 1
    return mapping


@lru_cache(maxsize=1)
def char_to_byte() -> dict[str, int]:
    """Exact inverse of byte_to_char."""
    return {c: b for b, c in byte_to_char().items()}


def render(token: bytes) -> str:
    """Render raw token bytes as the printable string used in model files."""
    table = byte_to_char()
    return "".join(table[b] for b in token)


def unrender(text: str) -> bytes:
    """Invert render.

    Raises KeyError-wrapping ValueError if the string contains a character
    outside the 256-character rendering alphabet.
    """
    table = char_to_byte()
    try:
        return bytes(table[c] for c in text)
    except KeyError as exc:
        raise ValueError(
            f"character {exc.args[0]!r} is not in the byte-rendering alphabet"
        ) from None
