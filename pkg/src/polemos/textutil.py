"""Unicode and timestamp helpers shared across the pipeline.

The emoji handling is table-driven: ``EXTENDED_PICTOGRAPHIC`` carries the
code point ranges of the Unicode Extended_Pictographic property (emoji-data),
which is not exposed by the stdlib ``unicodedata`` module.
"""
from __future__ import annotations

import bisect
import unicodedata
from datetime import datetime, timezone

# Extended_Pictographic ranges, inclusive (Unicode emoji-data). Regional
# indicator symbols (U+1F1E6..U+1F1FF) are deliberately not part of this
# property; they are handled as flag pairs by the tokenizer.
EXTENDED_PICTOGRAPHIC: tuple[tuple[int, int], ...] = (
    (0x00A9, 0x00A9), (0x00AE, 0x00AE), (0x203C, 0x203C), (0x2049, 0x2049),
    (0x2122, 0x2122), (0x2139, 0x2139), (0x2194, 0x2199), (0x21A9, 0x21AA),
    (0x231A, 0x231B), (0x2328, 0x2328), (0x2388, 0x2388), (0x23CF, 0x23CF),
    (0x23E9, 0x23F3), (0x23F8, 0x23FA), (0x24C2, 0x24C2), (0x25AA, 0x25AB),
    (0x25B6, 0x25B6), (0x25C0, 0x25C0), (0x25FB, 0x25FE), (0x2600, 0x2605),
    (0x2607, 0x2612), (0x2614, 0x2685), (0x2690, 0x2705), (0x2708, 0x2712),
    (0x2714, 0x2714), (0x2716, 0x2716), (0x271D, 0x271D), (0x2721, 0x2721),
    (0x2728, 0x2728), (0x2733, 0x2734), (0x2744, 0x2744), (0x2747, 0x2747),
    (0x274C, 0x274C), (0x274E, 0x274E), (0x2753, 0x2755), (0x2757, 0x2757),
    (0x2763, 0x2767), (0x2795, 0x2797), (0x27A1, 0x27A1), (0x27B0, 0x27B0),
    (0x27BF, 0x27BF), (0x2934, 0x2935), (0x2B05, 0x2B07), (0x2B1B, 0x2B1C),
    (0x2B50, 0x2B50), (0x2B55, 0x2B55), (0x3030, 0x3030), (0x303D, 0x303D),
    (0x3297, 0x3297), (0x3299, 0x3299),
    (0x1F000, 0x1F0FF), (0x1F10D, 0x1F10F), (0x1F12F, 0x1F12F),
    (0x1F16C, 0x1F171), (0x1F17E, 0x1F17F), (0x1F18E, 0x1F18E),
    (0x1F191, 0x1F19A), (0x1F1AD, 0x1F1E5), (0x1F201, 0x1F20F),
    (0x1F21A, 0x1F21A), (0x1F22F, 0x1F22F), (0x1F232, 0x1F23A),
    (0x1F23C, 0x1F23F), (0x1F249, 0x1F3FA), (0x1F400, 0x1F53D),
    (0x1F546, 0x1F64F), (0x1F680, 0x1F6FF), (0x1F774, 0x1F77F),
    (0x1F7D5, 0x1F7FF), (0x1F80C, 0x1F80F), (0x1F848, 0x1F84F),
    (0x1F85A, 0x1F85F), (0x1F888, 0x1F88F), (0x1F8AE, 0x1F8FF),
    (0x1F90C, 0x1F93A), (0x1F93C, 0x1F945), (0x1F947, 0x1FAFF),
    (0x1FC00, 0x1FFFD),
)

_EP_STARTS = [r[0] for r in EXTENDED_PICTOGRAPHIC]

ZWJ = 0x200D
REGIONAL_INDICATOR = (0x1F1E6, 0x1F1FF)
VARIATION_SELECTORS = ((0xFE00, 0xFE0F), (0xE0100, 0xE01EF))


def is_pictographic(ch: str) -> bool:
    cp = ord(ch)
    i = bisect.bisect_right(_EP_STARTS, cp) - 1
    if i < 0:
        return False
    return cp <= EXTENDED_PICTOGRAPHIC[i][1]


def is_regional_indicator(ch: str) -> bool:
    return REGIONAL_INDICATOR[0] <= ord(ch) <= REGIONAL_INDICATOR[1]


def is_emoji_extender(ch: str) -> bool:
    """Variation selectors and the zero-width joiner."""
    cp = ord(ch)
    if cp == ZWJ:
        return True
    return any(lo <= cp <= hi for lo, hi in VARIATION_SELECTORS)


def strip_pictographic(text: str) -> str:
    """Remove pictographic code points, variation selectors and ZWJ."""
    return "".join(
        ch for ch in text if not (is_pictographic(ch) or is_emoji_extender(ch))
    )


def alphabetic_count(text: str) -> int:
    """Number of alphabetic code points after NFC normalization."""
    return sum(1 for ch in unicodedata.normalize("NFC", text) if ch.isalpha())


def parse_rfc3339(value: str) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime.

    Accepts the trailing-Z form the platform API emits (Python 3.10's
    ``fromisoformat`` does not).
    """
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp lacks a UTC offset: {value!r}")
    return dt.astimezone(timezone.utc)


def format_rfc3339(dt: datetime) -> str:
    """Render an aware datetime as RFC 3339 with second precision (Z suffix)."""
    if dt.tzinfo is None:
        raise ValueError("naive datetime")
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
