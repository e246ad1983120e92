from typing import Sequence


def pack_bits(values: Sequence[int], widths: Sequence[int]) -> int:
    """Pack unsigned values LSB-first into one integer."""
    if len(values) != len(widths):
        raise ValueError(f"Got {len(values)} values for {len(widths)} widths")
    packed = 0
    shift = 0
    for value, width in zip(values, widths):
        if value < 0 or value >= (1 << width):
            raise ValueError(f"Value {value} does not fit in {width} bits")
        packed |= value << shift
        shift += width
    return packed


def unpack_bits(packed: int, widths: Sequence[int]) -> list[int]:
    """Inverse of pack_bits."""
    values: list[int] = []
    for width in widths:
        values.append(packed & ((1 << width) - 1))
        packed >>= width
    return values
