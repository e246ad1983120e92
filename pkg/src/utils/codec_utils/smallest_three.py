import math

from ...classes.Transform import UnitQuat
from .bit_packing import pack_bits, unpack_bits

# The three smallest components of a unit quaternion lie in [-1/sqrt(2), 1/sqrt(2)]
COMPONENT_LIMIT = 1.0 / math.sqrt(2.0)
MIN_BITS = 2
MAX_BITS = 16


def _check_bits(bits: int) -> None:
    if not MIN_BITS <= bits <= MAX_BITS:
        raise ValueError(f"Smallest-three bits per component must be in [{MIN_BITS}, {MAX_BITS}], got {bits}")


def quantize_component(value: float, bits: int) -> int:
    levels = (1 << bits) - 1
    scaled = (value + COMPONENT_LIMIT) / (2.0 * COMPONENT_LIMIT) * levels
    return min(levels, max(0, int(round(scaled))))


def dequantize_component(raw: int, bits: int) -> float:
    levels = (1 << bits) - 1
    return raw / levels * 2.0 * COMPONENT_LIMIT - COMPONENT_LIMIT


def split_smallest_three(q: UnitQuat) -> tuple[int, tuple[float, float, float]]:
    """Index of the largest-magnitude component and the other three, signed so the largest is positive."""
    comps = q.as_tuple()
    index = max(range(4), key=lambda i: (abs(comps[i]), -i))
    sign = -1.0 if comps[index] < 0.0 else 1.0
    rest = [sign * c for i, c in enumerate(comps) if i != index]
    return index, (rest[0], rest[1], rest[2])


def reconstruct_from_smallest_three(index: int, rest: tuple[float, float, float]) -> UnitQuat:
    if not 0 <= index <= 3:
        raise ValueError(f"Smallest-three index must be in [0, 3], got {index}")
    largest = math.sqrt(max(0.0, 1.0 - sum(c * c for c in rest)))
    comps = list(rest)
    comps.insert(index, largest)
    return UnitQuat(comps[0], comps[1], comps[2], comps[3]).normalized()


def encode_quat_smallest_three(q: UnitQuat, bits: int) -> int:
    """Pack a rotation as a 2-bit dropped-component index followed by three quantized components."""
    _check_bits(bits)
    index, rest = split_smallest_three(q.normalized())
    raws = [quantize_component(c, bits) for c in rest]
    return pack_bits([index, *raws], [2, bits, bits, bits])


def decode_quat_smallest_three(packed: int, bits: int) -> UnitQuat:
    _check_bits(bits)
    index, a, b, c = unpack_bits(packed, [2, bits, bits, bits])
    rest = (dequantize_component(a, bits), dequantize_component(b, bits), dequantize_component(c, bits))
    return reconstruct_from_smallest_three(index, rest)
