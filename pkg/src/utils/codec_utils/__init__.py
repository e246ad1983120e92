from .bit_packing import pack_bits, unpack_bits
from .smallest_three import (
    COMPONENT_LIMIT,
    MAX_BITS,
    MIN_BITS,
    decode_quat_smallest_three,
    dequantize_component,
    encode_quat_smallest_three,
    quantize_component,
    reconstruct_from_smallest_three,
    split_smallest_three,
)

__all__ = [
    "COMPONENT_LIMIT",
    "MAX_BITS",
    "MIN_BITS",
    "decode_quat_smallest_three",
    "dequantize_component",
    "encode_quat_smallest_three",
    "pack_bits",
    "quantize_component",
    "reconstruct_from_smallest_three",
    "split_smallest_three",
    "unpack_bits",
]
