"""Synchronization-block sequence generators (PSS, SSS, Gold, PBCH DM-RS).

All generators are pure: identical inputs give bit-identical outputs. The
heavy Gold recurrence is evaluated in vectorized blocks of 28 bits, the
largest step allowed by the 31-stage register with its highest tap at +3.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .types import CellId, SYNC_SEQ_LEN

_GOLD_ADVANCE = 1600  # register run-in before the first output bit


@lru_cache(maxsize=None)
def _m_sequence(init: tuple[int, ...], tap: int) -> np.ndarray:
    """Length-127 binary m-sequence x(i+7) = (x(i+tap) + x(i)) mod 2."""
    x = np.zeros(SYNC_SEQ_LEN, dtype=np.int64)
    x[:7] = init
    for i in range(SYNC_SEQ_LEN - 7):
        x[i + 7] = x[i + tap] ^ x[i]
    x.setflags(write=False)
    return x


def gen_pss(n2: int) -> np.ndarray:
    """Primary synchronization sequence for sector index n2.

    Args:
        n2: PSS sector index, 0..2.

    Returns:
        127 BPSK values in {-1.0, +1.0}.
    """
    if n2 not in (0, 1, 2):
        raise ValueError(f"n2 must be in 0..2, got {n2}")
    x = _m_sequence((0, 1, 1, 0, 1, 1, 1), tap=4)
    m = (np.arange(SYNC_SEQ_LEN) + 43 * n2) % SYNC_SEQ_LEN
    return 1.0 - 2.0 * x[m]


def gen_sss(n1: int, n2: int) -> np.ndarray:
    """Secondary synchronization sequence for group n1 and sector n2.

    Args:
        n1: SSS group index, 0..335.
        n2: PSS sector index, 0..2.

    Returns:
        127 BPSK values in {-1.0, +1.0}, the product of the two shifted
        base m-sequences.
    """
    if not 0 <= n1 <= 335:
        raise ValueError(f"n1 must be in 0..335, got {n1}")
    if n2 not in (0, 1, 2):
        raise ValueError(f"n2 must be in 0..2, got {n2}")
    x0 = _m_sequence((1, 0, 0, 0, 0, 0, 0), tap=4)
    x1 = _m_sequence((1, 0, 0, 0, 0, 0, 0), tap=1)
    m0 = 15 * (n1 // 112) + 5 * n2
    m1 = n1 % 112
    n = np.arange(SYNC_SEQ_LEN)
    return (1.0 - 2.0 * x0[(n + m0) % SYNC_SEQ_LEN]) * (
        1.0 - 2.0 * x1[(n + m1) % SYNC_SEQ_LEN]
    )


def gen_gold(c_init: int, offset: int, length: int) -> np.ndarray:
    """Length-31 Gold bit sequence c(offset..offset+length-1).

    Args:
        c_init: 31-bit initializer of the second register (bit i of c_init
            seeds x2(i)).
        offset: index of the first output bit.
        length: number of output bits.

    Returns:
        uint8 array of bits in {0, 1}.
    """
    if not 0 <= c_init < 2**31:
        raise ValueError(f"c_init must be a 31-bit value, got {c_init}")
    if offset < 0:
        raise ValueError(f"offset must be >= 0, got {offset}")
    if length < 0:
        raise ValueError(f"length must be >= 0, got {length}")
    total = _GOLD_ADVANCE + offset + length
    x1 = np.zeros(total, dtype=np.uint8)
    x2 = np.zeros(total, dtype=np.uint8)
    x1[0] = 1
    x2[:31] = [(c_init >> i) & 1 for i in range(31)]
    filled = 31
    while filled < total:
        step = min(28, total - filled)
        n = np.arange(filled - 31, filled - 31 + step)
        x1[filled:filled + step] = x1[n + 3] ^ x1[n]
        x2[filled:filled + step] = x2[n + 3] ^ x2[n + 2] ^ x2[n + 1] ^ x2[n]
        filled += step
    start = _GOLD_ADVANCE + offset
    return x1[start:start + length] ^ x2[start:start + length]


def qpsk_from_bits(bits: np.ndarray) -> np.ndarray:
    """Map a bit sequence to unit-power QPSK symbols, two bits per symbol."""
    b = np.asarray(bits, dtype=np.float64)
    if b.size % 2:
        raise ValueError(f"bit count must be even, got {b.size}")
    return ((1.0 - 2.0 * b[0::2]) + 1j * (1.0 - 2.0 * b[1::2])) / np.sqrt(2.0)


def dmrs_c_init(cell: int, i_ssb_bar: int) -> int:
    """Gold initializer for the PBCH DM-RS of a cell and SSB index."""
    return (2**11 * (i_ssb_bar + 1) * (cell // 4 + 1)
            + 2**6 * (i_ssb_bar + 1)
            + cell % 4)


def gen_pbch_dmrs(cell_id: CellId, i_ssb_bar: int) -> np.ndarray:
    """PBCH demodulation reference sequence: 144 unit-magnitude QPSK symbols.

    Args:
        cell_id: cell identity selecting the scrambling.
        i_ssb_bar: SSB index used for scrambling, 0..7.
    """
    if not 0 <= i_ssb_bar < 8:
        raise ValueError(f"i_ssb_bar must be in 0..7, got {i_ssb_bar}")
    bits = gen_gold(dmrs_c_init(cell_id.cell, i_ssb_bar), 0, 288)
    return qpsk_from_bits(bits)
