"""Shared domain types for the synthesis/detection pipeline."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

N_SSB_SYMBOLS = 4
N_SSB_SUBCARRIERS = 240
SYNC_SEQ_LEN = 127
SYNC_FIRST_SUBCARRIER = 56  # first subcarrier of the 127-wide PSS/SSS band


@dataclass(frozen=True)
class CellId:
    """Physical cell identity, split into its SSS group and PSS sector parts.

    Attributes:
        n1: group index carried by the SSS (0..335)
        n2: sector index carried by the PSS (0..2)
    """

    n1: int
    n2: int

    def __post_init__(self):
        if not 0 <= self.n1 <= 335:
            raise ValueError(f"n1 must be in 0..335, got {self.n1}")
        if not 0 <= self.n2 <= 2:
            raise ValueError(f"n2 must be in 0..2, got {self.n2}")

    @property
    def cell(self) -> int:
        """Combined cell identity 3*n1 + n2 (0..1007)."""
        return 3 * self.n1 + self.n2

    @classmethod
    def from_cell(cls, cell: int) -> "CellId":
        if not 0 <= cell <= 1007:
            raise ValueError(f"cell must be in 0..1007, got {cell}")
        return cls(n1=cell // 3, n2=cell % 3)


@dataclass(frozen=True)
class OfdmParams:
    """CP-OFDM numerology: subcarrier spacing 15*2**mu kHz, transform size, CP length."""

    mu: int = 1
    fft_size: int = 256
    cp_len: int = 18

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if self.fft_size < 1 or self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.cp_len < 0:
            raise ValueError(f"cp_len must be >= 0, got {self.cp_len}")

    @property
    def scs(self) -> float:
        """Subcarrier spacing in Hz."""
        return 15e3 * 2**self.mu

    @property
    def sample_rate(self) -> float:
        return self.fft_size * self.scs

    @property
    def symbol_len(self) -> int:
        """Samples per OFDM symbol including the cyclic prefix."""
        return self.fft_size + self.cp_len


@dataclass(frozen=True)
class SsbConfig:
    """Configuration of a synthesized SSB burst set.

    burst_period is in samples; it must cover one whole SSB (4 OFDM symbols)
    when more than one burst is requested, which is checked at synthesis time
    where the numerology is known.
    """

    cell_id: CellId
    i_ssb_bar: int = 0
    l_max: int = 8
    burst_count: int = 1
    burst_period: int = 0
    re_power: float = 1.0

    def __post_init__(self):
        if self.l_max not in (4, 8):
            raise ValueError(f"l_max must be 4 or 8, got {self.l_max}")
        if not 0 <= self.i_ssb_bar < self.l_max:
            raise ValueError(
                f"i_ssb_bar must be in 0..{self.l_max - 1}, got {self.i_ssb_bar}"
            )
        if self.burst_count < 0:
            raise ValueError(f"burst_count must be >= 0, got {self.burst_count}")
        if self.burst_period < 0:
            raise ValueError(f"burst_period must be >= 0, got {self.burst_period}")
        if not self.re_power > 0:
            raise ValueError(f"re_power must be > 0, got {self.re_power}")


@dataclass
class ResourceGrid:
    """Complex symbol-by-subcarrier grid with per-signal-class occupancy masks.

    data has shape (n_symbols, n_subcarriers). layout maps a signal-class name
    ("pss", "sss", "dmrs", "pbch") to a boolean mask of the same shape; cells
    outside every mask are empty and hold exact zeros in a freshly mapped grid.
    """

    data: np.ndarray
    layout: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2:
            raise ValueError(f"grid data must be 2-D, got shape {self.data.shape}")
        for name, mask in self.layout.items():
            if mask.shape != self.data.shape:
                raise ValueError(f"layout mask {name!r} shape {mask.shape} "
                                 f"does not match grid shape {self.data.shape}")

    @property
    def n_symbols(self) -> int:
        return self.data.shape[0]

    @property
    def n_subcarriers(self) -> int:
        return self.data.shape[1]

    @property
    def occupied_mask(self) -> np.ndarray:
        """Union of all layout masks (empty layout means nothing is declared occupied)."""
        mask = np.zeros(self.data.shape, dtype=bool)
        for m in self.layout.values():
            mask |= m
        return mask


@dataclass
class IqCapture:
    """Time-domain complex baseband samples with acquisition metadata.

    scale relates file units to the working amplitude units; samples are
    always held in working units.
    """

    samples: np.ndarray
    sample_rate: float
    center_freq: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {self.samples.shape}")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain non-finite values")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate
