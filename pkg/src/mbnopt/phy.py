"""Band-aware physical layer: channel grid, first-span SNR, margins, capacity.

The quality-of-transmission chain works in three stages:

1. A fully loaded fixed-grid spectrum (channel spacing equal to the baud
   rate) is evaluated channel by channel after the first span: amplified
   spontaneous emission plus incoherent Gaussian-noise nonlinear
   interference, with stimulated-Raman power transfer between channels
   folded into an effective attenuation tilt (high-frequency channels are
   depleted, low-frequency channels see gain).
2. Each optical band (U, L, C in ascending frequency) is summarized by its
   worst-case channel SNR after one span. Band SNR bases are
   configuration-first: the GN chain is an optional estimator that can
   overwrite the configured defaults.
3. Path SNR over N spans follows the dB law  snr1_db - 10*log10(N) - margin,
   and the highest-order modulation format whose SNR threshold is met sets
   the capacity  C = spectral_efficiency * baud_rate.

All per-channel math is in linear units; span scaling and margins are pure
dB arithmetic. Everything here is a pure function over frozen records.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .topology import CandidateRoute, NetworkTopology

PLANCK_H = 6.62607015e-34  # J*s

BANDS = ("U", "L", "C")  # ascending center frequency


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class ChannelGrid:
    """Fixed-grid channel plan over the usable spectrum.

    Channel offsets are symmetric about the center frequency; band index
    ranges partition the ``channel_count`` channels contiguously in
    ascending frequency order U, L, C.
    """

    baud_rate: float  # Hz; channel spacing equals the baud rate
    total_bandwidth: float  # Hz
    center_frequency: float  # Hz
    channel_count: int
    channel_offsets: Tuple[float, ...]  # Hz, ascending
    band_partition: Dict[str, range]

    @property
    def channel_spacing(self) -> float:
        return self.baud_rate

    def band_of(self, w: int) -> str:
        """Band id of 1-based channel index ``w``."""
        for band, rng in self.band_partition.items():
            if w - 1 in rng:
                return band
        raise IndexError(f"channel index {w} out of range 1..{self.channel_count}")

    def band_channels(self, band: str) -> range:
        """0-based index range of a band."""
        return self.band_partition[band]

    def band_size(self, band: str) -> int:
        return len(self.band_partition[band])

    def band_index_range(self, band: str) -> Tuple[int, int]:
        """1-based inclusive (first, last) wavelength indices of a band."""
        rng = self.band_partition[band]
        return rng.start + 1, rng.stop


def build_grid(
    baud_rate: float,
    total_bandwidth: float = 15e12,
    center_frequency: float = 190.9e12,
    bands: Sequence[str] = BANDS,
) -> ChannelGrid:
    """Construct the channel grid for a given transceiver baud rate.

    The channel count is floor(total_bandwidth / baud_rate). When it is not
    divisible by the number of bands, the remainder channels go to C first,
    then L, so the per-band budgets always sum to the total.
    """
    if baud_rate <= 0:
        raise ValueError("baud rate must be positive")
    if total_bandwidth <= 0:
        raise ValueError("total bandwidth must be positive")
    count = int(total_bandwidth // baud_rate)
    if count < 1:
        raise ValueError("grid holds no channels at this baud rate")
    # Symmetric comb around the center frequency.
    offsets = tuple((w - (count + 1) / 2.0) * baud_rate for w in range(1, count + 1))

    base, rem = divmod(count, len(bands))
    sizes = {band: base for band in bands}
    for band in ("C", "L", "U")[:rem]:
        sizes[band] += 1
    partition: Dict[str, range] = {}
    start = 0
    for band in bands:
        partition[band] = range(start, start + sizes[band])
        start += sizes[band]
    return ChannelGrid(
        baud_rate=float(baud_rate),
        total_bandwidth=float(total_bandwidth),
        center_frequency=float(center_frequency),
        channel_count=count,
        channel_offsets=offsets,
        band_partition=partition,
    )


@dataclass(frozen=True)
class GnParams:
    """Fiber and amplifier constants for the first-span SNR evaluation.

    ``attenuation`` and ``nonlinear_coeff`` may be flat floats or per-channel
    tables (tuple aligned with the grid). ``psd`` is the launch power
    spectral density; per-channel power is psd * channel spacing.
    """

    span_length_km: float = 80.0
    attenuation_db_km: float | Tuple[float, ...] = 0.2  # dB/km, power
    raman_slope: float = 2.8e-14  # 1/(W*km*Hz), linear-tilt ISRS slope
    raman_cutoff: float = 15e12  # Hz; tilt saturates beyond +-cutoff
    noise_figure_db: float = 5.0
    planck: float = PLANCK_H
    beta2_ps2_km: float = -21.7  # group velocity dispersion
    nonlinear_coeff: float | Tuple[float, ...] = 1.2  # 1/(W*km)
    psd: float = 14e-6 / 1e9  # W/Hz (14 uW/GHz)
    isrs_enabled: bool = True

    def channel_power(self, grid: ChannelGrid) -> float:
        """Uniform per-channel launch power P0 = psd * channel spacing (W)."""
        return self.psd * grid.channel_spacing

    def total_power(self, grid: ChannelGrid) -> float:
        return grid.channel_count * self.channel_power(grid)

    def alpha_per_km(self, w: int) -> float:
        """Power attenuation of channel w in 1/km."""
        a = self.attenuation_db_km
        a_db = a[w - 1] if isinstance(a, tuple) else a
        return a_db * math.log(10.0) / 10.0

    def gamma(self, w: int) -> float:
        g = self.nonlinear_coeff
        return g[w - 1] if isinstance(g, tuple) else g


def effective_attenuation(params: GnParams, grid: ChannelGrid, w: int) -> Tuple[float, float]:
    """Effective attenuation (1/km) and effective length (km) of channel w.

    Stimulated-Raman power transfer over one span is approximated by a log
    power tilt linear in the channel offset with slope ``raman_slope``,
    saturating at +-``raman_cutoff``. The tilt is folded into the attenuation
    coefficient so that the first-span output power reproduces it: channels
    above the center frequency are depleted (larger effective attenuation),
    channels below it see Raman gain.
    """
    if not 1 <= w <= grid.channel_count:
        raise IndexError(f"channel index {w} out of range 1..{grid.channel_count}")
    alpha = params.alpha_per_km(w)
    if params.isrs_enabled:
        f_w = grid.channel_offsets[w - 1]
        f_clipped = max(-params.raman_cutoff, min(params.raman_cutoff, f_w))
        tilt = 0.5 * params.total_power(grid) * params.raman_slope * f_clipped  # 1/km
        alpha_eff = alpha + tilt
        if alpha_eff <= 0:
            raise ValueError(
                "ISRS tilt exceeds fiber attenuation; lower psd or raman_slope"
            )
    else:
        alpha_eff = alpha
    l_eff = (1.0 - math.exp(-alpha_eff * params.span_length_km)) / alpha_eff
    return alpha_eff, l_eff


def ase_power(params: GnParams, grid: ChannelGrid, w: int) -> float:
    """Amplified-spontaneous-emission power (W) added to channel w per span.

    The amplifier gain exactly compensates the span loss of the channel, so
    the ASE scales with exp(alpha_eff * span_length).
    """
    alpha_eff, _ = effective_attenuation(params, grid, w)
    gain = math.exp(alpha_eff * params.span_length_km)
    nf = db_to_linear(params.noise_figure_db)
    freq = grid.center_frequency + grid.channel_offsets[w - 1]
    return gain * nf * grid.baud_rate * params.planck * freq


def nli_coefficient(params: GnParams, grid: ChannelGrid, w: int) -> float:
    """Incoherent-GN nonlinear interference coefficient (1/W^2) of channel w."""
    if params.beta2_ps2_km == 0:
        raise ValueError("beta2 must be nonzero for the GN coefficient")
    alpha_eff, l_eff = effective_attenuation(params, grid, w)
    beta2 = abs(params.beta2_ps2_km) * 1e-24 / 1e3  # ps^2/km -> s^2/m
    alpha_m = alpha_eff / 1e3  # 1/km -> 1/m
    l_eff_m = l_eff * 1e3
    gamma_m = params.gamma(w) / 1e3  # 1/(W*km) -> 1/(W*m)
    asinh_arg = math.pi**2 * beta2 * grid.total_bandwidth**2 / (2.0 * alpha_m)
    return (
        (8.0 / 27.0)
        * gamma_m**2
        * alpha_m
        * l_eff_m**2
        * math.asinh(asinh_arg)
        / (math.pi * beta2 * grid.baud_rate**2)
    )


def first_span_snr(params: GnParams, grid: ChannelGrid, w: int) -> float:
    """Linear SNR of channel w after the first span: P0/(P_ase + eta*P0^3)."""
    p0 = params.channel_power(grid)
    if p0 <= 0:
        raise ValueError("channel power must be positive")
    return p0 / (ase_power(params, grid, w) + nli_coefficient(params, grid, w) * p0**3)


def band_worst_snr(params: GnParams, grid: ChannelGrid, band: str) -> float:
    """Worst-case (minimum) first-span SNR over a band's channels, in dB."""
    channels = grid.band_channels(band)
    if len(channels) == 0:
        raise ValueError(f"band {band!r} holds no channels on this grid")
    worst = min(first_span_snr(params, grid, w + 1) for w in channels)
    return linear_to_db(worst)


def path_snr_db(snr1_db: float, span_total: int, margin_db: float = 0.0) -> float:
    """SNR after N spans: first-span SNR minus 10*log10(N) minus the margin."""
    if span_total < 1:
        raise ValueError("span count must be >= 1")
    return snr1_db - 10.0 * math.log10(span_total) - margin_db


@dataclass(frozen=True)
class ModulationFormat:
    name: str
    spectral_efficiency: float  # bit/s/Hz
    required_snr_db: float


@dataclass(frozen=True)
class ModulationTable:
    """Candidate formats ordered by increasing rate and SNR requirement."""

    formats: Tuple[ModulationFormat, ...]

    def __post_init__(self):
        se = [f.spectral_efficiency for f in self.formats]
        snr = [f.required_snr_db for f in self.formats]
        if sorted(se) != se or len(set(se)) != len(se):
            raise ValueError("spectral efficiencies must be strictly increasing")
        if sorted(snr) != snr or len(set(snr)) != len(snr):
            raise ValueError("required SNRs must be strictly increasing")

    def __len__(self) -> int:
        return len(self.formats)

    def prefix(self, n_formats: int) -> "ModulationTable":
        """Restrict to the lowest ``n_formats`` formats."""
        if not 1 <= n_formats <= len(self.formats):
            raise ValueError(f"prefix length must be in 1..{len(self.formats)}")
        return ModulationTable(self.formats[:n_formats])


DEFAULT_MODULATIONS = ModulationTable(
    (
        ModulationFormat("PM-BPSK", 1.6, 3.7),
        ModulationFormat("PM-QPSK", 3.1, 6.7),
        ModulationFormat("PM-8QAM", 4.7, 10.8),
        ModulationFormat("PM-16QAM", 6.3, 13.2),
        ModulationFormat("PM-32QAM", 7.8, 16.2),
        ModulationFormat("PM-64QAM", 9.4, 19.0),
        ModulationFormat("PM-128QAM", 10.9, 21.8),
        ModulationFormat("PM-256QAM", 12.5, 24.7),
    )
)


def select_modulation(table: ModulationTable, snr_db: float) -> Optional[ModulationFormat]:
    """Highest-order format whose SNR requirement is met, or None."""
    chosen = None
    for fmt in table.formats:
        if fmt.required_snr_db <= snr_db:
            chosen = fmt
        else:
            break
    return chosen


@dataclass(frozen=True)
class BandSpec:
    """Per-band SNR basis, margin, and wavelength budget."""

    band: str
    width: float  # Hz
    first_span_snr_db: float
    margin_db: float
    wavelength_budget: int


# Configured worst-case first-span SNR per band, and the margins that
# flatten all bands onto the C-band basis when bands are not differentiated.
DEFAULT_BAND_SNR_DB = {"U": 24.8, "L": 24.5, "C": 20.4}
DEFAULT_RWA_MARGIN_DB = {"U": 4.4, "L": 4.1, "C": 0.0}
DEFAULT_BAND_WIDTH = 5e12


@dataclass(frozen=True)
class PhyConfig:
    """Physical-layer configuration: GN constants plus band SNR bases.

    ``band_snr_db`` is authoritative for network optimization; set
    ``estimate_band_snr`` to derive it from the GN chain instead.
    """

    gn: GnParams = GnParams()
    band_snr_db: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_BAND_SNR_DB))
    rwa_margin_db: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_RWA_MARGIN_DB))
    band_width: float = DEFAULT_BAND_WIDTH
    modulations: ModulationTable = DEFAULT_MODULATIONS
    estimate_band_snr: bool = False

    def band_specs(self, grid: ChannelGrid, mode: str) -> List[BandSpec]:
        """Resolve the per-band SNR/margin/budget set for RWA or RWBA.

        RWBA uses each band's own SNR basis with no margin; RWA applies the
        flattening margins so every band works at the common worst basis.
        """
        if mode not in ("RWA", "RWBA"):
            raise ValueError(f"unknown mode {mode!r}")
        specs = []
        for band in BANDS:
            snr = (
                band_worst_snr(self.gn, grid, band)
                if self.estimate_band_snr
                else self.band_snr_db[band]
            )
            margin = self.rwa_margin_db[band] if mode == "RWA" else 0.0
            specs.append(
                BandSpec(
                    band=band,
                    width=self.band_width,
                    first_span_snr_db=snr,
                    margin_db=margin,
                    wavelength_budget=grid.band_size(band),
                )
            )
        return specs


def load_phy_config(path) -> PhyConfig:
    """Read a PhyConfig from a TOML or JSON file; absent keys keep defaults."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    else:
        with open(path) as fh:
            doc = json.load(fh)
    gn_doc = doc.get("gn", {})
    for key in ("attenuation_db_km", "nonlinear_coeff"):
        if isinstance(gn_doc.get(key), list):
            gn_doc[key] = tuple(gn_doc[key])
    gn = replace(GnParams(), **gn_doc)
    table = DEFAULT_MODULATIONS
    if "modulations" in doc:
        table = ModulationTable(
            tuple(ModulationFormat(m["name"], m["spectral_efficiency"], m["required_snr_db"]) for m in doc["modulations"])
        )
    return PhyConfig(
        gn=gn,
        band_snr_db={**DEFAULT_BAND_SNR_DB, **doc.get("band_snr_db", {})},
        rwa_margin_db={**DEFAULT_RWA_MARGIN_DB, **doc.get("rwa_margin_db", {})},
        band_width=doc.get("band_width", DEFAULT_BAND_WIDTH),
        modulations=table,
        estimate_band_snr=doc.get("estimate_band_snr", False),
    )


@dataclass(frozen=True)
class CapacityMatrix:
    """Max transmission capacity per (source, destination, route rank, band).

    ``per_band`` holds the band-differentiated capacities used by RWBA;
    ``flat`` is the RWA view where all bands share the worst-case basis.
    Entries are 0 when even the lowest-order format's SNR is unmet. ``get``
    dispatches on the mode the instance is solved in.
    """

    mode: str  # "RWA" | "RWBA"
    per_band: Dict[Tuple[str, str, int], Dict[str, float]]
    flat: Dict[Tuple[str, str, int], float]
    baud_rate: float

    def get(self, s: str, d: str, k: int, band: str) -> float:
        if self.mode == "RWA":
            return self.flat[(s, d, k)]
        return self.per_band[(s, d, k)][band]

    def min_positive(self) -> float:
        """Smallest nonzero capacity over the active view (loading unit)."""
        if self.mode == "RWA":
            values = [c for c in self.flat.values() if c > 0]
        else:
            values = [c for by_band in self.per_band.values() for c in by_band.values() if c > 0]
        if not values:
            raise ValueError("capacity matrix has no positive entries")
        return min(values)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["s", "d", "k", "band", "capacity_bps"])
            for (s, d, k), by_band in sorted(self.per_band.items()):
                for band in BANDS:
                    cap = self.flat[(s, d, k)] if self.mode == "RWA" else by_band[band]
                    writer.writerow([s, d, k, band, f"{cap:.6g}"])


def capacity_matrix(
    routes: Dict[Tuple[str, str], List[CandidateRoute]],
    band_specs: Sequence[BandSpec],
    grid: ChannelGrid,
    table: ModulationTable,
    mode: str,
    formats_allowed: Optional[int] = None,
) -> CapacityMatrix:
    """Per-path capacities from the span-scaled SNR and the format table.

    ``formats_allowed`` restricts the table to its first n entries (fixed
    single-format baseline at 1, full flexible set at len(table)).
    """
    if formats_allowed is not None:
        table = table.prefix(formats_allowed)
    per_band: Dict[Tuple[str, str, int], Dict[str, float]] = {}
    flat: Dict[Tuple[str, str, int], float] = {}
    flat_basis = min(spec.first_span_snr_db - spec.margin_db for spec in band_specs)
    for (s, d), route_list in routes.items():
        for route in route_list:
            key = (s, d, route.route_index)
            by_band = {}
            for spec in band_specs:
                snr = path_snr_db(spec.first_span_snr_db, route.span_total, spec.margin_db)
                fmt = select_modulation(table, snr)
                by_band[spec.band] = fmt.spectral_efficiency * grid.baud_rate if fmt else 0.0
            per_band[key] = by_band
            fmt = select_modulation(table, path_snr_db(flat_basis, route.span_total))
            flat[key] = fmt.spectral_efficiency * grid.baud_rate if fmt else 0.0
    return CapacityMatrix(mode=mode, per_band=per_band, flat=flat, baud_rate=grid.baud_rate)
