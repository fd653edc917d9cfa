"""FMCW MIMO radar configuration and the resolutions it implies.

The default configuration reproduces the sensing characteristics of a
77 GHz cascade imaging radar: 12 TX x 16 RX virtual array, 64 chirps per
frame, 4.5 cm range resolution, 3.9 cm/s velocity resolution, and angle
resolutions of roughly 1.4 deg (azimuth) / 19 deg (elevation).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

from scipy.constants import c as SPEED_OF_LIGHT

from .errors import ConfigurationError, ValidationError

CONFIG_FORMAT_VERSION = 1


def default_virtual_array(tx_count: int = 12, rx_count: int = 16) -> tuple[tuple[int, int], ...]:
    """Virtual element offsets (azimuth_index, elevation_index) in half-wavelength units.

    For the default 12x16 layout the TX elements are split into an azimuth
    group (5 TX spaced one RX-row apart, giving a contiguous 80-element
    azimuth aperture) and an elevation group (7 TX on rows 1..5) whose
    azimuth offsets are staggered across the aperture. The stagger keeps
    the columnwise element-count taper nearly flat, so the boresight
    azimuth beam stays close to the uniform 80-element pattern instead of
    being dominated by one crowded block. All 192 virtual positions are
    distinct. Other antenna counts fall back to a plain azimuth-only
    arrangement.
    """
    rx = [(i, 0) for i in range(rx_count)]
    if (tx_count, rx_count) == (12, 16):
        tx = [
            (0, 0), (16, 0), (32, 0), (48, 0), (64, 0),
            (0, 1), (16, 1), (32, 2), (48, 2), (64, 3),
            (16, 4), (48, 5),
        ]
    else:
        tx = [(k * rx_count, 0) for k in range(tx_count)]
    virtual = []
    for taz, tel in tx:
        for raz, rel in rx:
            virtual.append((taz + raz, tel + rel))
    return tuple(virtual)


@dataclass(frozen=True)
class RadarConfig:
    """Sweep, antenna, and chirp parameters of the simulated radar.

    ``sweep_bandwidth`` is the bandwidth spanned while the ADC samples a
    chirp (the quantity that sets range resolution); the hardware ramp may
    sweep further. The default of 3.331 GHz yields the 4.5 cm range
    resolution of a 77-81 GHz sensor whose ramp is only partially sampled.
    ``chirp_repetition_interval`` is the time between chirps of the same
    TX element (the TDM loop interval when ``tdm_mimo`` is on).
    """

    start_frequency: float = 77e9
    sweep_bandwidth: float = 3.331e9
    frequency_slope: float = 55.5e12
    samples_per_chirp: int = 256
    chirps_per_frame: int = 64
    tx_count: int = 12
    rx_count: int = 16
    chirp_repetition_interval: float = 7.8e-4
    frame_rate: float = 10.0
    tdm_mimo: bool = True
    antenna_positions: tuple[tuple[int, int], ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        scalar_fields = {
            "start_frequency": self.start_frequency,
            "sweep_bandwidth": self.sweep_bandwidth,
            "frequency_slope": self.frequency_slope,
            "samples_per_chirp": self.samples_per_chirp,
            "chirps_per_frame": self.chirps_per_frame,
            "tx_count": self.tx_count,
            "rx_count": self.rx_count,
            "chirp_repetition_interval": self.chirp_repetition_interval,
            "frame_rate": self.frame_rate,
        }
        for name, value in scalar_fields.items():
            if not value > 0:
                raise ConfigurationError(f"{name} must be positive, got {value!r}")
        if self.antenna_positions is None:
            object.__setattr__(
                self, "antenna_positions", default_virtual_array(self.tx_count, self.rx_count)
            )
        positions = tuple((int(a), int(e)) for a, e in self.antenna_positions)
        object.__setattr__(self, "antenna_positions", positions)
        if len(positions) != self.virtual_count:
            raise ConfigurationError(
                f"expected {self.virtual_count} virtual antenna positions, got {len(positions)}"
            )
        if len(set(positions)) != len(positions):
            raise ConfigurationError("virtual antenna positions must be distinct")
        if self.sample_window > self.chirp_repetition_interval / (
            self.tx_count if self.tdm_mimo else 1
        ):
            raise ConfigurationError(
                "chirp sampling window does not fit into the chirp repetition interval"
            )

    # -- derived quantities -------------------------------------------------

    @property
    def virtual_count(self) -> int:
        return self.tx_count * self.rx_count

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.start_frequency

    @property
    def sample_window(self) -> float:
        """Time the ADC spends sampling one chirp."""
        return self.sweep_bandwidth / self.frequency_slope

    @property
    def sample_spacing(self) -> float:
        return self.sample_window / self.samples_per_chirp

    @property
    def range_resolution(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.sweep_bandwidth)

    @property
    def velocity_resolution(self) -> float:
        return self.wavelength / (
            2.0 * self.chirps_per_frame * self.chirp_repetition_interval
        )

    @property
    def max_range(self) -> float:
        return self.samples_per_chirp * self.range_resolution

    @property
    def max_unambiguous_speed(self) -> float:
        return (self.chirps_per_frame // 2) * self.velocity_resolution

    def aperture_extents(self) -> tuple[int, int]:
        """(azimuth, elevation) aperture spans in half-wavelength cells."""
        az = [p[0] for p in self.antenna_positions]
        el = [p[1] for p in self.antenna_positions]
        return (max(az) - min(az) + 1, max(el) - min(el) + 1)

    def tx_index(self, virtual_index: int) -> int:
        """TX element that feeds a virtual channel (tx-major ordering)."""
        return virtual_index // self.rx_count

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        pos = ";".join(f"{a}:{e}" for a, e in self.antenna_positions)
        lines = [
            f"format_version = {CONFIG_FORMAT_VERSION}",
            f"start_frequency_hz = {self.start_frequency!r}",
            f"sweep_bandwidth_hz = {self.sweep_bandwidth!r}",
            f"frequency_slope_hz_per_s = {self.frequency_slope!r}",
            f"samples_per_chirp = {self.samples_per_chirp}",
            f"chirps_per_frame = {self.chirps_per_frame}",
            f"tx_count = {self.tx_count}",
            f"rx_count = {self.rx_count}",
            f"chirp_repetition_interval_s = {self.chirp_repetition_interval!r}",
            f"frame_rate_hz = {self.frame_rate!r}",
            f"tdm_mimo = {'true' if self.tdm_mimo else 'false'}",
            f"antenna_positions = {pos}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RadarConfig":
        kv = parse_key_values(text)
        version = int(kv.pop("format_version", "0"))
        if version != CONFIG_FORMAT_VERSION:
            raise ValidationError(f"unsupported radar config format_version {version}")
        try:
            positions = tuple(
                tuple(int(x) for x in pair.split(":"))
                for pair in kv["antenna_positions"].split(";")
                if pair
            )
            return cls(
                start_frequency=float(kv["start_frequency_hz"]),
                sweep_bandwidth=float(kv["sweep_bandwidth_hz"]),
                frequency_slope=float(kv["frequency_slope_hz_per_s"]),
                samples_per_chirp=int(kv["samples_per_chirp"]),
                chirps_per_frame=int(kv["chirps_per_frame"]),
                tx_count=int(kv["tx_count"]),
                rx_count=int(kv["rx_count"]),
                chirp_repetition_interval=float(kv["chirp_repetition_interval_s"]),
                frame_rate=float(kv["frame_rate_hz"]),
                tdm_mimo=kv.get("tdm_mimo", "true").lower() == "true",
                antenna_positions=positions,  # type: ignore[arg-type]
            )
        except KeyError as exc:
            raise ValidationError(f"radar config missing key {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "RadarConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    def with_overrides(self, **kwargs) -> "RadarConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ResolutionReport:
    range_res: float
    velocity_res: float
    azimuth_res_deg: float
    elevation_res_deg: float


def derive_resolutions(config: RadarConfig) -> ResolutionReport:
    """Closed-form FMCW resolutions for a configuration.

    Range: c/(2B). Velocity: lambda/(2 N_chirp T_chirp). Angles: ~2/N radians
    for an N-cell half-wavelength aperture.
    """
    az_extent, el_extent = config.aperture_extents()
    return ResolutionReport(
        range_res=config.range_resolution,
        velocity_res=config.velocity_resolution,
        azimuth_res_deg=math.degrees(2.0 / az_extent),
        elevation_res_deg=math.degrees(2.0 / el_extent),
    )


def parse_key_values(text: str) -> dict[str, str]:
    """Parse a simple `key = value` config file; '#' starts a comment."""
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"malformed config line: {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out
