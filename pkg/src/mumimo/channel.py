"""Per-tone MU-MIMO channel generation, antenna correlation, and transmission.

The receiver side always sees a 2-antenna terminal and two co-scheduled
single-stream users, so every channel here is a 2x2 matrix ``[h1 h2]`` whose
columns are the effective (precoder-cascaded) channels of the desired and
interfering user.  Array-level generators (``*_matrices``) produce stacks of
such matrices for vectorized Monte-Carlo; the object-level wrappers return
:class:`ToneChannel` lists for single-block work.

All generators are pure functions of their parameters and an explicit
``numpy.random.Generator``, which is what makes every experiment replayable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import Constellation

N_RX = 2  # receive antennas; the simulator is specialized to the 2x2 case


@dataclass(frozen=True, eq=False)
class ToneChannel:
    """Effective per-tone channel columns for the desired and interfering user."""

    h1: np.ndarray              # (2,) complex
    h2: np.ndarray              # (2,) complex
    tone_index: int = 0

    @property
    def matrix(self) -> np.ndarray:
        return np.stack([self.h1, self.h2], axis=-1)


@dataclass(frozen=True, eq=False)
class ToneObservation:
    """Received 2-vector plus the channel and noise level it was produced with."""

    y: np.ndarray               # (2,) complex
    chan: ToneChannel
    noise_var: float            # per-antenna noise variance; R = noise_var * I2

    def __post_init__(self):
        if not self.noise_var > 0:
            raise ValueError(f"noise_var must be positive, got {self.noise_var}")


@dataclass(frozen=True)
class MultipathProfile:
    """Tapped-delay-line profile: delays in seconds, linear powers summing to 1."""

    name: str
    delays: tuple[float, ...]
    powers: tuple[float, ...]

    def __post_init__(self):
        d = np.asarray(self.delays)
        p = np.asarray(self.powers)
        if d.size != p.size or d.size == 0:
            raise ValueError("delays and powers must be equal-length and non-empty")
        if np.any(d < 0) or np.any(np.diff(d) < 0):
            raise ValueError("delays must be non-negative and ascending")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"powers must sum to 1, got {p.sum()!r}")


def _itu_profile(name: str, delays_ns, powers_db) -> MultipathProfile:
    p = 10.0 ** (np.asarray(powers_db) / 10.0)
    p = p / p.sum()
    return MultipathProfile(name=name,
                            delays=tuple(1e-9 * np.asarray(delays_ns, dtype=float)),
                            powers=tuple(p))


#: Single-tap flat-fading profile (frequency-constant response per block).
FLAT = MultipathProfile(name="flat", delays=(0.0,), powers=(1.0,))
#: ITU-R M.1225 Pedestrian-A, renormalized to unit total power.
PED_A = _itu_profile("peda", [0, 110, 190, 410], [0.0, -9.7, -19.2, -22.8])
#: ITU-R M.1225 Pedestrian-B, renormalized to unit total power.
PED_B = _itu_profile("pedb", [0, 200, 800, 1200, 2300, 3700],
                     [0.0, -0.9, -4.9, -8.0, -7.8, -23.9])

_PROFILES = {"flat": FLAT, "peda": PED_A, "pedb": PED_B}


def profile_by_name(name: str) -> MultipathProfile:
    try:
        return _PROFILES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown multipath profile {name!r} "
                         f"(expected one of {sorted(_PROFILES)})") from None


@dataclass(frozen=True)
class CorrelationSpec:
    """Kronecker antenna-correlation coefficients (transmit side, receive side)."""

    rho_t: float = 0.0
    rho_r: float = 0.0
    allow_full: bool = False    # rho == 1 makes the square root rank-deficient

    def __post_init__(self):
        hi = 1.0 if self.allow_full else np.nextafter(1.0, 0.0)
        for field_name, rho in (("rho_t", self.rho_t), ("rho_r", self.rho_r)):
            if not 0.0 <= rho <= hi:
                raise ValueError(f"{field_name} must be in [0, 1), got {rho}")


# ---------------------------------------------------------------------------
# array-level generators
# ---------------------------------------------------------------------------

def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian draws with E|x|^2 = var."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def iid_channel_matrices(n_tones: int, rng: np.random.Generator,
                         n_blocks: int | None = None) -> np.ndarray:
    """CN(0,1) entries, independent across tones, antennas, users.

    Returns ``(n_tones, 2, 2)`` or ``(n_blocks, n_tones, 2, 2)`` when
    ``n_blocks`` is given.
    """
    shape = (n_tones, N_RX, 2) if n_blocks is None else (n_blocks, n_tones, N_RX, 2)
    return complex_normal(rng, shape)


def multipath_channel_matrices(profile: MultipathProfile, n_tones: int,
                               tone_spacing_hz: float, rng: np.random.Generator,
                               n_blocks: int | None = None) -> np.ndarray:
    """Block-fading frequency response of a tapped-delay-line channel.

    One complex Gaussian tap per delay per antenna-user pair, held fixed over
    the block; the response at tone k is sum_l a_l * exp(-2j*pi*k*spacing*tau_l).
    """
    squeeze = n_blocks is None
    nb = 1 if squeeze else n_blocks
    powers = np.asarray(profile.powers)
    delays = np.asarray(profile.delays)
    taps = complex_normal(rng, (nb, delays.size, N_RX, 2))
    taps *= np.sqrt(powers)[None, :, None, None]
    freqs = np.arange(n_tones) * tone_spacing_hz
    phase = np.exp(-2j * np.pi * np.outer(delays, freqs))       # (taps, tones)
    h = np.einsum("bluv,lt->btuv", taps, phase)
    return h[0] if squeeze else h


def correlation_sqrt(rho: float) -> np.ndarray:
    """Symmetric square root of [[1, rho], [rho, 1]]."""
    a = (np.sqrt(1.0 + rho) + np.sqrt(1.0 - rho)) / 2.0
    b = (np.sqrt(1.0 + rho) - np.sqrt(1.0 - rho)) / 2.0
    return np.array([[a, b], [b, a]])


def apply_correlation_matrices(h: np.ndarray, spec: CorrelationSpec) -> np.ndarray:
    """Kronecker correlation ``Rt^(1/2) @ H @ Rr^(1/2)`` over stacked 2x2 matrices."""
    if spec.rho_t == 0.0 and spec.rho_r == 0.0:
        return h
    rt = correlation_sqrt(spec.rho_t)
    rr = correlation_sqrt(spec.rho_r)
    return np.einsum("ij,...jk,kl->...il", rt, h, rr)


# ---------------------------------------------------------------------------
# object-level wrappers
# ---------------------------------------------------------------------------

def _to_tone_channels(h: np.ndarray) -> list[ToneChannel]:
    return [ToneChannel(h1=h[i, :, 0].copy(), h2=h[i, :, 1].copy(), tone_index=i)
            for i in range(h.shape[0])]


def gen_iid_block(n_tones: int, rng: np.random.Generator) -> list[ToneChannel]:
    """i.i.d. Rayleigh tones: every channel entry CN(0,1), fresh per tone."""
    if n_tones == 0:
        return []
    return _to_tone_channels(iid_channel_matrices(n_tones, rng))


def gen_multipath(profile: MultipathProfile, n_tones: int, tone_spacing_hz: float,
                  rng: np.random.Generator) -> list[ToneChannel]:
    """Block-fading multipath tones (taps drawn once, shared by all tones)."""
    if n_tones == 0:
        return []
    return _to_tone_channels(
        multipath_channel_matrices(profile, n_tones, tone_spacing_hz, rng))


def apply_correlation(chan: ToneChannel, spec: CorrelationSpec) -> ToneChannel:
    """Apply Kronecker antenna correlation to one tone's channel matrix."""
    h = apply_correlation_matrices(chan.matrix, spec)
    return ToneChannel(h1=h[:, 0], h2=h[:, 1], tone_index=chan.tone_index)


def transmit(chan: ToneChannel, x1: complex, x2: complex, sir_scale: float,
             noise_var: float, rng: np.random.Generator) -> ToneObservation:
    """One-tone transmission ``y = h1*x1 + sir_scale*h2*x2 + n``.

    ``sir_scale`` is an amplitude multiplier on the interferer column; with
    unit-energy alphabets, 1.0 means a 0 dB signal-to-interference ratio.
    """
    n = complex_normal(rng, (N_RX,), noise_var)
    y = chan.h1 * x1 + sir_scale * chan.h2 * x2 + n
    return ToneObservation(y=y, chan=chan, noise_var=noise_var)


def gen_pilots(chans: list[ToneChannel], n_pilots: int, c: Constellation,
               interferer: Constellation, sir_scale: float, noise_var: float,
               rng: np.random.Generator) -> list[tuple[complex, ToneObservation]]:
    """Known pilot symbols sent through the block's tones with the interferer on.

    Pilot symbols are uniform draws from ``c``; the interferer transmits a
    uniform symbol of its own alphabet on every pilot tone.  Pilots cycle
    through ``chans`` in order when ``n_pilots`` exceeds the block length.
    """
    if n_pilots < 1:
        raise ValueError("n_pilots must be >= 1")
    if not chans:
        raise ValueError("need at least one tone channel")
    pilot_sym = c.points[rng.integers(c.size, size=n_pilots)]
    intf_sym = interferer.points[rng.integers(interferer.size, size=n_pilots)]
    out = []
    for p in range(n_pilots):
        obs = transmit(chans[p % len(chans)], pilot_sym[p], intf_sym[p],
                       sir_scale, noise_var, rng)
        out.append((pilot_sym[p], obs))
    return out
