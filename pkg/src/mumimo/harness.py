"""Monte-Carlo experiment engine: classification, BER, and BLER sweeps.

Sweeps are fully deterministic functions of (config, seed): every SNR point,
true-interferer case, and fixed-size chunk of trials gets its own seeded
stream, and results are aggregated with commutative counters.  That makes the
output byte-identical no matter how many workers run (cap workers with the
``MUMIMO_WORKERS`` environment variable; the default is sequential).

Rather than simulating tone by tone, the engine draws whole batches of trials
and runs the receivers on stacked arrays; the math is the same code the
per-tone API uses.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
from dataclasses import dataclass, fields

import numpy as np

from . import channel as chan_mod
from . import detect
from .constellation import (
    Constellation,
    ConstellationKind,
    build_constellation,
    hypothesis_set,
)
from .fec import CodeConfig, decode, encode

#: Trials per random stream; fixed so results do not depend on worker count.
CLASSIFY_CHUNK = 2048
LINK_CHUNK = 512
BLER_CHUNK = 64

_SWEEP_SALTS = {"classify": 101, "ber": 202, "bler": 303}
_CLASSIFIERS = ("joint-ml", "null-ml")
_LINK_RECEIVERS = ("cov", "irc", "null-ml", "joint-ml", "genie-ml")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs; parsed from flat key=value files."""

    sweep: str                                   # classify | ber | bler
    receivers: tuple[str, ...]
    ms: ConstellationKind
    mi_true: tuple[ConstellationKind, ...]
    window_sizes: tuple[int, ...]                # classification window N
    n_trials: int
    snr_db: tuple[float, ...]
    sir_db: float = 0.0
    channel: str = "iid"                         # iid | flat | peda | pedb
    rho_t: float = 0.0
    rho_r: float = 0.0
    tone_spacing_hz: float = 15e3
    n_pilots: int = 12
    fec: bool = False
    block_bits: int = 6144
    seed: int = 0

    def __post_init__(self):
        if self.sweep not in _SWEEP_SALTS:
            raise ConfigError("sweep", f"unknown sweep {self.sweep!r}")
        if not self.receivers:
            raise ConfigError("receivers", "need at least one receiver")
        allowed = _CLASSIFIERS if self.sweep == "classify" else _LINK_RECEIVERS
        for r in self.receivers:
            if r not in allowed:
                raise ConfigError("receivers",
                                  f"{r!r} not valid for {self.sweep} (allowed: {allowed})")
        if self.ms is ConstellationKind.ABSENT:
            raise ConfigError("ms", "desired user needs a real alphabet")
        if not self.mi_true:
            raise ConfigError("mi", "need at least one true interferer case")
        if not self.window_sizes or any(n < 1 for n in self.window_sizes):
            raise ConfigError("n", "window sizes must be positive")
        if self.sweep != "classify" and len(self.window_sizes) != 1:
            raise ConfigError("n", "link sweeps take a single window size")
        if self.n_trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if not self.snr_db:
            raise ConfigError("snr_db", "SNR grid must be nonempty")
        if self.channel not in ("iid", "flat", "peda", "pedb"):
            raise ConfigError("channel", f"unknown channel {self.channel!r}")
        for name, rho in (("rho_t", self.rho_t), ("rho_r", self.rho_r)):
            if not 0.0 <= rho < 1.0:
                raise ConfigError(name, "must be in [0, 1)")
        if self.tone_spacing_hz <= 0:
            raise ConfigError("tone_spacing_hz", "must be positive")
        if self.n_pilots < 2:
            raise ConfigError("n_pilots", "covariance estimation needs >= 2 pilots")
        if self.sweep == "bler":
            if not self.fec:
                raise ConfigError("fec", "bler sweep requires fec = on")
            bps = build_constellation(self.ms).bits_per_symbol
            if self.block_bits % bps or (2 * self.block_bits) % bps:
                raise ConfigError("block_bits",
                                  f"must map onto whole {self.ms.value} symbols")

    @property
    def sir_scale(self) -> float:
        return 10.0 ** (-self.sir_db / 20.0)

    def canonical_text(self) -> str:
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, ConstellationKind):
                v = v.value
            elif isinstance(v, tuple):
                v = ",".join(x.value if isinstance(x, ConstellationKind) else str(x)
                             for x in v)
            parts.append(f"{f.name}={v}")
        return "\n".join(parts)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:12]


@dataclass(frozen=True)
class CurveRecord:
    """One measured point of one curve."""

    snr_db: float
    receiver: str
    ms: ConstellationKind
    mi_true: ConstellationKind
    window: int
    metric: str                  # p_correct_classification | ber | bler
    value: float
    ci_halfwidth: float
    n_trials: int
    digest: str


def _wilson_free_ci(p: float, n: int) -> float:
    """95% normal-approximation half-width for a proportion."""
    return 1.96 * np.sqrt(max(p * (1.0 - p), 0.0) / n)


# ---------------------------------------------------------------------------
# config file parsing
# ---------------------------------------------------------------------------

_KNOWN_KEYS = ("sweep", "receivers", "ms", "mi", "n", "trials", "snr_db",
               "sir_db", "channel", "rho_t", "rho_r", "tone_spacing_hz",
               "n_pilots", "fec", "block_bits", "seed")


def _parse_snr_grid(text: str) -> tuple[float, ...]:
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("snr_db", f"range syntax is start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError("snr_db", "step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 9) for i in range(n))
    return tuple(float(p) for p in text.split(","))


def parse_config_text(text: str, *, seed_override: int | None = None) -> ExperimentConfig:
    """Parse a flat key=value config (``#`` starts a comment)."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("<syntax>", f"line {lineno} is not key=value: {line!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(key, "unknown config key")
        raw[key] = val

    def need(key):
        if key not in raw:
            raise ConfigError(key, "missing required key")
        return raw[key]

    def kind(name, key):
        try:
            return ConstellationKind.from_name(name)
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None

    def num(key, cast, default=None):
        if key not in raw:
            return default
        try:
            return cast(raw[key])
        except ValueError:
            raise ConfigError(key, f"cannot parse {raw[key]!r}") from None

    sweep = need("sweep").lower()
    try:
        window_sizes = tuple(int(p) for p in need("n").split(","))
        mi_true = tuple(kind(p, "mi") for p in need("mi").split(","))
        receivers = tuple(p.strip().lower() for p in need("receivers").split(","))
    except ValueError as exc:
        raise ConfigError("n", str(exc)) from None

    fec_text = raw.get("fec", "off").lower()
    if fec_text not in ("on", "off", "true", "false"):
        raise ConfigError("fec", f"expected on/off, got {fec_text!r}")

    seed = seed_override if seed_override is not None else num("seed", int, 0)
    return ExperimentConfig(
        sweep=sweep,
        receivers=receivers,
        ms=kind(need("ms"), "ms"),
        mi_true=mi_true,
        window_sizes=window_sizes,
        n_trials=num("trials", int, 10_000),
        snr_db=_parse_snr_grid(need("snr_db")),
        sir_db=num("sir_db", float, 0.0),
        channel=raw.get("channel", "iid").lower(),
        rho_t=num("rho_t", float, 0.0),
        rho_r=num("rho_r", float, 0.0),
        tone_spacing_hz=num("tone_spacing_hz", float, 15e3),
        n_pilots=num("n_pilots", int, 12),
        fec=fec_text in ("on", "true"),
        block_bits=num("block_bits", int, 6144),
        seed=seed,
    )


def load_config(path, *, seed_override: int | None = None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path!r}: {exc}") from None
    return parse_config_text(text, seed_override=seed_override)


# ---------------------------------------------------------------------------
# shared simulation pieces
# ---------------------------------------------------------------------------

def _chunk_rng(cfg: ExperimentConfig, point_idx: int, mi_idx: int, chunk_idx: int):
    ss = np.random.SeedSequence(
        [cfg.seed, _SWEEP_SALTS[cfg.sweep], point_idx, mi_idx, chunk_idx])
    return np.random.default_rng(ss)


def _chunk_sizes(total: int, chunk: int) -> list[int]:
    return [min(chunk, total - s) for s in range(0, total, chunk)]


def _draw_channels(cfg: ExperimentConfig, n_blocks: int, n_tones: int, rng):
    if cfg.channel == "iid":
        h = chan_mod.iid_channel_matrices(n_tones, rng, n_blocks=n_blocks)
    else:
        h = chan_mod.multipath_channel_matrices(
            chan_mod.profile_by_name(cfg.channel), n_tones,
            cfg.tone_spacing_hz, rng, n_blocks=n_blocks)
    spec = chan_mod.CorrelationSpec(rho_t=cfg.rho_t, rho_r=cfg.rho_r)
    return chan_mod.apply_correlation_matrices(h, spec)


def _draw_symbols(c: Constellation, shape, rng):
    idx = rng.integers(c.size, size=shape)
    return idx, c.points[idx]


def _transmit_batch(h, x1, x2, sir_scale, noise_var, rng):
    noise = chan_mod.complex_normal(rng, h.shape[:-1], noise_var)
    return h[..., 0] * x1[..., None] + sir_scale * h[..., 1] * x2[..., None] + noise


def _hypothesis_tone_minima(y, h, noise_var, ms, hyps, sir_scale):
    """Per-hypothesis (blocks, tones, |ms|) distance buffers."""
    return detect.hypothesis_buffers(y, h[..., 0], h[..., 1], noise_var, ms,
                                     hyps, sir_scale)


def _classify_argmin(tone_minima, hyps, window):
    """Winning hypothesis index per block on the first ``window`` tones."""
    sizes = np.array([hyp.size for hyp in hyps], dtype=float)
    acc = np.stack([tm[:, :window].sum(axis=1) for tm in tone_minima], axis=1)
    metrics = acc + window * np.log(sizes)[None, :]
    return np.argmin(metrics, axis=1)        # first (= smallest alphabet) wins ties


# ---------------------------------------------------------------------------
# classification sweep
# ---------------------------------------------------------------------------

def _classify_chunk(cfg: ExperimentConfig, point_idx: int, mi_idx: int,
                    chunk_idx: int, n_blocks: int):
    rng = _chunk_rng(cfg, point_idx, mi_idx, chunk_idx)
    snr_db = cfg.snr_db[point_idx]
    noise_var = 10.0 ** (-snr_db / 10.0)
    ms = build_constellation(cfg.ms)
    mi = build_constellation(cfg.mi_true[mi_idx])
    hyps = hypothesis_set()
    n_max = max(cfg.window_sizes)

    h = _draw_channels(cfg, n_blocks, n_max, rng)
    _, x1 = _draw_symbols(ms, (n_blocks, n_max), rng)
    _, x2 = _draw_symbols(mi, (n_blocks, n_max), rng)
    y = _transmit_batch(h, x1, x2, cfg.sir_scale, noise_var, rng)

    true_idx = next(k for k, hyp in enumerate(hyps) if hyp.kind is mi.kind)
    counts: dict[tuple[str, int], int] = {}

    if "joint-ml" in cfg.receivers:
        per_x1 = _hypothesis_tone_minima(y, h, noise_var, ms, hyps, cfg.sir_scale)
        tone_minima = [d.min(axis=2) for d in per_x1]
        for n in cfg.window_sizes:
            win = _classify_argmin(tone_minima, hyps, n)
            counts[("joint-ml", n)] = int(np.sum(win == true_idx))
    if "null-ml" in cfg.receivers:
        nulled = detect.nulled_tone_minima(
            y, h[..., 0], h[..., 1], noise_var, hyps, cfg.sir_scale)
        for n in cfg.window_sizes:
            win = _classify_argmin(list(nulled), hyps, n)
            counts[("null-ml", n)] = int(np.sum(win == true_idx))
    return counts


def run_classification_sweep(cfg: ExperimentConfig) -> list[CurveRecord]:
    """Probability of correct interferer-alphabet detection per SNR point."""
    if cfg.sweep != "classify":
        raise ConfigError("sweep", "config is not a classify sweep")
    units = [(p, m, c, n)
             for p in range(len(cfg.snr_db))
             for m in range(len(cfg.mi_true))
             for c, n in enumerate(_chunk_sizes(cfg.n_trials, CLASSIFY_CHUNK))]
    results = _map_units(_classify_chunk, cfg, units)

    totals: dict[tuple[int, int, str, int], int] = {}
    for (p, m, _c, _n), chunk_counts in zip(units, results):
        for (rx, n), hits in chunk_counts.items():
            key = (p, m, rx, n)
            totals[key] = totals.get(key, 0) + hits

    digest = cfg.digest()
    records = []
    for p, snr in enumerate(cfg.snr_db):
        for rx in cfg.receivers:
            for m, mi in enumerate(cfg.mi_true):
                for n in cfg.window_sizes:
                    value = totals[(p, m, rx, n)] / cfg.n_trials
                    records.append(CurveRecord(
                        snr_db=snr, receiver=rx, ms=cfg.ms, mi_true=mi,
                        window=n, metric="p_correct_classification",
                        value=value,
                        ci_halfwidth=_wilson_free_ci(value, cfg.n_trials),
                        n_trials=cfg.n_trials, digest=digest))
    return records


# ---------------------------------------------------------------------------
# uncoded BER sweep
# ---------------------------------------------------------------------------

PRB_TONES = 12


def _pilot_layout(n_tones: int, n_pilots: int) -> np.ndarray:
    """Tone indices whose block-static channels the pilots reuse, per PRB.

    Pilots live on the same subcarriers as the data in other OFDM symbols of
    the (block-static) subframe, so each PRB-sized group of tones contributes
    its own pilots and gets its own interference covariance.
    """
    n_groups = -(-n_tones // PRB_TONES)
    idx = np.empty((n_groups, n_pilots), dtype=np.intp)
    for g in range(n_groups):
        lo = g * PRB_TONES
        size = min(PRB_TONES, n_tones - lo)
        idx[g] = lo + (np.arange(n_pilots) % size)
    return idx


def _draw_pilots(cfg, h, ms, mi, noise_var, rng):
    """Batched pilots per PRB group: known desired symbols, interferer on."""
    layout = _pilot_layout(h.shape[1], cfg.n_pilots)
    hp = h[:, layout]                       # (blocks, groups, pilots, 2, 2)
    _, xp = _draw_symbols(ms, hp.shape[:3], rng)
    _, x2p = _draw_symbols(mi, hp.shape[:3], rng)
    noise = chan_mod.complex_normal(rng, hp.shape[:3] + (2,), noise_var)
    yp = (hp[..., 0] * xp[..., None] + cfg.sir_scale * hp[..., 1] * x2p[..., None]
          + noise)
    return hp, xp, yp


def _cov_receiver_llrs(cfg, h, y, pilots, ms):
    """Sample-covariance linear receiver: one covariance per PRB group."""
    hp, xp, yp = pilots
    u = yp - hp[..., 0] * xp[..., None]
    r = np.einsum("bgpi,bgpj->bgij", u, u.conj()) / u.shape[2]
    tr = (r[..., 0, 0] + r[..., 1, 1]).real
    det = (r[..., 0, 0] * r[..., 1, 1] - r[..., 0, 1] * r[..., 1, 0]).real
    disc = np.maximum(tr * tr - 4.0 * det, 0.0)
    lmin = (tr - np.sqrt(disc)) / 2.0
    lmax = (tr + np.sqrt(disc)) / 2.0
    bad = (lmin <= 0.0) | (lmax > detect.COV_COND_LIMIT * np.maximum(lmin, 1e-300))
    loading = detect.COV_LOADING * (tr / 2.0) * bad
    r = r + loading[..., None, None] * np.eye(2)
    group_of_tone = np.arange(h.shape[1]) // PRB_TONES
    r_t = r[:, group_of_tone]               # (blocks, tones, 2, 2)
    w = np.einsum("btij,btj->bti", detect._inv2(r_t), h[..., 0])
    z = np.einsum("bti,bti->bt", w.conj(), y)
    mu = np.einsum("bti,bti->bt", w.conj(), h[..., 0])
    nu2 = np.einsum("bti,btij,btj->bt", w.conj(), r_t, w).real
    return detect.linear_llrs(z, mu, nu2, ms)


def _irc_receiver_llrs(cfg, h, y, noise_var, ms):
    h2e = cfg.sir_scale * h[..., 1]
    cov = (h2e[..., :, None] * h2e.conj()[..., None, :]
           + noise_var * np.eye(2)[None, None])
    w = np.einsum("btij,btj->bti", detect._inv2(cov), h[..., 0])
    z = np.einsum("bti,bti->bt", w.conj(), y)
    mu = np.einsum("bti,bti->bt", w.conj(), h[..., 0])
    nu2 = np.einsum("bti,btij,btj->bt", w.conj(), cov, w).real
    return detect.linear_llrs(z, mu, nu2, ms)


def _ber_chunk(cfg: ExperimentConfig, point_idx: int, mi_idx: int,
               chunk_idx: int, n_blocks: int):
    rng = _chunk_rng(cfg, point_idx, mi_idx, chunk_idx)
    noise_var = 10.0 ** (-cfg.snr_db[point_idx] / 10.0)
    ms = build_constellation(cfg.ms)
    mi = build_constellation(cfg.mi_true[mi_idx])
    hyps = hypothesis_set()
    window = cfg.window_sizes[0]

    h = _draw_channels(cfg, n_blocks, window, rng)
    i1, x1 = _draw_symbols(ms, (n_blocks, window), rng)
    _, x2 = _draw_symbols(mi, (n_blocks, window), rng)
    y = _transmit_batch(h, x1, x2, cfg.sir_scale, noise_var, rng)
    pilots = _draw_pilots(cfg, h, ms, mi, noise_var, rng)

    tx_bits = ms.labels[i1]                       # (blocks, window, bits)
    true_idx = next(k for k, hyp in enumerate(hyps) if hyp.kind is mi.kind)

    need_tables = {"genie-ml", "joint-ml", "null-ml"} & set(cfg.receivers)
    per_x1 = (_hypothesis_tone_minima(y, h, noise_var, ms, hyps, cfg.sir_scale)
              if need_tables else None)

    def table_llrs(chosen_idx):
        # gather each block's chosen buffer, then demap
        stacked = np.stack(per_x1, axis=1)        # (blocks, hyp, window, |ms|)
        sel = stacked[np.arange(n_blocks), chosen_idx]
        return detect.llrs_from_distances(sel, ms)

    errors: dict[str, int] = {}
    for rx in cfg.receivers:
        if rx == "genie-ml":
            llrs = detect.llrs_from_distances(per_x1[true_idx], ms)
        elif rx == "joint-ml":
            chosen = _classify_argmin([d.min(axis=2) for d in per_x1], hyps, window)
            llrs = table_llrs(chosen)
        elif rx == "null-ml":
            nulled = detect.nulled_tone_minima(
                y, h[..., 0], h[..., 1], noise_var, hyps, cfg.sir_scale)
            chosen = _classify_argmin(list(nulled), hyps, window)
            llrs = table_llrs(chosen)
        elif rx == "irc":
            llrs = _irc_receiver_llrs(cfg, h, y, noise_var, ms)
        elif rx == "cov":
            llrs = _cov_receiver_llrs(cfg, h, y, pilots, ms)
        else:  # pragma: no cover - guarded by config validation
            raise ConfigError("receivers", f"unknown receiver {rx!r}")
        errors[rx] = int(np.sum((llrs > 0).astype(np.uint8) != tx_bits))
    return errors


def run_ber_sweep(cfg: ExperimentConfig) -> list[CurveRecord]:
    """Uncoded desired-user bit error rate per receiver per SNR point."""
    if cfg.sweep != "ber":
        raise ConfigError("sweep", "config is not a ber sweep")
    units = [(p, m, c, n)
             for p in range(len(cfg.snr_db))
             for m in range(len(cfg.mi_true))
             for c, n in enumerate(_chunk_sizes(cfg.n_trials, LINK_CHUNK))]
    results = _map_units(_ber_chunk, cfg, units)

    totals: dict[tuple[int, int, str], int] = {}
    for (p, m, _c, _n), errs in zip(units, results):
        for rx, cnt in errs.items():
            key = (p, m, rx)
            totals[key] = totals.get(key, 0) + cnt

    ms = build_constellation(cfg.ms)
    bits_per_trial = cfg.window_sizes[0] * ms.bits_per_symbol
    digest = cfg.digest()
    records = []
    for p, snr in enumerate(cfg.snr_db):
        for rx in cfg.receivers:
            for m, mi in enumerate(cfg.mi_true):
                ber = totals[(p, m, rx)] / (cfg.n_trials * bits_per_trial)
                records.append(CurveRecord(
                    snr_db=snr, receiver=rx, ms=cfg.ms, mi_true=mi,
                    window=cfg.window_sizes[0], metric="ber", value=ber,
                    ci_halfwidth=_wilson_free_ci(ber, cfg.n_trials),
                    n_trials=cfg.n_trials, digest=digest))
    return records


# ---------------------------------------------------------------------------
# coded BLER sweep
# ---------------------------------------------------------------------------

def coded_bit_interleaver(coded_bits: int) -> np.ndarray:
    """Fixed pseudo-random permutation spreading coded bits across tones.

    Without interleaving, the six bits of one 64-QAM tone are consecutive
    coded bits, so a single bad tone overwhelms the convolutional code's
    memory.  The permutation depends only on the codeword length, so it is
    part of the deterministic link definition.
    """
    gen = np.random.default_rng(np.random.SeedSequence([0xC0DE, coded_bits]))
    return gen.permutation(coded_bits)


def _bler_chunk(cfg: ExperimentConfig, point_idx: int, mi_idx: int,
                chunk_idx: int, n_blocks: int):
    rng = _chunk_rng(cfg, point_idx, mi_idx, chunk_idx)
    noise_var = 10.0 ** (-cfg.snr_db[point_idx] / 10.0)
    ms = build_constellation(cfg.ms)
    mi = build_constellation(cfg.mi_true[mi_idx])
    hyps = hypothesis_set()
    window = cfg.window_sizes[0]
    code = CodeConfig(block_bits=cfg.block_bits)
    n_sym = code.coded_bits // ms.bits_per_symbol
    perm = coded_bit_interleaver(code.coded_bits)
    lut = ms.label_value_to_index()
    weights = 1 << np.arange(ms.bits_per_symbol - 1, -1, -1)

    h = _draw_channels(cfg, n_blocks, n_sym, rng)

    info = rng.integers(0, 2, size=(n_blocks, code.block_bits)).astype(np.uint8)
    coded = encode(info, code)[:, perm]
    sym_idx = lut[coded.reshape(n_blocks, n_sym, -1) @ weights]
    x1 = ms.points[sym_idx]
    _, x2 = _draw_symbols(mi, (n_blocks, n_sym), rng)
    y = _transmit_batch(h, x1, x2, cfg.sir_scale, noise_var, rng)
    pilots = _draw_pilots(cfg, h, ms, mi, noise_var, rng)

    true_idx = next(k for k, hyp in enumerate(hyps) if hyp.kind is mi.kind)
    ml_rxs = [rx for rx in cfg.receivers
              if rx in ("genie-ml", "joint-ml", "null-ml")]
    window_per_x1 = (_hypothesis_tone_minima(
        y[:, :window], h[:, :window], noise_var, ms, hyps, cfg.sir_scale)
        if ml_rxs else None)

    chosen_by_rx: dict[str, np.ndarray] = {}
    for rx in ml_rxs:
        if rx == "genie-ml":
            chosen_by_rx[rx] = np.full(n_blocks, true_idx)
        elif rx == "joint-ml":
            chosen_by_rx[rx] = _classify_argmin(
                [d.min(axis=2) for d in window_per_x1], hyps, window)
        else:
            nulled = detect.nulled_tone_minima(
                y[:, :window], h[:, :window, :, 0], h[:, :window, :, 1],
                noise_var, hyps, cfg.sir_scale)
            chosen_by_rx[rx] = _classify_argmin(list(nulled), hyps, window)

    # one classification per block; the window's chosen buffer is reused, the
    # remaining tones are filled once per hypothesis for whichever receivers
    # picked it
    ml_llrs = {rx: np.empty((n_blocks, n_sym, ms.bits_per_symbol))
               for rx in ml_rxs}
    for k, hyp in enumerate(hyps):
        masks = {rx: chosen_by_rx[rx] == k for rx in ml_rxs}
        sel = np.flatnonzero(np.logical_or.reduce(
            [masks[rx] for rx in ml_rxs])) if ml_rxs else np.empty(0, int)
        if sel.size == 0:
            continue
        rest, _ = detect.min_distance_over_interferer(
            y[sel, window:], h[sel, window:, :, 0], h[sel, window:, :, 1],
            noise_var, ms, hyp, cfg.sir_scale)
        head = window_per_x1[k][sel]
        lam = detect.llrs_from_distances(
            np.concatenate([head, rest], axis=1), ms)
        for rx in ml_rxs:
            hit = masks[rx][sel]
            ml_llrs[rx][sel[hit]] = lam[hit]

    block_errors: dict[str, int] = {}
    for rx in cfg.receivers:
        if rx in ml_llrs:
            llrs = ml_llrs[rx]
        elif rx == "irc":
            llrs = _irc_receiver_llrs(cfg, h, y, noise_var, ms)
        elif rx == "cov":
            llrs = _cov_receiver_llrs(cfg, h, y, pilots, ms)
        else:  # pragma: no cover
            raise ConfigError("receivers", f"unknown receiver {rx!r}")
        deint = np.empty_like(llrs.reshape(n_blocks, code.coded_bits))
        deint[:, perm] = llrs.reshape(n_blocks, code.coded_bits)
        decoded = decode(deint, code)
        block_errors[rx] = int(np.sum(np.any(decoded != info, axis=1)))
    return block_errors


def run_bler_sweep(cfg: ExperimentConfig) -> list[CurveRecord]:
    """Coded block error rate per receiver per SNR point (substitute FEC)."""
    if cfg.sweep != "bler":
        raise ConfigError("sweep", "config is not a bler sweep")
    units = [(p, m, c, n)
             for p in range(len(cfg.snr_db))
             for m in range(len(cfg.mi_true))
             for c, n in enumerate(_chunk_sizes(cfg.n_trials, BLER_CHUNK))]
    results = _map_units(_bler_chunk, cfg, units)

    totals: dict[tuple[int, int, str], int] = {}
    for (p, m, _c, _n), errs in zip(units, results):
        for rx, cnt in errs.items():
            key = (p, m, rx)
            totals[key] = totals.get(key, 0) + cnt

    digest = cfg.digest()
    records = []
    for p, snr in enumerate(cfg.snr_db):
        for rx in cfg.receivers:
            for m, mi in enumerate(cfg.mi_true):
                bler = totals[(p, m, rx)] / cfg.n_trials
                records.append(CurveRecord(
                    snr_db=snr, receiver=rx, ms=cfg.ms, mi_true=mi,
                    window=cfg.window_sizes[0], metric="bler", value=bler,
                    ci_halfwidth=_wilson_free_ci(bler, cfg.n_trials),
                    n_trials=cfg.n_trials, digest=digest))
    return records


def run_sweep(cfg: ExperimentConfig) -> list[CurveRecord]:
    runner = {"classify": run_classification_sweep,
              "ber": run_ber_sweep,
              "bler": run_bler_sweep}[cfg.sweep]
    return runner(cfg)


# ---------------------------------------------------------------------------
# worker pool
# ---------------------------------------------------------------------------

def _worker_count() -> int:
    raw = os.environ.get("MUMIMO_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("MUMIMO_WORKERS", f"not an integer: {raw!r}") from None
    return max(1, n)


def _run_unit(args):
    func, cfg, unit = args
    return func(cfg, *unit)


def _map_units(func, cfg: ExperimentConfig, units):
    """Run independent chunk units, optionally in parallel; order preserved."""
    workers = _worker_count()
    if workers == 1 or len(units) <= 1:
        return [func(cfg, *u) for u in units]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_unit, [(func, cfg, u) for u in units]))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

_METRIC_COLUMNS = {"p_correct_classification": "p_correct", "ber": "ber",
                   "bler": "bler"}


def _fmt(x: float) -> str:
    return format(x, ".10g")


def records_to_csv(records: list[CurveRecord]) -> str:
    """Fixed-schema CSV; the value column is named after the sweep's metric."""
    if not records:
        return ""
    value_col = _METRIC_COLUMNS[records[0].metric]
    lines = [f"snr_db,receiver,ms,mi_true,n,{value_col},ci,trials,digest"]
    for r in records:
        lines.append(",".join([
            _fmt(r.snr_db), r.receiver, r.ms.value, r.mi_true.value,
            str(r.window), _fmt(r.value), _fmt(r.ci_halfwidth),
            str(r.n_trials), r.digest]))
    return "\n".join(lines) + "\n"


def records_to_json(records: list[CurveRecord], cfg: ExperimentConfig) -> str:
    """Same records as JSON, with the modeling assumptions spelled out."""
    meta = {
        "schema": "mumimo-curves-v1",
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "assumptions": {
            "tone_spacing_hz": cfg.tone_spacing_hz,
            "snr_definition": "per-tone per-antenna, 1/noise_var with unit-energy symbols",
            "multipath_tap_tables": "ITU-R M.1225 Ped-A/Ped-B, renormalized to unit power",
            "channel_knowledge": "receiver knows h1, h2, noise_var, and the SIR scale",
        },
    }
    if cfg.fec:
        meta["assumptions"]["fec"] = ("rate-1/2 tail-biting convolutional K=7 "
                                      "(133,171); substitute chain, trends only")
    recs = [{
        "snr_db": r.snr_db, "receiver": r.receiver, "ms": r.ms.value,
        "mi_true": r.mi_true.value, "n": r.window, "metric": r.metric,
        "value": r.value, "ci": r.ci_halfwidth, "trials": r.n_trials,
        "digest": r.digest,
    } for r in records]
    return json.dumps({"meta": meta, "records": recs}, indent=2) + "\n"
