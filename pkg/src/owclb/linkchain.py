"""Link-stage frequency responses, noise spectra, and the cascaded GNR.

Each stage of an optical wireless link (modulator, LED or laser, phosphor,
propagation path, fiber fronthaul, beam-steering array, photodiode front
end) is described here by its magnitude-squared frequency response.  A
chain of stages over a colored noise spectrum yields the spectral
gain-to-noise ratio

    GNR(f) = |H(f)|^2 / S_N(f),

which is the only channel quantity the spectrum optimizers consume.
Chains built purely from flat, first-order and rational pole-zero stages
reduce to a canonical M-zero / N-pole form (``MagSqPoleZeroGnr``); other
stage kinds must go through the ``fit`` module instead.

All algebra is carried out on magnitude-squared quantities; phase is never
modeled.  Every type is immutable after construction and every operation
is a pure function, so shared concurrent use is safe.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, fields
from functools import lru_cache
from pathlib import Path
from typing import Union

import numpy as np

SPEED_OF_LIGHT_M_S = 299792458.0

# A pole and a zero closer than this (relative) are treated as an exact
# cancelling pair during reduction; near-cancellations are kept.
CANCEL_RTOL = 1e-9


class TableRangeError(ValueError):
    """Requested frequency falls outside a tabulated response's support."""


class NotReducibleError(ValueError):
    """Chain contains a stage with no exact pole-zero representation."""


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


def _freq_tuple(name: str, values) -> tuple[float, ...]:
    return tuple(_check_positive(f"{name} entry", v) for v in values)


def _as_f(f):
    """Coerce a frequency argument to float or float ndarray, checking range."""
    arr = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise ValueError("frequency must be finite and non-negative")
    return arr if arr.ndim else float(arr)


@dataclass(frozen=True)
class FlatGain:
    """Frequency-flat stage, e.g. line-of-sight propagation loss."""

    gain: float

    def __post_init__(self):
        _check_positive("gain", self.gain)

    def magsq(self, f):
        return self.gain**2 + 0.0 * _as_f(f)


@dataclass(frozen=True)
class FirstOrderLowPass:
    """Single-pole low pass: |H(f)|^2 = dc_gain^2 / (1 + f^2/corner^2).

    Covers carrier-lifetime-limited LEDs, phosphor photoluminescence,
    diffuse multipath and RC-limited photodiodes.
    """

    dc_gain: float
    corner: float

    def __post_init__(self):
        _check_positive("dc_gain", self.dc_gain)
        _check_positive("corner", self.corner)

    def magsq(self, f):
        f = _as_f(f)
        return self.dc_gain**2 / (1.0 + (f / self.corner) ** 2)


@dataclass(frozen=True)
class RationalPoleZero:
    """General stage with real corner zeros and poles.

    |H(f)|^2 = dc_gain^2 * prod(1 + f^2/fz^2) / prod(1 + f^2/fp^2).
    Covers high-order LED equivalent circuits, modulator/driver networks
    and multi-pole PD-TIA front ends.  Corners may repeat.
    """

    dc_gain: float
    zeros: tuple[float, ...] = ()
    poles: tuple[float, ...] = ()

    def __post_init__(self):
        _check_positive("dc_gain", self.dc_gain)
        object.__setattr__(self, "zeros", _freq_tuple("zeros", self.zeros))
        object.__setattr__(self, "poles", _freq_tuple("poles", self.poles))

    def magsq(self, f):
        f = _as_f(f)
        u = np.square(f)
        out = self.dc_gain**2 + 0.0 * u
        for fz in self.zeros:
            out = out * (1.0 + u / fz**2)
        for fp in self.poles:
            out = out / (1.0 + u / fp**2)
        return out


@dataclass(frozen=True)
class LaserSecondOrder:
    """Directly modulated laser with relaxation-oscillation dynamics.

    |H(f)|^2 = dc_gain^2 * f_R^4 / ((f_R^2 - f^2)^2 + damping^2 f^2).
    The response has a resonant peak whenever relaxation_freq exceeds
    damping/sqrt(2); such a stage is non-monotone and never reducible to
    real corners, so the numeric water-level machinery must be used.
    """

    dc_gain: float
    relaxation_freq: float
    damping: float

    def __post_init__(self):
        _check_positive("dc_gain", self.dc_gain)
        _check_positive("relaxation_freq", self.relaxation_freq)
        _check_positive("damping", self.damping)

    @property
    def has_resonant_peak(self) -> bool:
        return self.relaxation_freq > self.damping / math.sqrt(2.0)

    def magsq(self, f):
        f = _as_f(f)
        u = np.square(f)
        fr2 = self.relaxation_freq**2
        return self.dc_gain**2 * fr2**2 / ((fr2 - u) ** 2 + self.damping**2 * u)


@dataclass(frozen=True)
class GaussianLowPass:
    """Gaussian low pass, the usual plastic-optical-fiber model.

    |H(f)|^2 = dc_gain^2 * exp(-2 (f/corner)^2).
    """

    dc_gain: float
    corner: float

    def __post_init__(self):
        _check_positive("dc_gain", self.dc_gain)
        _check_positive("corner", self.corner)

    def magsq(self, f):
        f = _as_f(f)
        return self.dc_gain**2 * np.exp(-2.0 * (f / self.corner) ** 2)


@dataclass(frozen=True)
class BeamSquintSinc:
    """Beam squint of an X-element steered array or reflective surface.

    spacing_delay is the per-element compensation delay in seconds (the
    inter-element path difference divided by the speed of light); the
    unit bookkeeping of the underlying geometry is absorbed into this one
    parameter by convention.  With tau = spacing_delay,

        |H(f)|^2 = (element_gain * X * c * tau)^2 * sinc^2(pi f X tau),

    where sinc(x) = sin(x)/x.  The first null sits at f = 1/(X*tau).
    """

    element_gain: float
    elements: int
    spacing_delay: float

    def __post_init__(self):
        _check_positive("element_gain", self.element_gain)
        if int(self.elements) != self.elements or self.elements < 1:
            raise ValueError(f"elements must be a positive integer, got {self.elements!r}")
        object.__setattr__(self, "elements", int(self.elements))
        _check_positive("spacing_delay", self.spacing_delay)

    @property
    def dc_amplitude(self) -> float:
        return self.element_gain * self.elements * SPEED_OF_LIGHT_M_S * self.spacing_delay

    def magsq(self, f):
        f = _as_f(f)
        # np.sinc(x) = sin(pi x)/(pi x), so pass f*X*tau directly.
        return self.dc_amplitude**2 * np.sinc(f * self.elements * self.spacing_delay) ** 2


@dataclass(frozen=True, eq=False)
class ResponseTable:
    """Sampled magnitude-squared (or PSD) data on a strictly increasing grid."""

    frequencies: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if freqs.ndim != 1 or freqs.shape != vals.shape or freqs.size < 2:
            raise ValueError("table needs matching 1-d frequency/value arrays with >= 2 rows")
        if not np.all(np.isfinite(freqs)) or not np.all(np.isfinite(vals)):
            raise ValueError("table entries must be finite")
        if np.any(freqs <= 0.0):
            raise ValueError("table frequencies must be positive")
        if np.any(np.diff(freqs) <= 0.0):
            raise ValueError("table frequencies must be strictly increasing")
        if np.any(vals <= 0.0):
            raise ValueError("table values must be positive")
        freqs.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_rows(cls, rows) -> "ResponseTable":
        rows = list(rows)
        return cls(
            frequencies=np.array([r[0] for r in rows], dtype=float),
            values=np.array([r[1] for r in rows], dtype=float),
        )

    @property
    def rows(self) -> list[tuple[float, float]]:
        return [(float(f), float(v)) for f, v in zip(self.frequencies, self.values)]

    def interpolate(self, f):
        """Log-frequency, log-value linear interpolation; no extrapolation."""
        f = _as_f(f)
        lo, hi = float(self.frequencies[0]), float(self.frequencies[-1])
        if np.any(np.asarray(f) < lo) or np.any(np.asarray(f) > hi):
            raise TableRangeError(
                f"frequency outside table range [{lo:g}, {hi:g}] Hz"
            )
        logv = np.interp(np.log(f), np.log(self.frequencies), np.log(self.values))
        return np.exp(logv)


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Stage defined by measured or simulated magnitude-squared samples."""

    table: ResponseTable

    def magsq(self, f):
        return self.table.interpolate(f)


ComponentResponse = Union[
    FlatGain,
    FirstOrderLowPass,
    RationalPoleZero,
    LaserSecondOrder,
    GaussianLowPass,
    BeamSquintSinc,
    Tabulated,
]

_REDUCIBLE_KINDS = (FlatGain, FirstOrderLowPass, RationalPoleZero)


@dataclass(frozen=True)
class NoiseSpectrum:
    """Receiver output noise PSD with one uplift zero and roll-off poles.

        S_N(f) = floor * (1 + f^2/uplift_zero^2)
                       * prod(1 + f^2/extra_zero^2)
                       / prod(1 + f^2/rolloff_pole^2)

    ``uplift_zero`` marks where amplifier noise starts to be boosted; it
    may be omitted for a white floor.  ``extra_zeros`` carries any copy of
    the receiver's own response riding on the noise (the amplifier shapes
    its noise with the same roll-off it applies to the signal), so that
    the copy is represented explicitly and cancels against the receiver
    stage when the chain is reduced.
    """

    floor: float
    uplift_zero: float | None = None
    rolloff_poles: tuple[float, ...] = ()
    extra_zeros: tuple[float, ...] = ()

    def __post_init__(self):
        _check_positive("floor", self.floor)
        if self.uplift_zero is not None:
            _check_positive("uplift_zero", self.uplift_zero)
        object.__setattr__(self, "rolloff_poles", _freq_tuple("rolloff_poles", self.rolloff_poles))
        object.__setattr__(self, "extra_zeros", _freq_tuple("extra_zeros", self.extra_zeros))

    def psd(self, f):
        f = _as_f(f)
        u = np.square(f)
        out = self.floor + 0.0 * u
        if self.uplift_zero is not None:
            out = out * (1.0 + u / self.uplift_zero**2)
        for fz in self.extra_zeros:
            out = out * (1.0 + u / fz**2)
        for fp in self.rolloff_poles:
            out = out / (1.0 + u / fp**2)
        return out


@dataclass(frozen=True, eq=False)
class LinkChain:
    """Ordered cascade of component stages over one noise spectrum."""

    stages: tuple[ComponentResponse, ...]
    noise: NoiseSpectrum

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise ValueError("chain needs at least one stage")
        object.__setattr__(self, "stages", stages)


@dataclass(frozen=True)
class MagSqPoleZeroGnr:
    """Canonical spectral GNR: gnr0 * prod(1+f^2/fz^2) / prod(1+f^2/fp^2).

    Corner lists are stored sorted ascending.  Instances are hashable and
    callable; ``model(f)`` evaluates the linear GNR at f (scalar or array).
    """

    gnr0: float
    zeros: tuple[float, ...] = ()
    poles: tuple[float, ...] = ()

    def __post_init__(self):
        _check_positive("gnr0", self.gnr0)
        object.__setattr__(self, "zeros", tuple(sorted(_freq_tuple("zeros", self.zeros))))
        object.__setattr__(self, "poles", tuple(sorted(_freq_tuple("poles", self.poles))))

    def evaluate(self, f):
        f = _as_f(f)
        u = np.square(f)
        out = self.gnr0 + 0.0 * u
        for fz in self.zeros:
            out = out * (1.0 + u / fz**2)
        for fp in self.poles:
            out = out / (1.0 + u / fp**2)
        return out

    __call__ = evaluate


# ---------------------------------------------------------------------------
# operations


def eval_component_magsq(component: ComponentResponse, f):
    """Magnitude-squared response |H(f)|^2 of a single stage."""
    return component.magsq(f)


def eval_noise_psd(noise: NoiseSpectrum, f):
    """Noise PSD in V^2/Hz at frequency f."""
    return noise.psd(f)


def gnr_eval(chain: LinkChain, f):
    """Spectral GNR of the chain: product of stage |H|^2 over noise PSD."""
    f = _as_f(f)
    num = 1.0 + 0.0 * np.asarray(f, dtype=float)
    for stage in chain.stages:
        num = num * stage.magsq(f)
    out = num / chain.noise.psd(f)
    return out if np.ndim(out) else float(out)


def chain_magsq(chain: LinkChain, f):
    """Product of stage magnitude-squared responses, without the noise."""
    f = _as_f(f)
    out = 1.0 + 0.0 * np.asarray(f, dtype=float)
    for stage in chain.stages:
        out = out * stage.magsq(f)
    return out if np.ndim(out) else float(out)


def _cancel_pairs(zeros: list[float], poles: list[float]) -> tuple[list[float], list[float]]:
    """Remove pole/zero pairs equal to within CANCEL_RTOL (sorted merge)."""
    zs = sorted(zeros)
    ps = sorted(poles)
    keep_z: list[float] = []
    keep_p: list[float] = []
    i = j = 0
    while i < len(zs) and j < len(ps):
        fz, fp = zs[i], ps[j]
        if abs(fz - fp) <= CANCEL_RTOL * max(fz, fp):
            i += 1
            j += 1
        elif fz < fp:
            keep_z.append(fz)
            i += 1
        else:
            keep_p.append(fp)
            j += 1
    keep_z.extend(zs[i:])
    keep_p.extend(ps[j:])
    return keep_z, keep_p


def reduce_to_polezero(chain: LinkChain) -> MagSqPoleZeroGnr:
    """Collapse a chain of rational stages into the canonical GNR form.

    Stage zeros/poles enter directly; the noise floor divides the DC gain,
    noise zeros become GNR poles and noise poles become GNR zeros.
    Exactly-equal pole/zero pairs (relative tolerance 1e-9) cancel, which
    reproduces the analytic cancellation of a receiver response that also
    shapes its own noise.
    """
    zeros: list[float] = []
    poles: list[float] = []
    gnr0 = 1.0
    for stage in chain.stages:
        if not isinstance(stage, _REDUCIBLE_KINDS):
            raise NotReducibleError(
                f"stage {type(stage).__name__} has no exact pole-zero form; "
                "not reducible; use the fit module to approximate it"
            )
        if isinstance(stage, FlatGain):
            gnr0 *= stage.gain**2
        elif isinstance(stage, FirstOrderLowPass):
            gnr0 *= stage.dc_gain**2
            poles.append(stage.corner)
        else:
            gnr0 *= stage.dc_gain**2
            zeros.extend(stage.zeros)
            poles.extend(stage.poles)
    noise = chain.noise
    gnr0 /= noise.floor
    if noise.uplift_zero is not None:
        poles.append(noise.uplift_zero)
    poles.extend(noise.extra_zeros)
    zeros.extend(noise.rolloff_poles)
    zeros, poles = _cancel_pairs(zeros, poles)
    return MagSqPoleZeroGnr(gnr0=gnr0, zeros=tuple(zeros), poles=tuple(poles))


@lru_cache(maxsize=512)
def is_monotone_decreasing(g: MagSqPoleZeroGnr, f_hi: float) -> bool:
    """True iff GNR(f) is non-increasing on (0, f_hi].

    The sign of d(log GNR)/d(f^2) is sum_m 1/(fz_m^2+f^2) minus
    sum_n 1/(fp_n^2+f^2); monotone decrease means this never goes
    positive.  The sign expression is evaluated on a dense log grid in
    u = f^2 plus both endpoints.
    """
    f_hi = _check_positive("f_hi", f_hi)
    if not g.zeros and not g.poles:
        return True
    corners = list(g.zeros) + list(g.poles)
    u_min = (min(corners) * 1e-4) ** 2
    u_grid = np.concatenate(
        [[0.0], np.geomspace(u_min, f_hi**2, 4096), [f_hi**2]]
    )
    pos = np.zeros_like(u_grid)
    mag = np.zeros_like(u_grid)
    for fz in g.zeros:
        t = 1.0 / (fz**2 + u_grid)
        pos += t
        mag += t
    for fp in g.poles:
        t = 1.0 / (fp**2 + u_grid)
        pos -= t
        mag += t
    return bool(np.all(pos <= 1e-12 * mag))


# ---------------------------------------------------------------------------
# channel-chain JSON interface

_STAGE_KINDS: dict[str, type] = {
    cls.__name__: cls
    for cls in (
        FlatGain,
        FirstOrderLowPass,
        RationalPoleZero,
        LaserSecondOrder,
        GaussianLowPass,
        BeamSquintSinc,
        Tabulated,
    )
}


def _stage_params(stage: ComponentResponse) -> dict:
    if isinstance(stage, Tabulated):
        return {"rows": [[f, v] for f, v in stage.table.rows]}
    out = {}
    for fld in fields(stage):
        value = getattr(stage, fld.name)
        out[fld.name] = list(value) if isinstance(value, tuple) else value
    return out


def _stage_from_dict(obj: dict) -> ComponentResponse:
    try:
        kind = obj["kind"]
        params = dict(obj.get("params", {}))
    except (TypeError, KeyError) as exc:
        raise ValueError(f"stage entry must be an object with 'kind' and 'params': {obj!r}") from exc
    cls = _STAGE_KINDS.get(kind)
    if cls is None:
        raise ValueError(f"unknown stage kind {kind!r}; expected one of {sorted(_STAGE_KINDS)}")
    if cls is Tabulated:
        return Tabulated(table=ResponseTable.from_rows(params["rows"]))
    return cls(**params)


def chain_to_dict(chain: LinkChain) -> dict:
    noise = chain.noise
    noise_obj: dict = {"floor": noise.floor}
    if noise.uplift_zero is not None:
        noise_obj["uplift_zero"] = noise.uplift_zero
    if noise.rolloff_poles:
        noise_obj["rolloff_poles"] = list(noise.rolloff_poles)
    if noise.extra_zeros:
        noise_obj["extra_zeros"] = list(noise.extra_zeros)
    return {
        "stages": [
            {"kind": type(stage).__name__, "params": _stage_params(stage)}
            for stage in chain.stages
        ],
        "noise": noise_obj,
    }


def chain_from_dict(obj: dict) -> LinkChain:
    if "stages" not in obj or "noise" not in obj:
        raise ValueError("channel document needs 'stages' and 'noise'")
    stages = tuple(_stage_from_dict(s) for s in obj["stages"])
    noise = NoiseSpectrum(**obj["noise"])
    return LinkChain(stages=stages, noise=noise)


def save_chain(chain: LinkChain, path) -> None:
    Path(path).write_text(json.dumps(chain_to_dict(chain), indent=2) + "\n")


def load_chain(path) -> LinkChain:
    return chain_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# response-table CSV interface

_TABLE_HEADER = ["frequency_hz", "value"]


def read_response_table(path, *, values_in_db: bool = False) -> ResponseTable:
    """Read a two-column CSV ``frequency_hz,value`` (header row required).

    With ``values_in_db`` the value column is 10*log10 of the stored
    quantity and is converted to linear before validation.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty response-table CSV") from None
        if [h.strip() for h in header] != _TABLE_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(_TABLE_HEADER)!r}, got {','.join(header)!r}"
            )
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if values_in_db:
        rows = [(f, 10.0 ** (v / 10.0)) for f, v in rows]
    return ResponseTable.from_rows(rows)


def write_response_table(table: ResponseTable, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TABLE_HEADER)
        for f, v in table.rows:
            writer.writerow([repr(f), repr(v)])
