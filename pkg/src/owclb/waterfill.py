"""Continuous-spectrum throughput optimization over a low-pass GNR.

Under a total-power constraint the optimal transmit PSD is the classic
waterfilling shape S(f) = [v - Gamma/GNR(f)]^+.  For a monotonically
decreasing GNR the water level is pinned by the highest occupied
frequency, v = Gamma/GNR(f_max), which collapses the optimization to a
one-dimensional search over f_max:

* ``psd_opt``          optimal PSD at one frequency for a given f_max
* ``sigma2_of_fmax``   total signal power as a function of f_max
* ``rate_closed_form`` throughput in bit/s, closed form in f_max
* ``dsigma2_dfmax``    analytic derivative of the power w.r.t. f_max
* ``newton_fmax``      grid-snapped Newton search for f_max given a budget
* ``waterlevel_solve`` water-level bisection for arbitrary (also
                       non-monotone) GNR shapes, with island reporting

When the GNR is flat the f_max parameterization degenerates (S is zero
for every f_max); ``waterlevel_solve`` is the designated path for flat or
non-monotone channels.

Newton stop rule: the textbook formulation stops once the update no
longer moves the snapped frequency across a subcarrier boundary while the
accumulated discrete power stays within budget.  That mixes a grid
quantity with a continuous one, so it is interpreted here as: iterate
until the snapped index is pinned between a within-budget grid point and
its over-budget successor (a one-cell feasibility bracket).  The exit
contract is then exact: sigma2 <= budget, and loading one more grid step
would exceed it.

All power budgets are signal variances in V^2.  If the hardware power
draw is a nonlinear monotone function of the variance, invert it with
``sigma2_from_power`` first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import quad

from .linkchain import MagSqPoleZeroGnr, _check_positive, is_monotone_decreasing

_LN2 = math.log(2.0)


class NonMonotoneGnrError(ValueError):
    """Operation requires a monotonically decreasing GNR."""


@dataclass(frozen=True)
class ModulationGap:
    """SNR penalty factor (BER target, clipping, DC bias); >= 1 linear."""

    gamma_linear: float

    def __post_init__(self):
        g = float(self.gamma_linear)
        if not math.isfinite(g) or g < 1.0:
            raise ValueError(f"gamma_linear must be >= 1, got {g!r}")

    @classmethod
    def from_db(cls, gamma_db: float) -> "ModulationGap":
        return cls(10.0 ** (float(gamma_db) / 10.0))


def _gamma_value(gap) -> float:
    gamma = gap.gamma_linear if isinstance(gap, ModulationGap) else float(gap)
    if not math.isfinite(gamma) or gamma < 1.0:
        raise ValueError(f"modulation gap must be >= 1 linear, got {gamma!r}")
    return gamma


@dataclass(frozen=True, eq=False)
class WaterfillSolution:
    """Optimal PSD description returned by the spectrum solvers.

    ``psd`` holds samples of S_opt on the ``f_hz`` grid (V^2/Hz), ``gnr``
    the matching linear GNR samples.  ``island`` lists (f_lo, f_hi)
    intervals below f_max where complementary slackness forces S = 0.
    """

    f_max: float
    water_level: float
    f_hz: np.ndarray
    psd: np.ndarray
    gnr: np.ndarray
    sigma2: float
    rate: float
    island: tuple[tuple[float, float], ...] = ()
    saturated: bool = False
    iterations: int = 0


def _require_monotone(g: MagSqPoleZeroGnr, f_hi: float, op: str) -> None:
    if not is_monotone_decreasing(g, f_hi):
        raise NonMonotoneGnrError(
            f"{op} requires GNR non-increasing up to {f_hi:g} Hz; "
            "use waterlevel_solve for non-monotone channels"
        )


def _inv_gnr(g: MagSqPoleZeroGnr, gamma: float, f):
    """Gamma / GNR(f), the inverse-channel curve the water fills against."""
    return gamma / g.evaluate(f)


def psd_opt(g: MagSqPoleZeroGnr, gap, f_max: float, f) -> float:
    """Optimal PSD Gamma/GNR(f_max) - Gamma/GNR(f) for f < f_max, else 0.

    For a flat GNR this is identically zero (the f_max parameterization is
    degenerate there); use waterlevel_solve to spread a budget over a flat
    channel.
    """
    gamma = _gamma_value(gap)
    f_max = _check_positive("f_max", f_max)
    _require_monotone(g, f_max, "psd_opt")
    f_arr = np.asarray(f, dtype=float)
    level = _inv_gnr(g, gamma, f_max)
    s = np.where(f_arr < f_max, np.maximum(0.0, level - gamma / g.evaluate(f_arr)), 0.0)
    return s if f_arr.ndim else float(s)


# ---------------------------------------------------------------------------
# closed-form power integral

# The transmit power sigma2(F) = F*W(F) - int_0^F W(f) df with
# W = Gamma/GNR needs int prod(1+f^2/fp^2)/prod(1+f^2/fz^2) df.  With
# distinct zero corners the integrand splits (in u = f^2) into a
# polynomial quotient T(u) plus simple fractions r_m/(fz_m^2+u), giving an
# exact antiderivative of power terms and arctangents.  Frequencies are
# rescaled by the largest corner so intermediate polynomial coefficients
# stay well inside double range.


class _RepeatedZeros(Exception):
    pass


CANCEL_ZERO_RTOL = 1e-9


@lru_cache(maxsize=512)
def _decompose(g: MagSqPoleZeroGnr):
    corners = list(g.zeros) + list(g.poles)
    scale = max(corners) if corners else 1.0
    kap2 = [(fp / scale) ** 2 for fp in g.poles]
    zet2 = [(fz / scale) ** 2 for fz in g.zeros]
    for a, b in zip(sorted(zet2), sorted(zet2)[1:]):
        if b - a <= 2.0 * CANCEL_ZERO_RTOL * b:
            raise _RepeatedZeros
    p_coeffs = P.polyfromroots([-k for k in kap2]) if kap2 else np.array([1.0])
    q_coeffs = P.polyfromroots([-z for z in zet2]) if zet2 else np.array([1.0])
    quo, _rem = P.polydiv(p_coeffs, q_coeffs)
    residues = []
    for m, zm in enumerate(zet2):
        num = float(P.polyval(-zm, p_coeffs))
        den = 1.0
        for mm, zo in enumerate(zet2):
            if mm != m:
                den *= zo - zm
        residues.append((math.sqrt(zm), num / den))
    pref = float(np.prod(zet2)) / float(np.prod(kap2)) if kap2 or zet2 else 1.0
    return scale, pref, tuple(float(c) for c in quo), tuple(residues)


def _atan_deficit(y: float) -> float:
    """atan(y) - y/(1+y^2), series-evaluated for small y to avoid cancellation."""
    if y < 0.1:
        total = 0.0
        y2 = y * y
        term = y * y2
        k = 1
        while True:
            contrib = (2.0 * k / (2.0 * k + 1.0)) * term
            total += contrib if k % 2 == 1 else -contrib
            term *= y2
            k += 1
            if contrib <= 1e-18 * abs(total) or k > 24:
                return total
    return math.atan(y) - y / (1.0 + y * y)


def _sigma2_closed(g: MagSqPoleZeroGnr, a_scale: float, f_max: float) -> float:
    scale, pref, quo, residues = _decompose(g)
    x = f_max / scale
    acc = 0.0
    xpow = x**3
    for j, coeff in enumerate(quo[1:], start=1):
        acc += coeff * (2.0 * j / (2.0 * j + 1.0)) * xpow
        xpow *= x * x
    for zeta, r in residues:
        acc -= (r / zeta) * _atan_deficit(x / zeta)
    return a_scale * scale * pref * acc


def _sigma2_quad(g: MagSqPoleZeroGnr, gamma: float, f_max: float) -> float:
    level = _inv_gnr(g, gamma, f_max)

    def integrand(f):
        return level - gamma / float(g.evaluate(f))

    pts = [c for c in list(g.zeros) + list(g.poles) if 0.0 < c < f_max]
    val, _err = quad(integrand, 0.0, f_max, points=sorted(pts) or None,
                     limit=200, epsabs=0.0, epsrel=1e-10)
    return val


def sigma2_of_fmax(g: MagSqPoleZeroGnr, gap, f_max: float) -> float:
    """Transmit power f_max*Gamma/GNR(f_max) - int_0^f_max Gamma/GNR df.

    Evaluated via the exact partial-fraction antiderivative whenever the
    zero corners are distinct; repeated zeros fall back to adaptive
    quadrature at 1e-10 relative tolerance.
    """
    gamma = _gamma_value(gap)
    if f_max == 0.0:
        return 0.0
    f_max = _check_positive("f_max", f_max)
    _require_monotone(g, f_max, "sigma2_of_fmax")
    a_scale = gamma / g.gnr0
    try:
        return _sigma2_closed(g, a_scale, f_max)
    except _RepeatedZeros:
        return _sigma2_quad(g, gamma, f_max)


def dsigma2_dfmax(g: MagSqPoleZeroGnr, gap, f_max: float) -> float:
    """Analytic d(sigma2)/d(f_max); strictly positive for decreasing GNR."""
    gamma = _gamma_value(gap)
    f_max = _check_positive("f_max", f_max)
    bracket = 0.0
    u = f_max * f_max
    for fp in g.poles:
        bracket += 1.0 / (fp * fp + u)
    for fz in g.zeros:
        bracket -= 1.0 / (fz * fz + u)
    return 2.0 * gamma * u * bracket / float(g.evaluate(f_max))


def rate_closed_form(g: MagSqPoleZeroGnr, gap, f_max: float) -> float:
    """Waterfilling-optimal throughput in bit/s for the given f_max.

        R = (2/ln 2) * [ (N-M) f_max
                         + sum_m fz_m atan(f_max/fz_m)
                         - sum_n fp_n atan(f_max/fp_n) ]

    The modulation gap and gnr0 cancel out of the optimal rate, so the
    result depends only on the corner frequencies; the ``gap`` argument is
    accepted for signature symmetry with the power expressions.
    """
    _gamma_value(gap)
    if f_max == 0.0:
        return 0.0
    f_max = _check_positive("f_max", f_max)
    _require_monotone(g, f_max, "rate_closed_form")
    total = (len(g.poles) - len(g.zeros)) * f_max
    for fz in g.zeros:
        total += fz * math.atan(f_max / fz)
    for fp in g.poles:
        total -= fp * math.atan(f_max / fp)
    return (2.0 / _LN2) * total


# ---------------------------------------------------------------------------
# Newton search on the subcarrier grid


def _nearest_index(f: float, delta: float, k_max: int) -> int:
    """Nearest grid index to f, ties broken toward the lower index."""
    kf = f / delta
    lo = math.floor(kf)
    k = lo if (kf - lo) <= 0.5 else lo + 1
    return min(max(k, 1), k_max)


def newton_fmax(
    g: MagSqPoleZeroGnr,
    gap,
    sigma2_budget: float,
    K: int,
    f_chip: float,
    *,
    max_iters: int = 100,
) -> WaterfillSolution:
    """Find the grid-snapped f_max whose waterfilling PSD meets the budget.

    Starts from f_chip, iterates Newton updates of the continuous power
    curve, snaps each iterate to the nearest subcarrier k*Delta_B (ties
    toward the lower index) and recomputes the discrete power sum
    Delta_B * sum_k max(0, S(f_k)).  Snapped probes are kept strictly
    inside the current feasible/infeasible index bracket, so the search
    cannot cycle; divergence or an iteration-cap hit falls back to plain
    bisection over the bracket.  A budget larger than the full-band power
    saturates at f_chip (flagged on the returned solution).  The exit
    contract always holds: sigma2 <= budget, and loading one more grid
    step would exceed the budget.
    """
    gamma = _gamma_value(gap)
    if not (isinstance(K, int) and K >= 2):
        raise ValueError(f"K must be an integer >= 2, got {K!r}")
    f_chip = _check_positive("f_chip", f_chip)
    if not math.isfinite(sigma2_budget) or sigma2_budget <= 0.0:
        raise ValueError(f"sigma2_budget must be > 0, got {sigma2_budget!r}")
    _require_monotone(g, f_chip, "newton_fmax")

    delta = f_chip / K
    f_k = delta * np.arange(1, K + 1)
    gnr_k = np.asarray(g.evaluate(f_k), dtype=float)
    w_k = gamma / gnr_k

    cache: dict[int, float] = {}

    def power(ks: int) -> float:
        if ks not in cache:
            cache[ks] = delta * float(np.sum(np.maximum(0.0, w_k[ks - 1] - w_k[:ks])))
        return cache[ks]

    def build(ks: int, iters: int, saturated: bool = False) -> WaterfillSolution:
        level = float(w_k[ks - 1])
        psd = np.maximum(0.0, level - w_k)
        psd[ks:] = 0.0
        rate = delta * float(np.sum(np.log2(1.0 + psd[:ks] * gnr_k[:ks] / gamma)))
        return WaterfillSolution(
            f_max=float(f_k[ks - 1]),
            water_level=level,
            f_hz=f_k,
            psd=psd,
            gnr=gnr_k,
            sigma2=power(ks),
            rate=rate,
            island=(),
            saturated=saturated,
            iterations=iters,
        )

    if power(K) <= sigma2_budget:
        return build(K, 0, saturated=True)

    def bisect_index(lo: int, hi: int) -> int:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if power(mid) <= sigma2_budget:
                lo = mid
            else:
                hi = mid
        return lo

    # The discrete power is non-decreasing in the grid index, so the target
    # index is bracketed by lo (feasible; power(1) is identically 0) and hi
    # (infeasible).  Newton proposals are snapped to the grid and clamped to
    # probe strictly inside the bracket, so each iteration either converges
    # or shrinks the bracket; no cycle can persist.
    lo, hi = 1, K
    f_cur = f_chip
    sigma_cur = power(K)
    iters = 0
    while hi - lo > 1:
        if iters >= max_iters:
            lo = bisect_index(lo, hi)
            break
        iters += 1
        deriv = dsigma2_dfmax(g, gamma, f_cur)
        if not math.isfinite(deriv) or deriv <= 0.0:
            lo = bisect_index(lo, hi)
            break
        f_next = f_cur - (sigma_cur - sigma2_budget) / deriv
        if not math.isfinite(f_next):
            lo = bisect_index(lo, hi)
            break
        ks = _nearest_index(f_next, delta, K)
        if ks <= lo:
            ks = lo + 1
        elif ks >= hi:
            ks = hi - 1
        p = power(ks)
        if p <= sigma2_budget:
            lo = ks
        else:
            hi = ks
        f_cur = ks * delta
        sigma_cur = p

    k_star = lo
    while k_star > 1 and power(k_star) > sigma2_budget:
        k_star -= 1
    while k_star < K and power(k_star + 1) <= sigma2_budget:
        k_star += 1
    return build(k_star, iters)


# ---------------------------------------------------------------------------
# water-level bisection (general GNR shapes)


def waterlevel_solve(
    g_eval,
    gap,
    sigma2_budget: float,
    f_grid,
    *,
    rel_tol: float = 1e-9,
    max_iters: int = 300,
) -> WaterfillSolution:
    """Bisect the water level so the allocated power meets the budget.

    ``g_eval`` is any frequency -> linear-GNR function (a
    ``MagSqPoleZeroGnr`` works directly); no monotonicity is assumed.  The
    PSD on the grid is S = max(0, v - Gamma/GNR); power is accumulated
    with left cell widths (f_i - f_{i-1}, first cell anchored at 0), which
    matches the discrete sum used by ``newton_fmax`` on a uniform grid.
    Zero-power intervals below f_max are reported as islands.
    """
    gamma = _gamma_value(gap)
    if not math.isfinite(sigma2_budget) or sigma2_budget <= 0.0:
        raise ValueError(f"sigma2_budget must be > 0, got {sigma2_budget!r}")
    f = np.asarray(f_grid, dtype=float)
    if f.ndim != 1 or f.size < 2:
        raise ValueError("f_grid must be a 1-d array with at least 2 points")
    if np.any(f <= 0.0) or np.any(np.diff(f) <= 0.0):
        raise ValueError("f_grid must be positive and strictly increasing")

    gnr = np.asarray(g_eval(f), dtype=float)
    if gnr.shape != f.shape:
        gnr = np.array([float(g_eval(x)) for x in f])
    if np.any(~np.isfinite(gnr)) or np.any(gnr <= 0.0):
        raise ValueError("GNR must be positive and finite on the grid")
    w = gamma / gnr
    widths = np.diff(f, prepend=0.0)

    def total_power(v: float) -> float:
        return float(np.sum(widths * np.maximum(0.0, v - w)))

    v_lo = 0.0
    v_hi = float(np.max(w)) + sigma2_budget / float(f[-1])
    v = v_hi
    iters = 0
    for iters in range(1, max_iters + 1):
        v = 0.5 * (v_lo + v_hi)
        p = total_power(v)
        if abs(p - sigma2_budget) <= rel_tol * sigma2_budget:
            break
        if p < sigma2_budget:
            v_lo = v
        else:
            v_hi = v
    else:
        raise RuntimeError("water-level bisection did not reach the power tolerance")

    psd = np.maximum(0.0, v - w)
    active = np.nonzero(psd > 0.0)[0]
    if active.size == 0:
        raise RuntimeError("no active frequencies at the converged water level")
    last = int(active[-1])
    f_max = float(f[last])

    islands: list[tuple[float, float]] = []
    idx = 0
    while idx < last:
        if psd[idx] == 0.0:
            start = idx
            while idx < last and psd[idx] == 0.0:
                idx += 1
            islands.append((float(f[start]), float(f[idx - 1])))
        else:
            idx += 1

    rate = float(np.sum(widths * np.log2(1.0 + psd * gnr / gamma)))
    return WaterfillSolution(
        f_max=f_max,
        water_level=float(v),
        f_hz=f,
        psd=psd,
        gnr=gnr,
        sigma2=total_power(v),
        rate=rate,
        island=tuple(islands),
        saturated=False,
        iterations=iters,
    )


def sigma2_from_power(power_budget: float, power_map=None, *, hi_guess: float = 1.0) -> float:
    """Invert a monotone power-draw map P_T = g(sigma2) to a variance budget.

    The identity map is the default (budgets already are variances).  Any
    strictly increasing callable works; the inverse is found by bracketed
    bisection.
    """
    if power_map is None:
        return float(power_budget)
    if power_budget <= 0.0:
        raise ValueError("power_budget must be > 0")
    lo, hi = 0.0, float(hi_guess)
    for _ in range(200):
        if power_map(hi) >= power_budget:
            break
        hi *= 2.0
    else:
        raise ValueError("power_map never reaches the requested budget")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if power_map(mid) < power_budget:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# CSV interface

_SOLUTION_HEADER = ["f_hz", "psd_v2_per_hz", "gnr_linear"]


def write_solution_csv(sol: WaterfillSolution, path) -> None:
    """Serialize a solution: one comment line with the scalars, then rows."""
    island_txt = ";".join(f"{repr(a)}:{repr(b)}" for a, b in sol.island)
    lines = [
        "# "
        f"f_max_hz={repr(sol.f_max)} "
        f"water_level_v2_per_hz={repr(sol.water_level)} "
        f"sigma2_v2={repr(sol.sigma2)} "
        f"rate_bit_s={repr(sol.rate)} "
        f"saturated={int(sol.saturated)} "
        f"iterations={sol.iterations} "
        f"island={island_txt}",
        ",".join(_SOLUTION_HEADER),
    ]
    for fv, sv, gv in zip(sol.f_hz, sol.psd, sol.gnr):
        lines.append(f"{repr(float(fv))},{repr(float(sv))},{repr(float(gv))}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_solution_csv(path) -> WaterfillSolution:
    text = Path(path).read_text().strip().splitlines()
    if len(text) < 3 or not text[0].startswith("# "):
        raise ValueError(f"{path}: not a waterfill solution CSV")
    meta = dict(kv.split("=", 1) for kv in text[0][2:].split(" ") if "=" in kv)
    if text[1].split(",") != _SOLUTION_HEADER:
        raise ValueError(f"{path}: expected header {','.join(_SOLUTION_HEADER)!r}")
    rows = np.array([[float(x) for x in line.split(",")] for line in text[2:]])
    island = tuple(
        (float(a), float(b))
        for a, b in (pair.split(":") for pair in meta["island"].split(";") if pair)
    )
    return WaterfillSolution(
        f_max=float(meta["f_max_hz"]),
        water_level=float(meta["water_level_v2_per_hz"]),
        f_hz=rows[:, 0],
        psd=rows[:, 1],
        gnr=rows[:, 2],
        sigma2=float(meta["sigma2_v2"]),
        rate=float(meta["rate_bit_s"]),
        island=island,
        saturated=bool(int(meta["saturated"])),
        iterations=int(meta["iterations"]),
    )
