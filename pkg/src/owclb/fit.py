"""Fit the canonical M-zero/N-pole GNR model to tabulated magnitude data.

Measured or circuit-simulated responses (and non-rational stages such as
Gaussian fiber or sinc beam-squint models) enter the closed-form
optimizers through this module: a damped Gauss-Newton solve minimizes the
dB-domain squared error

    sum_i ( 10*log10(model(f_i)) - 10*log10(data_i) )^2

over {log gnr0, log fz_m, log fp_n}.  Working in dB with log parameters
keeps every corner positive without explicit constraints and weights the
decades of a wideband response evenly.  The damping factor follows the
usual Levenberg schedule: start 1e-3, x10 on a rejected step, /10 on an
accepted one.  The landscape is nonconvex with permutation symmetry, so
the solve is multistarted from seed-controlled log-uniform corner draws
and the best start wins; corners are reported sorted ascending.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linkchain import MagSqPoleZeroGnr, ResponseTable

_Q10 = 10.0 / math.log(10.0)  # dB per natural-log unit


@dataclass(frozen=True)
class FitConfig:
    """Model order, fitted frequency window and solver controls."""

    n_zeros: int
    n_poles: int
    f_range: tuple[float, float]
    max_iters: int = 200
    multistarts: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.n_zeros < 0:
            raise ValueError("n_zeros must be >= 0")
        if self.n_poles < 1:
            raise ValueError("n_poles must be >= 1")
        if self.n_poles < self.n_zeros:
            raise ValueError("n_poles must be >= n_zeros for a low-pass target")
        lo, hi = (float(self.f_range[0]), float(self.f_range[1]))
        if not (0.0 < lo < hi) or not math.isfinite(hi):
            raise ValueError(f"f_range must be ascending positive, got {self.f_range!r}")
        object.__setattr__(self, "f_range", (lo, hi))
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.multistarts < 1:
            raise ValueError("multistarts must be >= 1")


@dataclass(frozen=True, eq=False)
class FitResult:
    model: MagSqPoleZeroGnr
    rms_db_error: float
    per_point_residuals: np.ndarray
    notes: tuple[str, ...] = ()


def _model_db(c: float, log_z: np.ndarray, log_p: np.ndarray, u: np.ndarray) -> np.ndarray:
    y = np.full_like(u, c)
    for l in log_z:
        y += _Q10 * np.log1p(u / math.exp(2.0 * l))
    for l in log_p:
        y -= _Q10 * np.log1p(u / math.exp(2.0 * l))
    return y


def _jacobian(log_z: np.ndarray, log_p: np.ndarray, u: np.ndarray) -> np.ndarray:
    n = u.size
    cols = [np.ones(n)]
    for l in log_z:
        w = math.exp(2.0 * l)
        cols.append(-2.0 * _Q10 * u / (w + u))
    for l in log_p:
        w = math.exp(2.0 * l)
        cols.append(2.0 * _Q10 * u / (w + u))
    return np.column_stack(cols)


def _gauss_newton(u, y_data, log_z0, log_p0, l_bounds, max_iters):
    m = log_z0.size
    log_z = log_z0.copy()
    log_p = log_p0.copy()
    # offset is linear in the residual: start it at its optimum
    c = float(np.mean(y_data - _model_db(0.0, log_z, log_p, u)))
    r = _model_db(c, log_z, log_p, u) - y_data
    cost = float(r @ r)
    lam = 1e-3
    for _ in range(max_iters):
        jac = _jacobian(log_z, log_p, u)
        a = jac.T @ jac
        gvec = jac.T @ r
        diag = np.diag(a).copy()
        diag[diag <= 0.0] = 1.0
        accepted = False
        for _damp in range(25):
            try:
                step = np.linalg.solve(a + lam * np.diag(diag), -gvec)
            except np.linalg.LinAlgError:
                lam = min(lam * 10.0, 1e12)
                continue
            c_t = c + step[0]
            log_z_t = np.clip(log_z + step[1 : 1 + m], *l_bounds)
            log_p_t = np.clip(log_p + step[1 + m :], *l_bounds)
            r_t = _model_db(c_t, log_z_t, log_p_t, u) - y_data
            cost_t = float(r_t @ r_t)
            if math.isfinite(cost_t) and cost_t <= cost:
                c, log_z, log_p, r, cost = c_t, log_z_t, log_p_t, r_t, cost_t
                lam = max(lam / 10.0, 1e-14)
                accepted = True
                break
            lam = min(lam * 10.0, 1e12)
        if not accepted or float(np.max(np.abs(step))) < 1e-13:
            break
    return cost, c, log_z, log_p, r


def fit_polezero(data: ResponseTable, cfg: FitConfig) -> FitResult:
    """Fit gnr0 and corner frequencies to the table rows inside f_range.

    Raises ValueError when fewer than 2*(M+N+1) rows fall in the window
    and RuntimeError (carrying the best partial rms) when every start
    fails to produce a finite solve.
    """
    lo, hi = cfg.f_range
    mask = (data.frequencies >= lo) & (data.frequencies <= hi)
    f = data.frequencies[mask]
    v = data.values[mask]
    needed = 2 * (cfg.n_zeros + cfg.n_poles + 1)
    if f.size < needed:
        raise ValueError(
            f"need at least {needed} rows inside f_range, found {f.size}"
        )
    u = np.square(f)
    y_data = 10.0 * np.log10(v)
    l_bounds = (math.log(lo) - 16.0, math.log(hi) + 16.0)

    rng = np.random.default_rng(cfg.seed)
    best = None
    for _start in range(cfg.multistarts):
        log_z0 = rng.uniform(math.log(lo), math.log(hi), cfg.n_zeros)
        log_p0 = rng.uniform(math.log(lo), math.log(hi), cfg.n_poles)
        cost, c, log_z, log_p, r = _gauss_newton(
            u, y_data, log_z0, log_p0, l_bounds, cfg.max_iters
        )
        if math.isfinite(cost) and (best is None or cost < best[0]):
            best = (cost, c, log_z, log_p, r)
    if best is None:
        raise RuntimeError("all fit starts diverged")

    _cost, c, log_z, log_p, r = best
    model = MagSqPoleZeroGnr(
        gnr0=10.0 ** (c / 10.0),
        zeros=tuple(float(np.exp(l)) for l in np.sort(log_z)),
        poles=tuple(float(np.exp(l)) for l in np.sort(log_p)),
    )
    notes = []
    for name, corners in (("zero", model.zeros), ("pole", model.poles)):
        for fc in corners:
            if fc > hi:
                notes.append(f"{name} at {fc:.6g} Hz lies above the fitted range")
            elif fc < lo:
                notes.append(f"{name} at {fc:.6g} Hz lies below the fitted range")
    rms = float(np.sqrt(np.mean(np.square(r))))
    return FitResult(
        model=model,
        rms_db_error=rms,
        per_point_residuals=r,
        notes=tuple(notes),
    )


def residual_scan(data: ResponseTable, model: MagSqPoleZeroGnr) -> np.ndarray:
    """Per-row residual 10*log10(model) - 10*log10(data) in dB."""
    return 10.0 * np.log10(model.evaluate(data.frequencies)) - 10.0 * np.log10(data.values)


def scan_orders(data: ResponseTable, cfg: FitConfig) -> list[tuple[int, int, float]]:
    """Refit over the (M, N) grid up to the configured order; returns
    (n_zeros, n_poles, rms_db) rows for model-order inspection."""
    out = []
    for m in range(cfg.n_zeros + 1):
        for n in range(max(1, m), cfg.n_poles + 1):
            sub = FitConfig(
                n_zeros=m,
                n_poles=n,
                f_range=cfg.f_range,
                max_iters=cfg.max_iters,
                multistarts=cfg.multistarts,
                seed=cfg.seed,
            )
            try:
                res = fit_polezero(data, sub)
            except ValueError:
                continue
            out.append((m, n, res.rms_db_error))
    return out


def model_to_channel_dict(model: MagSqPoleZeroGnr) -> dict:
    """Channel-chain JSON fragment whose reduced GNR equals the model.

    The fitted GNR is packed as a single rational stage with amplitude
    sqrt(gnr0) over a unit white-noise floor, so it loads back through the
    normal chain reader.
    """
    return {
        "stages": [
            {
                "kind": "RationalPoleZero",
                "params": {
                    "dc_gain": math.sqrt(model.gnr0),
                    "zeros": list(model.zeros),
                    "poles": list(model.poles),
                },
            }
        ],
        "noise": {"floor": 1.0},
    }
