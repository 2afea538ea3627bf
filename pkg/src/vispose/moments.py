"""Closed-form moments of the squared displacement over a window of length dt.

The window either opens inside a pause (case 1) or inside a flight (case 2).
Each case is a double series over the number of flights touched by the
window (n) and the number of non-zero pauses among them (h). Every term is a
product of factorials, powers and one 1F1 value, accumulated in log space.

Two weightings of the n-flight terms are available. ``"planar"`` (default)
uses (m/2)_k / (1/2)_k, which times the kernel's (2k)! (m-1)! / (2k+m-1)!
is E|sum_j tau_j u_j|^(2k) for m pieces with uniform headings u_j and
durations tau_j split uniformly over the window, plus the survival factor
(1 - c) for windows that must cross a non-zero pause. ``"printed"`` uses the binomials C(m + k - 1, k) and
no survival factor; it is exact only for k = 1, c = 0 and is kept for
comparison.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .mobility import PositionModel
from .special import ConvergenceError, hyp1f1

VARIANTS = ("planar", "printed")
K_MAX_DEFAULT = 31
N_MAX_DEFAULT = 8
N_MAX_CAP = 256
TAIL_REL_TOL = 1e-6


class MomentConvergenceWarning(RuntimeWarning):
    pass


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _xlogy(n, logx):
    # n * log(x) with the 0 * log(0) = 0 convention
    n = np.asarray(n, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.where(n == 0, 0.0, n * logx)


def log_weight(m, k, variant: str = "planar"):
    """log of the direction weight for a window covering ``m`` flight pieces."""
    m = np.asarray(m, dtype=float)
    k = np.asarray(k, dtype=float)
    if variant == "planar":
        return gammaln(m / 2 + k) - gammaln(m / 2) - gammaln(0.5 + k) + gammaln(0.5)
    if variant == "printed":
        return gammaln(m + k) - gammaln(k + 1) - gammaln(m)
    raise ValueError(f"unknown variant {variant!r}")


def log_g_kernel(i, h, n, k, m_idx, model: PositionModel, dt: float):
    """Vectorized log of g_{i,h,n,k,m}; -inf where the term vanishes."""
    i, h, n, k, m_idx = np.broadcast_arrays(*(np.asarray(a) for a in (i, h, n, k, m_idx)))
    z = -(model.lam - model.mu) * dt
    f = hyp1f1(n, m_idx, z)
    f = np.broadcast_to(np.asarray(f, dtype=float), i.shape)
    out = (gammaln(2 * k + 1) + _xlogy(i, _log(model.mu)) + _xlogy(h, _log(model.lam))
           + (m_idx - 1) * math.log(dt) - model.mu * dt + np.log(f) - gammaln(m_idx)
           + 2 * k * math.log(model.v)
           + gammaln(i + 1) - gammaln(h + 1) - gammaln(i - h + 1)
           + _xlogy(i - h, _log(model.c)) + _xlogy(h, _log(1.0 - model.c)))
    return out


def g_kernel(i, h, n, k, m_idx, model: PositionModel, dt: float):
    """g_{i,h,n,k,m} from the displacement-moment series (metres^(2k))."""
    if np.any(np.asarray(h) > np.asarray(i)) or np.any(np.asarray(h) < 0):
        raise ValueError("need 0 <= h <= i")
    with np.errstate(over="raise"):
        try:
            out = np.exp(log_g_kernel(i, h, n, k, m_idx, model, dt))
        except FloatingPointError as exc:
            raise ArithmeticError(
                f"g kernel overflow at i={i}, h={h}, n={n}, k={k}, m={m_idx}, dt={dt}") from exc
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class CaseResult:
    """One case of the moment series for a single k.

    ``a_terms[n]`` / ``b_terms[n]`` hold E[psi^k 1(A_n)] / E[psi^k 1(B_n)];
    unused low indices are zero.
    """
    value: float
    a_terms: np.ndarray
    b_terms: np.ndarray
    n_max: int
    tail_ratio: float
    converged: bool

    def partial(self, n_upto: int) -> float:
        return float(self.a_terms[: n_upto + 1].sum() + self.b_terms[: n_upto + 1].sum())


def _grid(ks, n_lo, n_max, h_lo, h_hi_offset):
    # all (k, n, h) with n_lo <= n <= n_max and h_lo <= h <= n + h_hi_offset
    rows = [(k, n, h) for k in ks for n in range(n_lo, n_max + 1)
            for h in range(h_lo, n + h_hi_offset + 1)]
    if not rows:
        return (np.empty(0, dtype=int),) * 3
    arr = np.array(rows, dtype=int)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _accumulate(ks, n_max, k_idx, n_idx, logs):
    out = np.zeros((len(ks), n_max + 1))
    if k_idx.size:
        pos = np.searchsorted(ks, k_idx)
        np.add.at(out, (pos, n_idx), np.exp(logs))
    return out


def _case_terms(model: PositionModel, dt: float, ks: np.ndarray, n_max: int, variant: str):
    """Per-(k, n) term tables for both cases: (A1, B1, A2, B2)."""
    mu, lam, c = model.mu, model.lam, model.c
    planar = variant == "planar"
    surv = math.log1p(-c) if planar else 0.0

    # case 1, A_n: n >= 2
    k, n, h = _grid(ks, 2, n_max, 0, -2)
    lg = log_g_kernel(n - 2, h, h + 2, k, 2 * k + n + h + 1, model, dt)
    A1 = _accumulate(ks, n_max, k, n, lg + math.log(mu) + math.log(lam) + surv
                     + log_weight(n - 1, k, variant))
    # case 1, B_n: n >= 1
    k, n, h = _grid(ks, 1, n_max, 0, -1)
    lg = log_g_kernel(n - 1, h, h + 1, k, 2 * k + n + h + 1, model, dt)
    B1 = _accumulate(ks, n_max, k, n, lg + math.log(lam) + log_weight(n, k, variant))
    # case 2, A_n: n >= 0, single-flight-chain part plus the pause part for n >= 1
    k, n, h = _grid(ks, 1, n_max, 1, 0)
    lg = log_g_kernel(n, h, h, k, 2 * k + n + h + 1, model, dt)
    A2 = _accumulate(ks, n_max, k, n, lg + log_weight(n + 1, k, variant))
    kk, nn = np.meshgrid(ks, np.arange(n_max + 1), indexing="ij")
    head = (_xlogy(nn, _log(c)) + gammaln(2 * kk + 1) + _xlogy(nn, math.log(mu))
            + (2 * kk + nn) * math.log(dt) - mu * dt - gammaln(2 * kk + nn + 1)
            + 2 * kk * math.log(model.v))
    if planar:
        head = head + log_weight(nn + 1, kk, variant)
    A2 = A2 + np.exp(head)
    # case 2, B_n: n >= 1
    k, n, h = _grid(ks, 1, n_max, 0, -1)
    lg = log_g_kernel(n - 1, h, h + 1, k, 2 * k + n + h + 1, model, dt)
    B2 = _accumulate(ks, n_max, k, n, lg + math.log(mu) + surv + log_weight(n, k, variant))
    return A1, B1, A2, B2


def _tail(a: np.ndarray, b: np.ndarray) -> tuple[float, bool]:
    per_n = a + b
    total = per_n.sum()
    if total == 0:
        return 0.0, True
    last = per_n[-1]
    prev = per_n[-2] if per_n.size > 1 else 0.0
    ratio = last / total
    growing = last > 0 and prev > 0 and last >= prev
    return float(ratio), (ratio < TAIL_REL_TOL and not growing)


def _check(model: PositionModel, dt: float, variant: str):
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be finite and > 0, got {dt!r}")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")


def _build_cases(model, dt, ks, n_max, variant, auto_grow):
    while True:
        A1, B1, A2, B2 = _case_terms(model, dt, ks, n_max, variant)
        tails = [_tail(A1[j], B1[j]) for j in range(len(ks))] + \
                [_tail(A2[j], B2[j]) for j in range(len(ks))]
        ok = all(t[1] for t in tails)
        if ok or not auto_grow or n_max >= N_MAX_CAP:
            break
        n_max = min(2 * n_max, N_MAX_CAP)
    case1, case2 = [], []
    for j in range(len(ks)):
        r1, c1 = _tail(A1[j], B1[j])
        r2, c2 = _tail(A2[j], B2[j])
        case1.append(CaseResult(float(A1[j].sum() + B1[j].sum()), A1[j], B1[j], n_max, r1, c1))
        case2.append(CaseResult(float(A2[j].sum() + B2[j].sum()), A2[j], B2[j], n_max, r2, c2))
        if not (c1 and c2):
            warnings.warn(f"moment series for k={ks[j]} has not settled at n_max={n_max} "
                          f"(tail ratios {r1:.2e}, {r2:.2e})", MomentConvergenceWarning, stacklevel=3)
    return case1, case2


def moments_case1(model: PositionModel, dt: float, k: int, n_max: int = N_MAX_DEFAULT,
                  variant: str = "planar", auto_grow: bool = False) -> CaseResult:
    """E[psi^k | the window opens inside a pause]."""
    _check(model, dt, variant)
    if k < 1:
        raise ValueError("k must be >= 1")
    return _build_cases(model, dt, np.array([k]), n_max, variant, auto_grow)[0][0]


def moments_case2(model: PositionModel, dt: float, k: int, n_max: int = N_MAX_DEFAULT,
                  variant: str = "planar", auto_grow: bool = False) -> CaseResult:
    """E[psi^k | the window opens inside a flight]."""
    _check(model, dt, variant)
    if k < 1:
        raise ValueError("k must be >= 1")
    return _build_cases(model, dt, np.array([k]), n_max, variant, auto_grow)[1][0]


def p_flight(model: PositionModel) -> float:
    """Stationary probability that a time point falls inside a flight."""
    r = model.lam / (1.0 - model.c)
    return r / (r + model.mu)


@dataclass(frozen=True, eq=False)
class MomentTable:
    dt: float
    m: np.ndarray
    m_case1: np.ndarray
    m_case2: np.ndarray
    p_flight: float
    n_max: int
    variant: str
    per_n_terms: dict = field(repr=False)
    converged: bool = True

    @property
    def k_max(self) -> int:
        return self.m.size - 1

    def bound(self, v: float) -> np.ndarray:
        return (v * self.dt) ** (2 * np.arange(self.m.size))


def moments(model: PositionModel, dt: float, k_max: int = K_MAX_DEFAULT,
            n_max: int = N_MAX_DEFAULT, variant: str = "planar",
            auto_grow: bool = True) -> MomentTable:
    """m(0..k_max) mixing both cases by the flight probability.

    With ``auto_grow`` the flight-count cap doubles until the last included
    n contributes less than 1e-6 of every series.
    """
    _check(model, dt, variant)
    if not 1 <= k_max <= 40:
        raise ValueError("k_max must lie in [1, 40]")
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    ks = np.arange(1, k_max + 1)
    case1, case2 = _build_cases(model, dt, ks, n_max, variant, auto_grow)
    p = p_flight(model)
    m1 = np.concatenate([[1.0], [r.value for r in case1]])
    m2 = np.concatenate([[1.0], [r.value for r in case2]])
    m = (1.0 - p) * m1 + p * m2
    per_n = {
        "case1_A": np.array([r.a_terms for r in case1]),
        "case1_B": np.array([r.b_terms for r in case1]),
        "case2_A": np.array([r.a_terms for r in case2]),
        "case2_B": np.array([r.b_terms for r in case2]),
    }
    conv = all(r.converged for r in case1 + case2)
    return MomentTable(dt, m, m1, m2, p, case1[0].n_max, variant, per_n, conv)


@dataclass(frozen=True)
class MGFResult:
    value: float
    last_term: float
    terms: int


def mgf_from_table(table: MomentTable, tau: float, k_terms: int | None = None) -> MGFResult:
    """Partial sum of m(k) tau^k / k!; clamped to [0, 1] for tau <= 0.

    Terms must be shrinking in magnitude by the cap, otherwise the partial sum
    is not trusted.
    """
    if not math.isfinite(tau):
        raise ValueError("tau must be finite")
    k_terms = table.k_max if k_terms is None else k_terms
    if k_terms > table.k_max:
        raise ValueError(f"table holds moments up to k={table.k_max}, need {k_terms}")
    if tau == 0:
        return MGFResult(1.0, 0.0 if k_terms else 1.0, k_terms)
    ks = np.arange(k_terms + 1)
    with np.errstate(divide="ignore"):
        logmag = np.log(table.m[: k_terms + 1]) + ks * _log(abs(tau)) - gammaln(ks + 1)
    logmag[0] = 0.0
    mags = np.exp(logmag)
    if k_terms >= 2:
        peak = int(np.argmax(mags))
        if peak >= k_terms - 1 and mags[-1] > 1e-16 * mags.max():
            raise ConvergenceError(f"MGF series terms still growing at k={k_terms} for tau={tau}")
    signs = np.where(ks % 2 == 1, -1.0, 1.0) if tau < 0 else np.ones_like(mags)
    val = math.fsum(signs * mags)
    if tau <= 0:
        val = min(max(val, 0.0), 1.0)
    return MGFResult(val, float(mags[-1]), k_terms)


def mgf(model: PositionModel, dt: float, tau: float, k_terms: int = 20,
        variant: str = "planar") -> MGFResult:
    """Moment generating function E[exp(tau psi)] from the moment series."""
    table = moments(model, dt, k_max=max(k_terms, 1), variant=variant)
    return mgf_from_table(table, tau, k_terms)
