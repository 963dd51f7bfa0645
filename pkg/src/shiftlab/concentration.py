"""Closed-form concentration bounds and their Monte Carlo verification.

The central inequality: color SD.x uniformly at random on an (S, D)-free
action; then for each pattern phi on S,

    P[ | |D ∩ O_phi| / |D|  -  k^{-|S|} | >= eps ]  <=  2 exp(-eps^2 |D| / (2|S|^3)),

obtained from the bounded-differences bound with s = |SD.x| <= |S||D|
independent trials, per-trial influence b = |S|, and deviation t = eps|D|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .groups import FiniteAction, GroupError, GroupSet, set_product
from .rng import color_matrix, derive_seed
from .shift import Pattern, as_fraction

WILSON_Z95 = 1.959963984540054


def scb_bound(s: int, b: float, t: float) -> float:
    """2 exp(-t^2 / (2 b^2 s)): deviation bound for a quantity determined by
    s independent trials, each moving it by at most b."""
    if s < 1:
        raise ValueError(f"trial count must be >= 1, got {s}")
    if b <= 0 or t < 0:
        raise ValueError("influence must be positive and deviation nonnegative")
    return 2.0 * math.exp(-(t * t) / (2.0 * b * b * s))


@dataclass(frozen=True)
class ConcentrationBoundInput:
    k: int
    S: GroupSet
    eps: Fraction
    D: GroupSet

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"alphabet size must be >= 1, got {self.k}")
        if as_fraction(self.eps) <= 0:
            raise ValueError("deviation tolerance must be positive")
        if len(self.S) == 0 or len(self.D) == 0:
            raise ValueError("S and D must be nonempty")


def concentration_bound(inp: ConcentrationBoundInput) -> float:
    """2 exp(-eps^2 |D| / (2 |S|^3)); equals scb_bound(|S||D|, |S|, eps|D|)."""
    s_sz, d_sz = len(inp.S), len(inp.D)
    eps = float(as_fraction(inp.eps))
    return 2.0 * math.exp(-eps * eps * d_sz / (2.0 * s_sz ** 3))


def wilson_interval(hits: int, trials: int, z: float = WILSON_Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = hits / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == trials else min(1.0, center + half)
    return lo, hi


@dataclass
class McEstimate:
    trials: int
    hits: int
    estimate: float
    wilson_95_upper: float
    wilson_95_lower: float
    mean_occurrences: float
    expected_occurrences: float
    expectation_zscore: float

    @property
    def expectation_within_3sigma(self) -> bool:
        return abs(self.expectation_zscore) <= 3.0


def _check_sd_free_at(action: FiniteAction, S: GroupSet, D: GroupSet, x: int):
    dx = []
    for d in D.elements:
        y = action.act(d, x)
        if y is None:
            raise GroupError(f"translate {d!r} . {x} is undefined")
        dx.append(y)
    if len(set(dx)) != len(dx):
        raise GroupError("action is not D-free at the chosen point")
    for y in set(dx) | {x}:
        sy = []
        for s in S.elements:
            z = action.act(s, y)
            if z is None:
                raise GroupError(f"translate {s!r} . {y} is undefined")
            sy.append(z)
        if len(set(sy)) != len(sy):
            raise GroupError("action is not S-free on the sampled orbit")


def mc_deviation_prob(inp: ConcentrationBoundInput, action: FiniteAction, x: int,
                      phi: Pattern, trials: int, seed: int,
                      chunk: int = 2000) -> McEstimate:
    """Estimate the deviation probability bounded by concentration_bound.

    Each trial colors SD.x uniformly at random and counts the elements of D
    at which phi occurs in the coloring pulled back through the action.  A
    trial is a hit when the frequency misses k^{-|S|} by eps or more (exact
    rational comparison).  The occurrence-count mean is also compared with
    |D| / k^{|S|}.
    """
    S, D, k = inp.S, inp.D, inp.k
    if tuple(phi.domain.elements) != tuple(S.elements):
        raise ValueError("pattern domain must be exactly S")
    _check_sd_free_at(action, S, D, x)

    sd = set_product(S, D)
    sites = []
    site_index = {}
    for e in sd.elements:
        y = action.act(e, x)
        if y is None:
            raise GroupError(f"translate {e!r} . {x} is undefined")
        if y not in site_index:
            site_index[y] = len(sites)
            sites.append(y)
    # column index of s*d . x for each s (rows follow sorted D)
    ctx = S.ctx
    cols = {}
    for s in S.elements:
        cols[s] = np.array(
            [site_index[action.act(ctx.op(s, d), x)] for d in D.elements], dtype=np.int64)

    d_sz, s_sz = len(D), len(S)
    eps = as_fraction(inp.eps)
    # |count * k^|S| - |D|| >= eps * |D| * k^|S|, as integers
    lhs_scale = k ** s_sz
    threshold_num = eps.numerator * d_sz * lhs_scale
    threshold_den = eps.denominator

    hits = 0
    occ_sum = 0.0
    occ_sumsq = 0.0
    run_seed = derive_seed(seed, 0xC0)
    for start in range(0, trials, chunk):
        rows = min(chunk, trials - start)
        colors = color_matrix(run_seed, rows, len(sites), k, row_offset=start)
        match = np.ones((rows, d_sz), dtype=bool)
        for s, col in zip(S.elements, phi.colors):
            match &= colors[:, cols[s]] == col
        counts = match.sum(axis=1).astype(np.int64)
        dev = np.abs(counts * lhs_scale - d_sz) * threshold_den
        hits += int((dev >= threshold_num).sum())
        occ_sum += float(counts.sum())
        occ_sumsq += float((counts.astype(float) ** 2).sum())

    mean_occ = occ_sum / trials
    expected = d_sz / (k ** s_sz)
    var = max(occ_sumsq / trials - mean_occ ** 2, 0.0)
    se = math.sqrt(var / trials) if var > 0 else 0.0
    z = 0.0 if se == 0 and mean_occ == expected else \
        (mean_occ - expected) / se if se > 0 else math.inf
    lo, hi = wilson_interval(hits, trials)
    return McEstimate(trials, hits, hits / trials, hi, lo, mean_occ, expected, z)


@dataclass
class SweepRow:
    k: int
    s_size: int
    eps: float
    d_size: int
    bound: float
    estimate: float
    wilson_lower: float
    wilson_upper: float
    expectation_zscore: float
    verdict: str  # "pass" | "fail" | "vacuous"

    @property
    def upper_within(self) -> bool:
        return self.wilson_upper <= self.bound


def wilson_zero_floor(trials: int, z: float = WILSON_Z95) -> float:
    """Smallest value the Wilson upper limit can take (at zero hits); bounds
    below this cannot be confirmed in the upper-limit sense at this sample
    size, only via the point estimate / lower limit."""
    return wilson_interval(0, trials, z)[1]


def deviation_sweep(grid, action_factory, trials: int, seed: int,
                    bound_cutoff: float = 0.9) -> list[SweepRow]:
    """Run mc_deviation_prob over a parameter grid.

    `grid` yields (k, S, eps, D); points whose closed-form bound is above
    `bound_cutoff` are reported as vacuous rather than compared.  A point
    fails only when the Wilson lower limit exceeds the bound or the
    occurrence-count mean misses its target by more than 3 sigma; a raw
    estimate above the bound is not by itself a failure.
    """
    from .shift import all_patterns

    rows = []
    for i, (k, S, eps, D) in enumerate(grid):
        inp = ConcentrationBoundInput(k, S, as_fraction(eps), D)
        bound = concentration_bound(inp)
        action = action_factory(k, S, eps, D)
        phi = all_patterns(S, k)[0]  # all-zero pattern: worst positive correlation
        est = mc_deviation_prob(inp, action, 0, phi, trials, derive_seed(seed, i))
        if bound >= bound_cutoff:
            verdict = "vacuous"
        elif est.wilson_95_lower <= bound and est.expectation_within_3sigma:
            verdict = "pass"
        else:
            verdict = "fail"
        rows.append(SweepRow(k, len(S), float(as_fraction(eps)), len(D), bound,
                             est.estimate, est.wilson_95_lower, est.wilson_95_upper,
                             est.expectation_zscore, verdict))
    return rows
