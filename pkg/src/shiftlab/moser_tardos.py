"""Resampling dynamics with per-point randomness tapes.

Every point owns a virtual infinite tape of i.i.d. uniform colors; the
current coloring reads symbol t(x) of each tape.  While some anchored bad
event is violated, a maximal disjoint batch of violated events is selected
(greedily, in (family index, anchor) order) and every point in their
domains advances its tape by one.  Tapes are recomputed from the
counter-based derivation, never stored, so memory scales with the point
count and not with resample depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .groups import CyclicTranslation, FiniteAction, GroupError, is_sd_free
from .lll import BadEvent, ExplicitEvent, FrequencyDeviationEvent
from .rng import uniform_colors
from .shift import all_patterns
from .windows import circular_window_sums


@dataclass(frozen=True)
class TapeSpace:
    """symbol(point, t) is a pure function of (seed, point, t)."""

    seed: int
    k: int

    def symbol(self, point: int, t: int) -> int:
        return int(uniform_colors(self.seed, point, t, self.k)[()])

    def symbols(self, points: np.ndarray, ts: np.ndarray) -> np.ndarray:
        return uniform_colors(self.seed, points, ts, self.k)

    def row(self, n_points: int, t: int = 0) -> np.ndarray:
        pts = np.arange(n_points)
        return self.symbols(pts, np.full(n_points, t))


@dataclass(frozen=True)
class EventFamily:
    """Indexed family of bad events; indices must be distinct."""

    members: tuple  # ((n, BadEvent), ...)

    def __post_init__(self):
        ns = [n for n, _ in self.members]
        if len(set(ns)) != len(ns):
            raise ValueError("family indices must be distinct")
        for _, ev in self.members:
            if len(ev.domain) == 0:
                raise ValueError("event domains must be nonempty")
        # canonical order: selection below walks members index-major
        object.__setattr__(self, "members", tuple(sorted(self.members,
                                                         key=lambda m: m[0])))

    @classmethod
    def of(cls, *events: BadEvent) -> "EventFamily":
        return cls(tuple(enumerate(events)))

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)


@dataclass
class MTResult:
    coloring: np.ndarray          # g(p) = symbol(p, t(p))
    t: np.ndarray                 # per-point resample counts
    index_counts: dict            # (n, anchor) -> how many steps selected it
    steps: int
    converged: bool
    defect_points: tuple          # violated anchors remaining (empty iff converged)
    tape: TapeSpace

    def index_total(self, n: int) -> int:
        return sum(c for (m, _x), c in self.index_counts.items() if m == n)


# -- violated-anchor detection ------------------------------------------------


def _pullback_colors(action: FiniteAction, elems, g: np.ndarray) -> list[np.ndarray]:
    pts = action.points()
    out = []
    for e in elems:
        img = action.act_array(e, pts)
        if np.any(img < 0):
            raise GroupError(f"translate {e!r} is undefined somewhere; need a total action")
        out.append(g[img])
    return out


def frequency_counts(action: FiniteAction, ev: FrequencyDeviationEvent,
                     g: np.ndarray):
    """Yield (pattern colors, counts) with counts[x] = number of d in D at
    which the pattern occurs in the coloring pulled back at anchor x."""
    if ev.k ** len(ev.S) > 4096:
        raise ValueError("pattern space too large to scan; keep k^|S| small")
    s_elems = ev.S.elements
    pulled = _pullback_colors(action, s_elems, g)
    fast_cyclic = isinstance(action, CyclicTranslation)
    d_elems = ev.D.elements
    if not fast_cyclic:
        d_maps = []
        for d in d_elems:
            dm = action.act_array(d, action.points())
            if np.any(dm < 0):
                raise GroupError(f"translate {d!r} is undefined somewhere; "
                                 "need a total action")
            d_maps.append(dm)
    for pat in all_patterns(ev.S, ev.k):
        w = np.ones(action.n_points, dtype=bool)
        for arr, col in zip(pulled, pat.colors):
            w &= arr == col
        if fast_cyclic:
            counts = circular_window_sums(w.astype(np.int8), d_elems, action.modulus)
        else:
            counts = np.zeros(action.n_points, dtype=np.int64)
            for dm in d_maps:
                counts += w[dm]
        yield pat, counts


def violated_anchors(action: FiniteAction, ev: BadEvent, g: np.ndarray) -> np.ndarray:
    """Anchors x whose pulled-back coloring lies in the event."""
    if isinstance(ev, FrequencyDeviationEvent):
        num, den = ev.deviation_threshold()
        scale = ev.k ** len(ev.S)
        d_sz = len(ev.D)
        bad = np.zeros(action.n_points, dtype=bool)
        for _pat, counts in frequency_counts(action, ev, g):
            bad |= np.abs(counts * scale - d_sz) * den >= num
        return np.flatnonzero(bad)
    if isinstance(ev, ExplicitEvent):
        pulled = _pullback_colors(action, ev.domain.elements, g)
        bad = np.zeros(action.n_points, dtype=bool)
        for pat in ev.patterns:
            hit = np.ones(action.n_points, dtype=bool)
            for arr, col in zip(pulled, pat.colors):
                hit &= arr == col
            bad |= hit
        return np.flatnonzero(bad)
    raise TypeError(f"unsupported event type {type(ev).__name__}")


def _domain_points(action: FiniteAction, f_elems, x: int) -> np.ndarray:
    if isinstance(action, CyclicTranslation):
        return (np.asarray(f_elems, dtype=np.int64) + x) % action.modulus
    out = np.empty(len(f_elems), dtype=np.int64)
    for i, e in enumerate(f_elems):
        y = action.act(e, x)
        if y is None:
            raise GroupError(f"translate {e!r} . {x} is undefined")
        out[i] = y
    return out


# -- the resampling loop -------------------------------------------------------


def run_mt(action: FiniteAction, family: EventFamily, tape: TapeSpace,
           max_steps: Optional[int] = None, check_maximality: bool = False,
           transcript: Optional[list] = None) -> MTResult:
    """Iterate resampling until no anchored event is violated.

    Preconditions (checked): the action is total and F_n-free for every
    member.  Exhausting max_steps is a reported outcome (converged=False
    with the residual violated anchors), not an exception.
    """
    if not action.total:
        raise GroupError("the resampling process needs a total action")
    for n, ev in family:
        if is_sd_free(action, [ev.domain]) is not True:
            raise GroupError(f"action is not free for the domain of event {n}")
    if max_steps is None:
        max_steps = 1000 * max(1, len(family)) * action.n_points

    n_pts = action.n_points
    t = np.zeros(n_pts, dtype=np.int64)
    g = tape.row(n_pts, 0)
    domains = {n: ev.domain.elements for n, ev in family}
    index_counts: dict = {}
    steps = 0
    converged = False
    residual: tuple = ()

    while True:
        candidates = []
        for n, ev in family:
            for x in violated_anchors(action, ev, g):
                candidates.append((n, int(x)))
        if not candidates:
            converged = True
            break
        if steps >= max_steps:
            residual = tuple(sorted({x for _n, x in candidates}))
            break

        claimed = np.zeros(n_pts, dtype=bool)
        selected = []
        deferred = []
        for n, x in candidates:  # (n, anchor) order: families ascending, anchors ascending
            dom = _domain_points(action, domains[n], x)
            if claimed[dom].any():
                deferred.append(dom)
                continue
            claimed[dom] = True
            selected.append((n, x))
            index_counts[(n, x)] = index_counts.get((n, x), 0) + 1
        if check_maximality:
            for dom in deferred:
                assert claimed[dom].any(), "selection was not maximal"

        touched = np.flatnonzero(claimed)
        t[touched] += 1
        g[touched] = tape.symbols(touched, t[touched])
        if transcript is not None:
            transcript.append({"step": steps, "selected": [[n, x] for n, x in selected],
                               "tape_advanced": int(touched.size)})
        steps += 1

    return MTResult(g, t, index_counts, steps, converged, residual, tape)


# -- post-run measurements -----------------------------------------------------


def defect(coloring: np.ndarray, ev: BadEvent, action: FiniteAction,
           translated: bool = False) -> tuple:
    """Anchors whose pulled-back coloring lies in the event; with
    translated=True, the union of their event-domain translates instead."""
    anchors = violated_anchors(action, ev, coloring)
    if not translated:
        return tuple(int(a) for a in anchors)
    pts: set[int] = set()
    for x in anchors:
        pts.update(int(p) for p in _domain_points(action, ev.domain.elements, int(x)))
    return tuple(sorted(pts))


def defect_translation_identity(coloring: np.ndarray, ev: BadEvent,
                                action: FiniteAction) -> bool:
    """Def(f, induced family) equals F . Def(f, event): checked exactly."""
    direct = set()
    for x in defect(coloring, ev, action):
        direct.update(int(p) for p in _domain_points(action, ev.domain.elements, x))
    return tuple(sorted(direct)) == defect(coloring, ev, action, translated=True)


def tape_consistency(result: MTResult) -> bool:
    """Final coloring reads symbol t(p) of every tape, exactly."""
    expect = result.tape.symbols(np.arange(result.t.size), result.t)
    return bool(np.array_equal(expect, result.coloring))


def stabilization_ledger(result: MTResult, action: FiniteAction,
                         family: EventFamily) -> bool:
    """Exact integer identity: each point's resample count equals the sum of
    selection counts of the events whose domains cover it."""
    t_check = np.zeros(result.t.size, dtype=np.int64)
    domains = {n: ev.domain.elements for n, ev in family}
    for (n, x), c in result.index_counts.items():
        t_check[_domain_points(action, domains[n], x)] += c
    return bool(np.array_equal(t_check, result.t))


@dataclass
class IndexReportRow:
    n: int
    mean_index: float
    bound: float

    @property
    def within(self) -> bool:
        return self.mean_index <= self.bound


def index_report(result: MTResult, omegas: dict) -> list[IndexReportRow]:
    """Mean selection count per anchor for each family index, against the
    witness bound omega/(1-omega)."""
    n_pts = result.t.size
    rows = []
    for n, w in sorted(omegas.items()):
        if not (0 <= w < 1):
            raise ValueError(f"witness weight must be in [0,1), got {w}")
        rows.append(IndexReportRow(n, result.index_total(n) / n_pts, w / (1.0 - w)))
    return rows


@dataclass
class ResampleFractions:
    frac_resampled: Fraction      # points with t >= 1
    frac_changed: Fraction        # points whose final color differs from tape row 0
    bound: Optional[float]        # sum |F_n| omega(n)/(1-omega(n)), when given

    @property
    def within(self) -> Optional[bool]:
        return None if self.bound is None else float(self.frac_resampled) <= self.bound


def resample_fraction(result: MTResult, family: Optional[EventFamily] = None,
                      omegas: Optional[dict] = None) -> ResampleFractions:
    n_pts = result.t.size
    resampled = int((result.t >= 1).sum())
    first_row = result.tape.row(n_pts, 0)
    changed = int((result.coloring != first_row).sum())
    bound = None
    if family is not None and omegas is not None:
        bound = sum(len(ev.domain) * omegas[n] / (1.0 - omegas[n]) for n, ev in family)
    return ResampleFractions(Fraction(resampled, n_pts), Fraction(changed, n_pts), bound)
