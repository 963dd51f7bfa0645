"""Batch experiment runner.

    shiftlab run <config.json> [--jobs N] [--out DIR] [--transcript]
    shiftlab describe <kind>
    shiftlab list

Configs are JSON with a mandatory "experiment" key naming the kind and a
kind-specific parameter block (unknown keys are rejected).  Each run emits
<kind>-summary.json plus CSV detail next to it; summaries embed the
resolved config and the tool version and are byte-identical for identical
config+seed (wall-clock data goes to a separate -meta.json).

Exit codes: 0 success, 1 usage or config error, 2 verdict failure (an
asserted bound was violated empirically).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import __version__
from .concentration import deviation_sweep
from .ergodic import (AveragingSequence, ergodic_convergence_experiment,
                      near_invariant_measure, periodic_cylinder_table,
                      uniform_discrepancy_experiment)
from .groups import CyclicTranslation, GroupCtx, GroupSet, integer_interval
from .lll import (CertificationError, FrequencyDeviationEvent, GLLLWitnessSpec,
                  check_glll_witness, find_log_growth_constant,
                  find_slll_threshold, slll_stats)
from .moser_tardos import (EventFamily, TapeSpace, resample_fraction, run_mt,
                           stabilization_ledger, tape_consistency)
from .rng import derive_seed
from .rokhlin import (bad_sequence_experiment, build_tower, plan_intervals,
                      tower_level_rows, verify_capture)
from .shift import Pattern, as_fraction

EXIT_OK, EXIT_USAGE, EXIT_VERDICT = 0, 1, 2


class ConfigError(ValueError):
    pass


# -- parameter schemas -------------------------------------------------------

SCHEMAS = {
    "ergodic-converge": {
        "doc": "Sample i.i.d. uniform configurations and compare, per n, the "
               "fraction of samples whose pattern frequency over D_m still "
               "misses 1/k^|S| by eps for some m >= n with the summed bound "
               "2 exp(-eps^2 |D_m| / (2|S|^3)).",
        "params": {
            "k": ("int", True, "alphabet size"),
            "S": ("list[int]", True, "pattern domain in the integers"),
            "eps": ("decimal string", True, "deviation tolerance"),
            "C": ("number", True, "log-growth constant: |D_n| = ceil(C log(n+2))"),
            "n_max": ("int", True, "largest averaging index"),
            "samples": ("int", True, "number of sampled configurations"),
            "seed": ("int", True, "stream seed"),
        },
    },
    "concentration-sweep": {
        "doc": "Monte Carlo estimate of the deviation probability of pattern "
               "frequencies under uniform coloring, against the closed-form "
               "bound 2 exp(-eps^2 |D| / (2|S|^3)) on a cyclic space.",
        "params": {
            "ks": ("list[int]", True, "alphabet sizes"),
            "s_sizes": ("list[int]", True, "interval sizes for S = {0..s-1}"),
            "eps_list": ("list[decimal string]", True, "tolerances"),
            "d_sizes": ("list[int]", True, "interval sizes for D"),
            "trials": ("int", True, "Monte Carlo trials per grid point"),
            "modulus": ("int", True, "cyclic space size"),
            "seed": ("int", True, "stream seed"),
        },
    },
    "lll-check": {
        "doc": "Certify an instance: symmetric margin e*p*(d+1) < 1 with the "
               "threshold search over |D|, or the witness inequalities for a "
               "log-growth family with omega(n) = exp(-a |D_n|).",
        "params": {
            "mode": ("'slll' | 'glll'", True, "certification flavor"),
            "k": ("int", True, "alphabet size"),
            "s_size": ("int", True, "interval size for S = {0..s-1}"),
            "eps": ("decimal string", True, "deviation tolerance"),
            "d_size": ("int", False, "slll: interval size for D"),
            "shape": ("'interval' | 'generic'", False, "slll: degree bound mode"),
            "search_cap": ("int", False, "slll: threshold search cap (default 100000)"),
            "a": ("number", False, "glll: witness exponent"),
            "C": ("number", False, "glll: log-growth constant (computed when omitted)"),
            "n_prefix": ("int", False, "glll: checked prefix length (default 64)"),
            "eps_sum": ("decimal string", False, "glll: budget target (default eps)"),
        },
    },
    "moser-tardos": {
        "doc": "Run the resampling process on a cyclic space for a family of "
               "frequency events, over one or many seeds; report convergence, "
               "resample fractions, selection counts, and the exact "
               "per-point ledger identity.",
        "params": {
            "k": ("int", True, "alphabet size"),
            "modulus": ("int", True, "cyclic space size"),
            "s_size": ("int", True, "interval size for S"),
            "eps": ("decimal string", True, "deviation tolerance"),
            "d_size": ("int", True, "interval size for D"),
            "seeds": ("int | list[int]", True, "seed count (0..n-1) or explicit list"),
            "max_steps": ("int", False, "step budget (default 1000 per induced event)"),
            "a": ("number", False, "witness exponent (default eps^2/(4|S|^3))"),
            "expect_certified": ("bool", False, "fail (exit 2) unless all seeds converge"),
        },
    },
    "uniform-discrepancy": {
        "doc": "Resample a log-growth family of frequency events until every "
               "point sees every pattern with frequency within eps over every "
               "D_n; compares the resampled fraction with the witness budget.",
        "params": {
            "k": ("int", True, "alphabet size"),
            "s_size": ("int", True, "interval size for S"),
            "eps": ("decimal string", True, "deviation tolerance"),
            "d_sizes": ("list[int]", True, "sizes of the (interval) averaging sets"),
            "modulus": ("int", True, "cyclic space size"),
            "seed": ("int", True, "tape seed"),
            "a": ("number", False, "witness exponent"),
        },
    },
    "resfin": {
        "doc": "Exact cylinder table of the uniform measure on colorings "
               "constant on residue classes mod a period, with exact "
               "shift-invariance verification.",
        "params": {
            "k": ("int", True, "alphabet size"),
            "period": ("int", True, "residue period"),
            "patterns": ("list[{sites, colors}]", True, "patterns to tabulate"),
            "shifts": ("list[int]", False, "shifts to verify (default [1, -1])"),
        },
    },
    "approx-invariant": {
        "doc": "Resample one certified frequency event on a cyclic space and "
               "read off a finitely supported pattern distribution whose "
               "shifted cylinder values all stay within eps of 1/k^|S|.",
        "params": {
            "k": ("int", True, "alphabet size"),
            "s_size": ("int", True, "interval size for S"),
            "eps": ("decimal string", True, "deviation tolerance"),
            "d_size": ("int", True, "interval size for D"),
            "modulus": ("int", True, "cyclic space size"),
            "seed": ("int", True, "tape seed"),
            "shift_test_range": ("int", False, "how many shifts to test (default all)"),
        },
    },
    "rokhlin-bad": {
        "doc": "Iterated tower construction: stages with eps_i = 2^{-i-1} on a "
               "shared cyclic space; exact tail measures mu(A_>=q) <= 2^{-q} "
               "and per-band capture fractions for the windowed averages "
               "(exactly 1 on the union, exactly 0 on its complement).",
        "params": {
            "h": ("int | list[int]", True, "requested interval lengths"),
            "i_max": ("int", True, "number of stages"),
            "seed": ("int", True, "offset seed"),
            "k_probe": ("list[int]", False, "union tail indices to probe"),
            "min_capture": ("number", False, "per-band capture threshold (default 0.99)"),
            "single": ("{eps, h, modulus}", False, "also build one explicit tower"),
        },
    },
}


def _validate(kind: str, params: dict) -> dict:
    schema = SCHEMAS[kind]["params"]
    unknown = set(params) - set(schema)
    if unknown:
        raise ConfigError(f"unknown keys for {kind}: {sorted(unknown)}")
    missing = [p for p, (_t, req, _d) in schema.items() if req and p not in params]
    if missing:
        raise ConfigError(f"missing required keys for {kind}: {missing}")
    return params


def _frac(v) -> Fraction:
    return as_fraction(v)


def _json_default(o):
    if isinstance(o, Fraction):
        return {"num": o.numerator, "den": o.denominator, "approx": float(o)}
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"not serializable: {type(o)!r}")


# -- experiment drivers --------------------------------------------------------


def _run_ergodic_converge(p, out, jobs, transcript):
    S = GroupSet.from_iterable(GroupCtx("integers"), p["S"])
    rep = ergodic_convergence_experiment(
        p["k"], S, _frac(p["eps"]), AveragingSequence.log_growth(p["C"]),
        p["n_max"], p["samples"], p["seed"])
    ok = rep.exceedances_within()
    _write_csv(out / "ergodic-converge-detail.csv",
               ["n", "d_size", "worst_dev", "exceed_frac_beyond", "bc_tail"],
               rep.csv_rows())
    summary = {"verdict": "pass" if ok else "fail",
               "first_quiet_n": rep.first_quiet_n, "samples": rep.samples}
    return summary, EXIT_OK if ok else EXIT_VERDICT


def _run_concentration_sweep(p, out, jobs, transcript):
    grid = [(k, integer_interval(s), _frac(e), integer_interval(d))
            for k in p["ks"] for s in p["s_sizes"]
            for e in p["eps_list"] for d in p["d_sizes"]]
    rows = deviation_sweep(grid, lambda k, S, e, D: CyclicTranslation(p["modulus"]),
                           p["trials"], p["seed"])
    _write_csv(out / "concentration-sweep-detail.csv",
               ["k", "s_size", "eps", "d_size", "bound", "estimate",
                "wilson_lower", "wilson_upper", "expectation_z", "verdict"],
               ((r.k, r.s_size, r.eps, r.d_size, r.bound, r.estimate,
                 r.wilson_lower, r.wilson_upper, r.expectation_zscore,
                 r.verdict) for r in rows))
    bad = [r for r in rows if r.verdict == "fail"]
    summary = {"points": len(rows), "failed": len(bad),
               "verdict": "pass" if not bad else "fail"}
    return summary, EXIT_OK if not bad else EXIT_VERDICT


def _run_lll_check(p, out, jobs, transcript):
    S = integer_interval(p["s_size"])
    eps = _frac(p["eps"])
    if p["mode"] == "slll":
        stats = slll_stats(p["k"], S, eps, integer_interval(p["d_size"]),
                           degree_mode="auto")
        thr = find_slll_threshold(p["k"], S, eps, shape=p.get("shape", "interval"),
                                  search_cap=p.get("search_cap", 100_000))
        _write_csv(out / "lll-check-detail.csv",
                   ["quantity", "value"],
                   [("p_bound", stats.p_bound), ("d_bound", stats.d_bound),
                    ("slll_margin", stats.slll_margin),
                    ("threshold", thr.threshold if thr.found else "none"),
                    ("stationary_point", thr.stationary_point), ("case", thr.case)])
        ok = stats.certified
        summary = {"mode": "slll", "slll_margin": stats.slll_margin,
                   "certified": ok,
                   "threshold": thr.threshold if thr.found else None,
                   "verdict": "pass" if ok else "slll_margin >= 1"}
        return summary, EXIT_OK if ok else EXIT_VERDICT
    if p["mode"] == "glll":
        if "a" not in p:
            raise ConfigError("glll mode requires the witness exponent a")
        n_prefix = p.get("n_prefix", 64)
        eps_sum = _frac(p.get("eps_sum", p["eps"]))
        C = p.get("C")
        if C is None:
            C = find_log_growth_constant(p["k"], S, eps, p["a"], eps_sum)
        witness = GLLLWitnessSpec(a=p["a"], C=C)
        d_seq = [integer_interval(AveragingSequence.log_growth(C).size(n))
                 for n in range(n_prefix)]
        rep = check_glll_witness(p["k"], S, eps, d_seq, witness,
                                 eps_sum=eps_sum, degree_mode="interval")
        _write_csv(out / "lll-check-detail.csv",
                   ["inequality-id", "n", "lhs", "rhs", "slack", "verdict"],
                   ((r.inequality_id, r.n, r.lhs, r.rhs, r.slack,
                     "pass" if r.verdict else "fail") for r in rep.records))
        summary = {"mode": "glll", "ok": rep.ok, "C": C,
                   "budget_sum": rep.budget_sum,
                   "failing": [r.to_json() for r in rep.failing()],
                   "verdict": "pass" if rep.ok else "witness inequality failed"}
        return summary, EXIT_OK if rep.ok else EXIT_VERDICT
    raise ConfigError(f"unknown lll-check mode {p['mode']!r}")


def _run_moser_tardos(p, out, jobs, transcript):
    k = p["k"]
    S = integer_interval(p["s_size"])
    D = integer_interval(p["d_size"])
    eps = _frac(p["eps"])
    action = CyclicTranslation(p["modulus"])
    ev = FrequencyDeviationEvent(k, S, eps, D)
    family = EventFamily.of(ev)
    a = p.get("a", float(eps) ** 2 / (4.0 * len(S) ** 3))
    omega = math.exp(-a * len(D))
    seeds = list(range(p["seeds"])) if isinstance(p["seeds"], int) else list(p["seeds"])

    def one(seed):
        tr = [] if transcript else None
        res = run_mt(action, family, TapeSpace(seed=derive_seed(seed, 0xA0), k=k),
                     max_steps=p.get("max_steps"), transcript=tr)
        return res, tr

    results = _parallel(one, seeds, jobs)
    rows = []
    converged = 0
    ledger_ok = True
    mean_index = 0.0
    resampled = 0.0
    for seed, (res, tr) in zip(seeds, results):
        fr = resample_fraction(res, family, {0: omega})
        led = stabilization_ledger(res, action, family)
        tap = tape_consistency(res)
        ledger_ok &= led and tap
        converged += int(res.converged)
        mean_index += res.index_total(0) / action.n_points
        resampled += float(fr.frac_resampled)
        rows.append((seed, res.converged, res.steps, float(fr.frac_resampled),
                     float(fr.frac_changed), res.index_total(0), led, tap))
        if tr is not None:
            with open(out / f"moser-tardos-transcript-{seed}.jsonl", "w") as fh:
                for line in tr:
                    fh.write(json.dumps(line, sort_keys=True) + "\n")
    _write_csv(out / "moser-tardos-detail.csv",
               ["seed", "converged", "steps", "frac_resampled", "frac_changed",
                "index_total", "ledger_exact", "tape_exact"], rows)
    n = len(seeds)
    bound = omega / (1 - omega)
    summary = {
        "seeds": n, "converged": converged,
        "mean_index": mean_index / n, "index_bound": bound,
        "index_bound_nature": "empirical check on a finite action",
        "mean_frac_resampled": resampled / n,
        "resample_bound": len(ev.domain) * bound,
        "ledger_exact": ledger_ok,
    }
    ok = ledger_ok and (mean_index / n <= bound) and \
        (resampled / n <= len(ev.domain) * bound)
    if p.get("expect_certified"):
        ok = ok and converged == n
    summary["verdict"] = "pass" if ok else "fail"
    return summary, EXIT_OK if ok else EXIT_VERDICT


def _run_uniform_discrepancy(p, out, jobs, transcript):
    S = integer_interval(p["s_size"])
    sizes = p["d_sizes"]
    seq = AveragingSequence.from_sets([integer_interval(m) for m in sizes])
    res = uniform_discrepancy_experiment(
        p["k"], S, _frac(p["eps"]), seq, len(sizes) - 1,
        CyclicTranslation(p["modulus"]), p["seed"], a=p.get("a"))
    detail = []
    for n, stats in res.stats_per_n:
        for pid, f, t, d in stats.csv_rows():
            detail.append((n, pid, f, t, d))
    _write_csv(out / "uniform-discrepancy-detail.csv",
               ["n", "pattern", "freq_at_worst_point", "target", "deviation"], detail)
    ok = bool(res.result.converged and res.all_within)
    summary = {"converged": res.result.converged, "certified": res.certified,
               "max_deviation": res.max_deviation, "all_within": res.all_within,
               "violating_fraction": res.delta_report,
               "frac_resampled": res.fractions.frac_resampled,
               "resample_budget": res.fractions.bound,
               "warnings": res.warnings,
               "verdict": "pass" if ok else "fail"}
    return summary, EXIT_OK if ok else EXIT_VERDICT


def _run_resfin(p, out, jobs, transcript):
    ctx = GroupCtx("integers")
    pats = [Pattern.from_map(ctx, dict(zip(q["sites"], q["colors"])), p["k"])
            for q in p["patterns"]]
    table = periodic_cylinder_table(p["k"], p["period"], pats,
                                    shifts=tuple(p.get("shifts", (1, -1))))
    _write_csv(out / "resfin-detail.csv",
               ["pattern", "residues", "consistent", "value"],
               ((r.pattern.pattern_id, r.residues, r.consistent, str(r.value))
                for r in table.rows))
    summary = {"period": table.period, "patterns": len(table.rows),
               "shift_invariant": table.shift_invariant,
               "verdict": "pass" if table.shift_invariant else "fail"}
    return summary, EXIT_OK if table.shift_invariant else EXIT_VERDICT


def _run_approx_invariant(p, out, jobs, transcript):
    S = integer_interval(p["s_size"])
    try:
        m = near_invariant_measure(p["k"], S, _frac(p["eps"]),
                                   integer_interval(p["d_size"]), p["modulus"],
                                   p["seed"], p.get("shift_test_range"))
    except CertificationError as exc:
        return {"verdict": "fail", "error": str(exc)}, EXIT_VERDICT
    _write_csv(out / "approx-invariant-detail.csv",
               ["pattern", "weight"], ((pid, str(w)) for pid, w in m.atoms))
    summary = {"support": len(m.atoms), "worst_shift_dev": m.worst_shift_dev,
               "eps": m.eps, "within": m.within,
               "verdict": "pass" if m.within else "fail"}
    return summary, EXIT_OK if m.within else EXIT_VERDICT


def _run_rokhlin_bad(p, out, jobs, transcript):
    h = p["h"]
    h_fn = (lambda n: h) if isinstance(h, int) else (lambda n: h[n])
    rep = bad_sequence_experiment(h_fn, p["i_max"], seed=p["seed"],
                                  k_probe=p.get("k_probe"))
    min_capture = Fraction(str(p.get("min_capture", "0.99")))
    _write_csv(out / "rokhlin-bad-detail.csv",
               ["q", "band", "frac_full_average", "frac_null_average"],
               ((b.q, b.band, str(b.frac_full), str(b.frac_null))
                for b in rep.band_rows))
    tail_ok = rep.mu_tail_ok()
    capture_ok = all(f >= min_capture for f in rep.all_bands_frac.values())
    single = None
    if "single" in p:
        s = p["single"]
        sh = s["h"]
        plan = plan_intervals((lambda n: sh) if isinstance(sh, int) else (lambda n: sh[n]),
                              Fraction(str(s["eps"])))
        build = build_tower(plan, s["modulus"])
        cap = verify_capture(build)
        single = {"N": plan.N, "ell": plan.ell, "mu_a": build.mu_a,
                  "mu_b": build.mu_b, "capture_fraction": cap.fraction,
                  "all_bulk_captured": cap.all_b_captured}
        _write_csv(out / "rokhlin-bad-levels.csv",
                   ["level", "in_capture_slab", "in_bulk"],
                   tower_level_rows(build))
        capture_ok = capture_ok and cap.all_b_captured and \
            cap.fraction >= 1 - plan.eps
    ok = tail_ok and capture_ok
    summary = {"modulus": rep.modulus,
               "mu_tail": {str(q): mu for q, mu in rep.mu_tail.items()},
               "all_bands_capture": {str(q): f for q, f in rep.all_bands_frac.items()},
               "tail_measures_ok": tail_ok, "capture_ok": capture_ok,
               "note": rep.interpretation_note, "single": single,
               "verdict": "pass" if ok else "fail"}
    return summary, EXIT_OK if ok else EXIT_VERDICT


RUNNERS = {
    "ergodic-converge": _run_ergodic_converge,
    "concentration-sweep": _run_concentration_sweep,
    "lll-check": _run_lll_check,
    "moser-tardos": _run_moser_tardos,
    "uniform-discrepancy": _run_uniform_discrepancy,
    "resfin": _run_resfin,
    "approx-invariant": _run_approx_invariant,
    "rokhlin-bad": _run_rokhlin_bad,
}


# -- plumbing -------------------------------------------------------------------


def _parallel(fn, items, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(list(row))


def cmd_run(args) -> int:
    path = Path(args.config)
    if not path.exists():
        print(f"config not found: {path}", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = json.loads(path.read_text())
        kind = config.get("experiment")
        if kind not in RUNNERS:
            raise ConfigError(f"unknown experiment kind {kind!r}; see `shiftlab list`")
        params = {k: v for k, v in config.items() if k != "experiment"}
        _validate(kind, params)
    except (json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(args.out or os.environ.get("SHIFTLAB_OUT_DIR", "reports"))
    out.mkdir(parents=True, exist_ok=True)
    try:
        summary, code = RUNNERS[kind](params, out, args.jobs, args.transcript)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    summary_doc = {"experiment": kind, "config": config, "version": __version__,
                   "summary": summary}
    (out / f"{kind}-summary.json").write_text(
        json.dumps(summary_doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    (out / f"{kind}-meta.json").write_text(json.dumps(
        {"written_at": datetime.datetime.now(datetime.timezone.utc).isoformat()},
        indent=2) + "\n")
    verdict = summary.get("verdict", "pass")
    print(f"{kind}: {verdict} (reports in {out})")
    if code == EXIT_VERDICT:
        failing = summary.get("failing") or summary.get("error") or verdict
        print(f"verdict failure: {failing}", file=sys.stderr)
    return code


def cmd_describe(args) -> int:
    kind = args.kind
    if kind not in SCHEMAS:
        print(f"unknown experiment kind {kind!r}", file=sys.stderr)
        return EXIT_USAGE
    meta = SCHEMAS[kind]
    print(f"{kind}\n{'=' * len(kind)}\n{meta['doc']}\n\nparameters:")
    for name, (typ, required, doc) in meta["params"].items():
        flag = "required" if required else "optional"
        print(f"  {name:<18} {typ:<22} [{flag}] {doc}")
    return EXIT_OK


def cmd_list(_args) -> int:
    for kind in SCHEMAS:
        print(kind)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="shiftlab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command")
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--transcript", action="store_true")
    p_run.set_defaults(fn=cmd_run)
    p_desc = sub.add_parser("describe", help="show an experiment's parameters")
    p_desc.add_argument("kind")
    p_desc.set_defaults(fn=cmd_describe)
    p_list = sub.add_parser("list", help="list experiment kinds")
    p_list.set_defaults(fn=cmd_list)
    args = parser.parse_args(argv)
    if not getattr(args, "fn", None):
        parser.print_help()
        return EXIT_USAGE
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
