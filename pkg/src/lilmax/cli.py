"""Command-line front end.

Subcommands
  simulate          run a Monte Carlo experiment from a config file
  shift-experiment  deterministic shift driver table plus median comparison
  tightness-probe   qualitative escape-of-mass probe at growing horizons
  integral-test     boundary-series classifier against the partial-sum probe
  tail-bounds       tail inequality and density-ratio verification tables
  validate          truncation growth-window and tail-condition validators
  replay            re-execute one replication and diff against a stored CSV

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure
(including a replay mismatch).
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

import numpy as np

from .harness import (
    ConfigError,
    ECDF,
    ExperimentConfig,
    append_jsonl,
    apply_overrides,
    experiment_from_parser,
    load_config_parser,
    read_records_csv,
    record_row,
    reference_from_parser,
    replication_seed,
    run_and_persist,
    run_experiment,
)
from .iterlog import normalizers
from .limits import (
    GumbelLaw,
    PhiFamily,
    aniso_chisq_density_ratio,
    chi_tail_envelope,
    gaussian_norm_tail_bound,
    integral_test_classify,
    integral_test_partial_sums,
)
from .models import law_from_mapping, law_id, radial_profile
from .truncation import (
    GammaSequence,
    scheme_id,
    sqrt_n,
    sqrt_n_invLL5,
    sqrt_n_polylog,
    validate_growth_window,
    validate_tail_condition,
)
from .walkstats import de_statistic, trajectory

DEFAULT_OUT = "runs"
_DRIVER_GRID = tuple(10**j for j in range(2, 9))
_PROBE_HORIZONS = (10_000, 100_000, 1_000_000)
_PROBE_Y = (-4.0, -2.0, 0.0, 2.0)


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------


def _parser_from_args(args) -> "configparser.ConfigParser":
    import configparser

    if args.config is not None:
        cp = load_config_parser(args.config, args.set or [])
    else:
        cp = configparser.ConfigParser(interpolation=None)
        apply_overrides(cp, args.set or [])
    if args.seed is not None:
        if not cp.has_section("experiment"):
            cp.add_section("experiment")
        cp.set("experiment", "master_seed", str(args.seed))
    return cp


def _experiment_pair(args) -> tuple[ExperimentConfig, Optional[ExperimentConfig]]:
    cp = _parser_from_args(args)
    cfg = experiment_from_parser(cp)
    ref = reference_from_parser(cp, cfg)
    return cfg, ref


def _section(cp, name: str) -> dict:
    return dict(cp.items(name)) if cp.has_section(name) else {}


def _floats_csv(raw: str) -> list[float]:
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated number list, got {raw!r}") from exc


def _out_dir(args) -> str:
    path = args.out or DEFAULT_OUT
    os.makedirs(path, exist_ok=True)
    return path


def _emit(args, payload: dict) -> None:
    append_jsonl(payload, os.path.join(_out_dir(args), "summary.jsonl"))


def _say(*parts) -> None:
    print(" ".join(str(p) for p in parts))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg, ref = _experiment_pair(args)
    out = _out_dir(args)
    ref_ecdf = None
    if ref is not None:
        ref_records, ref_summary = run_and_persist(
            ref, out, threads=args.threads, gumbel=GumbelLaw()
        )
        ref_ecdf = ECDF.from_records(ref_records)
        _say(
            f"reference {ref.name}: ks_gumbel={ref_summary['ks_gumbel']:.4f}",
            f"median={ref_summary['quantiles']['q50']:.4f}",
        )
    _, summary = run_and_persist(
        cfg, out, threads=args.threads, gumbel=GumbelLaw(), reference=ref_ecdf
    )
    line = (
        f"experiment {cfg.name}: mode={cfg.mode} d={cfg.d} n={cfg.n} "
        f"R={cfg.replications} ks_gumbel={summary['ks_gumbel']:.4f} "
        f"median={summary['quantiles']['q50']:.4f}"
    )
    if "ks_two_sample" in summary:
        line += f" ks_two_sample={summary['ks_two_sample']:.4f}"
    _say(line)
    return 0


# ---------------------------------------------------------------------------
# shift-experiment
# ---------------------------------------------------------------------------


def shift_driver_table(law, ns: Sequence[int]) -> list[dict]:
    """Deterministic centering drift (1 - sigma_n) * b_n on a horizon grid.

    sigma_n is the standard deviation retained after truncating the law at
    sqrt(n); with no law (the degenerate zero-shift case) the drift is 0.
    """
    rows = []
    for n in ns:
        if law is None:
            sigma = 1.0
        else:
            sigma = float(np.sqrt(radial_profile(law, float(np.sqrt(n)))))
        b = normalizers(int(n), 1).b_dn
        rows.append(
            {"n": int(n), "sigma_n": sigma, "driver": (1.0 - sigma) * b}
        )
    return rows


def cmd_shift_experiment(args) -> int:
    cp = _parser_from_args(args)
    law_map = _section(cp, "experiment.law")
    if law_map.get("family") != "atom_ladder":
        raise ConfigError("shift-experiment requires an atom_ladder increment law")
    c = float(law_map.get("c", 0.5))
    out = _out_dir(args)

    shift_sec = _section(cp, "shift")
    grid = [int(v) for v in _floats_csv(shift_sec["n_grid"])] if "n_grid" in shift_sec else list(_DRIVER_GRID)

    if c == 0.0:
        rows = shift_driver_table(None, grid)
        _say("degenerate c=0 ladder: driver is identically 0, skipping Monte Carlo")
        for row in rows:
            _say(f"  n={row['n']:>10d}  sigma_n={row['sigma_n']:.6f}  driver={row['driver']:.6f}")
        _emit(args, {"command": "shift-experiment", "c": 0.0, "driver": rows})
        return 0

    cfg = experiment_from_parser(cp)
    if cfg.mode != "classical":
        raise ConfigError("shift-experiment measures the classical statistic")
    ref = reference_from_parser(cp, cfg)
    if ref is None:
        raise ConfigError("shift-experiment needs a [reference] section for the median comparison")

    rows = shift_driver_table(cfg.law, grid)
    _say(f"shift driver for c={c} (target: driver -> c):")
    for row in rows:
        _say(f"  n={row['n']:>10d}  sigma_n={row['sigma_n']:.6f}  driver={row['driver']:.6f}")

    ref_records, _ = run_and_persist(ref, out, threads=args.threads, gumbel=GumbelLaw())
    records, summary = run_and_persist(
        cfg, out, threads=args.threads, gumbel=GumbelLaw(),
        reference=ECDF.from_records(ref_records),
    )
    median = ECDF.from_records(records).quantiles([0.5])[0]
    ref_median = ECDF.from_records(ref_records).quantiles([0.5])[0]
    payload = {
        "command": "shift-experiment",
        "c": c,
        "driver": rows,
        "median": median,
        "reference_median": ref_median,
        "median_gap": median - ref_median,
        "median_below_reference": bool(median < ref_median),
        "ks_two_sample": summary.get("ks_two_sample"),
    }
    _say(
        f"median={median:.4f} reference_median={ref_median:.4f} "
        f"gap={median - ref_median:+.4f} (downward shift expected)"
    )
    _emit(args, payload)
    return 0


# ---------------------------------------------------------------------------
# tightness-probe
# ---------------------------------------------------------------------------


def _horizon_seed(master_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(777_000 + index,))
    return int(ss.generate_state(2, np.uint64)[0])


def probe_exceedance(cfg: ExperimentConfig, horizons, y_grid, threads=1) -> list[dict]:
    """Exceedance frequencies of the classical statistic at each horizon."""
    rows = []
    for i, horizon in enumerate(horizons):
        sub = ExperimentConfig(
            name=f"{cfg.name}_h{int(horizon)}",
            law=cfg.law,
            scheme=cfg.scheme,
            mode="classical",
            n=int(horizon),
            replications=cfg.replications,
            master_seed=_horizon_seed(cfg.master_seed, i),
        )
        values = np.array([r.value for r in run_experiment(sub, threads=threads)])
        freqs = {str(y): float(np.mean(values > y)) for y in y_grid}
        rows.append(
            {"n": int(horizon), "median": float(np.median(values)), "frequencies": freqs}
        )
    return rows


def cmd_tightness_probe(args) -> int:
    cp = _parser_from_args(args)
    law_map = _section(cp, "experiment.law")
    if law_map.get("family") != "atom_ladder_fat":
        raise ConfigError(
            "tightness-probe requires the atom_ladder_fat increment law "
            "(tight families have nothing to show here)"
        )
    cfg = experiment_from_parser(cp)
    probe_sec = _section(cp, "probe")
    horizons = (
        [int(v) for v in _floats_csv(probe_sec["horizons"])]
        if "horizons" in probe_sec
        else list(_PROBE_HORIZONS)
    )
    y_grid = (
        _floats_csv(probe_sec["y_grid"]) if "y_grid" in probe_sec else list(_PROBE_Y)
    )
    rows = probe_exceedance(cfg, horizons, y_grid, threads=args.threads)
    _say(f"exceedance frequencies of the centered max, R={cfg.replications}:")
    header = "  ".join(f"P(>{y:g})" for y in y_grid)
    _say(f"  {'n':>10s}  {'median':>8s}  {header}")
    for row in rows:
        cells = "  ".join(f"{row['frequencies'][str(y)]:.4f}" for y in y_grid)
        _say(f"  {row['n']:>10d}  {row['median']:>8.3f}  {cells}")
    drift = rows[-1]["median"] < rows[0]["median"]
    _say(
        "mass drifts downward across horizons (median falls)"
        if drift
        else "no downward median drift at these horizons"
    )
    _say("qualitative probe only: no pass/fail judgement is made")
    _emit(
        args,
        {
            "command": "tightness-probe",
            "law": law_id(cfg.law),
            "replications": cfg.replications,
            "horizons": horizons,
            "y_grid": y_grid,
            "rows": rows,
            "drift_downward": bool(drift),
        },
    )
    return 0


# ---------------------------------------------------------------------------
# integral-test
# ---------------------------------------------------------------------------


def cmd_integral_test(args) -> int:
    cp = _parser_from_args(args)
    sec = _section(cp, "integral")
    phi = PhiFamily(
        a=float(sec.get("a", 4.0)),
        b=float(sec.get("b", 0.0)),
        d=int(sec.get("d", 1)),
    )
    n_max = int(float(sec.get("n_max", 10**9)))
    verdict = integral_test_classify(phi)
    probe = integral_test_partial_sums(phi, n_max=n_max)
    agree = "PASS" if probe.verdict == verdict else "FAIL"
    _say(f"boundary {phi.label()}")
    _say(f"  classifier: {verdict}")
    _say(
        f"  probe:      {probe.verdict} "
        f"(slope_linear={probe.slope_linear:+.3f}, slope_loglog={probe.slope_loglog:+.3f}, "
        f"tail_increment={probe.tail_increment:.3e})"
    )
    _say(f"  agreement:  {agree}")
    _emit(
        args,
        {
            "command": "integral-test",
            "a": phi.a,
            "b": phi.b,
            "d": phi.d,
            "classifier": verdict,
            "probe_verdict": probe.verdict,
            "slope_linear": probe.slope_linear,
            "slope_loglog": probe.slope_loglog,
            "partial_sum_at_n_max": float(probe.partial_sums[-1]),
            "agreement": agree,
        },
    )
    return 0


# ---------------------------------------------------------------------------
# tail-bounds
# ---------------------------------------------------------------------------


def cmd_tail_bounds(args) -> int:
    cp = _parser_from_args(args)
    sec = _section(cp, "tails")
    sigmas = (
        _floats_csv(sec["sigmas"])
        if "sigmas" in sec
        else [round(0.1 * j, 1) for j in range(1, 10)]
    )
    checks = []

    for d in (1, 2, 3):
        grid = np.linspace(2.0 * d, 12.0, 200)
        env = chi_tail_envelope(d, grid)
        ok = 0.0 < env.c1_hat <= env.c2_hat < float("inf")
        if d == 2:
            ok = ok and abs(env.c1_hat - 1.0) < 1e-12 and abs(env.c2_hat - 1.0) < 1e-12
        checks.append(
            {
                "check": f"norm-tail envelope d={d}",
                "result": "PASS" if ok else "FAIL",
                "c1_hat": env.c1_hat,
                "c2_hat": env.c2_hat,
            }
        )

    b = gaussian_norm_tail_bound(4.0, trace=1.0, sigma2_max=1.0)
    ok = abs(b.bound_sigma - float(np.exp(-2.0))) < 1e-12 and b.sigma_applicable
    checks.append(
        {
            "check": "norm tail bound reference point x=4, trace=1",
            "result": "PASS" if ok else "FAIL",
            "bound_sigma": b.bound_sigma,
            "bound_trace": b.bound_trace,
        }
    )

    z = np.geomspace(0.01, 100.0, 80)
    for sigma in sigmas:
        rep = aniso_chisq_density_ratio(float(sigma), z)
        ok = rep.max_ratio <= rep.bound + 1e-9
        checks.append(
            {
                "check": f"density ratio sigma={sigma:g}",
                "result": "PASS" if ok else "FAIL",
                "max_ratio": rep.max_ratio,
                "bound": rep.bound,
            }
        )

    width = max(len(c["check"]) for c in checks)
    for c in checks:
        detail = ", ".join(
            f"{k}={v:.6g}" for k, v in c.items() if k not in ("check", "result")
        )
        _say(f"  {c['check']:<{width}s}  {c['result']}  ({detail})")
    _emit(args, {"command": "tail-bounds", "checks": checks})
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    cp = _parser_from_args(args)
    if cp.has_section("experiment") and cp.has_section("experiment.law"):
        cfg = experiment_from_parser(cp)
        law, scheme = cfg.law, cfg.scheme
    else:
        law = law_from_mapping({"family": "gaussian_iso", "d": 1})
        scheme = None
    if scheme is not None:
        schemes = {scheme_id(scheme): scheme}
    else:
        built_ins = (sqrt_n(), sqrt_n_invLL5(), sqrt_n_polylog(1.0))
        schemes = {scheme_id(s): s for s in built_ins}
    n_grid = np.geomspace(1e2, 1e8, 13)
    t_grid = np.geomspace(10.0, 1e6, 11)
    rows = []
    for name, sch in schemes.items():
        rep = validate_growth_window(sch, n_grid)
        rows.append({"check": f"growth window {name}", "result": rep.verdict})
        _say(f"  growth window {name:<24s} {rep.verdict}")
    for which in ("small_o", "big_O"):
        rep = validate_tail_condition(law, which, t_grid)
        rows.append(
            {
                "check": f"tail condition {which} {rep.law}",
                "result": rep.verdict,
                "limit_estimate": rep.limit_estimate,
            }
        )
        _say(
            f"  tail condition {which:<8s} {rep.law:<28s} {rep.verdict} "
            f"(limit estimate {rep.limit_estimate:.4g})"
        )
    _emit(args, {"command": "validate", "rows": rows})
    return 0


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------


def cmd_replay(args) -> int:
    cfg, _ = _experiment_pair(args)
    out = args.out or DEFAULT_OUT
    csv_path = os.path.join(out, f"{cfg.name}.csv")
    rows = read_records_csv(csv_path)
    index = args.replication
    if not (0 <= index < len(rows)):
        raise ConfigError(
            f"replication {index} out of range: {csv_path} has {len(rows)} rows"
        )
    gs = None
    if cfg.scheme is not None:
        gs = GammaSequence(cfg.law, cfg.scheme, n_max=cfg.n)
    traj = trajectory(cfg.law, cfg.n, replication_seed(cfg.master_seed, index))
    rec = de_statistic(traj, gs, cfg.mode)
    fresh = record_row(index, rec)
    stored = ",".join(
        rows[index][col] for col in
        ("replication_index", "mode", "value", "argmax_k", "n", "d", "seed")
    )
    if fresh == stored:
        _say(f"replay OK: replication {index} of {cfg.name} reproduces bit for bit")
        return 0
    _say(f"replay MISMATCH for replication {index} of {cfg.name}:")
    _say(f"  stored:     {stored}")
    _say(f"  recomputed: {fresh}")
    return 3


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lilmax",
        description="Simulation and verification laboratory for iterated-logarithm "
        "extremes of normalized random walks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required: bool):
        p.add_argument(
            "--config",
            required=config_required,
            default=None,
            help="INI config file (see configs/ for schema examples)",
        )
        p.add_argument(
            "--set",
            action="append",
            metavar="SECTION.KEY=VALUE",
            help="override a config value, e.g. experiment.n=100000",
        )
        p.add_argument("--out", default=None, help=f"output directory (default {DEFAULT_OUT})")
        p.add_argument("--threads", type=int, default=1, help="worker threads (speed only)")
        p.add_argument("--seed", type=int, default=None, help="override experiment.master_seed")

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    common(p, config_required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("shift-experiment", help="centering-shift driver and medians")
    common(p, config_required=True)
    p.set_defaults(func=cmd_shift_experiment)

    p = sub.add_parser("tightness-probe", help="escape-of-mass probe at growing horizons")
    common(p, config_required=True)
    p.set_defaults(func=cmd_tightness_probe)

    p = sub.add_parser("integral-test", help="boundary-series convergence verdicts")
    common(p, config_required=False)
    p.set_defaults(func=cmd_integral_test)

    p = sub.add_parser("tail-bounds", help="tail inequality verification tables")
    common(p, config_required=False)
    p.set_defaults(func=cmd_tail_bounds)

    p = sub.add_parser("validate", help="truncation and tail-condition validators")
    common(p, config_required=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("replay", help="re-execute one replication and diff the CSV")
    common(p, config_required=True)
    p.add_argument("--replication", type=int, default=0, help="row index to replay")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and codes
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
