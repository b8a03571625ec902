"""Runs qusum experiments from the command line
"""

import argparse  # ArgumentParser, add_argument
import os.path as op  # path
import sys as sys
import textwrap  # dedent
import warnings
from typing import List, Union

import numpy as np  # array, ndarray

from .detection.engine import LikelihoodModel, StoppingRule, alarm_times, walk_trajectory
from .info import __version__
from .quantum import qmath
from .quantum.povm import QubitPair, block_rate_table, sufficient_block_length
from .simulation import sim
from .system.config import PRESETS, RunManifest, ScenarioConfig, default_out_dir
from .system.exceptions import CensoringError, ConfigError, ConvergenceError, UndetectableChangeError
from .system.utils import makedir, writecsv, writejson

BLOCK_RATE_HEADER = [
    "l",
    "rate_hayashi",
    "rate_optimized",
    "rate_variational",
    "quantum_relative_entropy",
    "hayashi_lower_bound",
]
DEMO_HEADER = ["trial", "n", "outcome", "walk", "cusum", "trend", "nu_marker"]
TRAJECTORY_HEADER = ["scenario_id", "trial", "n", "outcome", "walk", "cusum"]

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_CENSORED = 4


def states_from_config(cfg: ScenarioConfig):
    """Pre- and post-change single-copy states of a configuration."""
    if cfg.classical:
        rho = qmath.DensityMatrix(np.diag([cfg.bias_pre, 1 - cfg.bias_pre]))
        sigma = qmath.DensityMatrix(np.diag([cfg.bias_post, 1 - cfg.bias_post]))
        return rho, sigma
    return qmath.qubit_state(cfg.r0, 0.0), qmath.qubit_state(cfg.r1, cfg.theta)


def pair_from_config(cfg: ScenarioConfig) -> QubitPair:
    if cfg.classical:
        return QubitPair.from_states(*states_from_config(cfg))
    return QubitPair(cfg.r0, cfg.r1, cfg.theta)


def classical_model(bias_pre: float, bias_post: float) -> LikelihoodModel:
    """Bernoulli outcome model; outcome 0 has probability `bias_*`."""
    return LikelihoodModel(
        qmath.ProbabilityVector([bias_pre, 1 - bias_pre]), qmath.ProbabilityVector([bias_post, 1 - bias_post])
    )


# -----------------------------------------------------------------
# Subcommands
# -----------------------------------------------------------------
def cmd_divergences(cfg: ScenarioConfig, outdir: str, manifest: RunManifest) -> dict:
    """Prints and stores the divergences of the configured pair."""
    rho, sigma = states_from_config(cfg)
    D = qmath.quantum_relative_entropy(sigma, rho)
    report = {
        "relative_entropy": D,
        "max_relative_entropy_bits": qmath.max_relative_entropy(sigma, rho),
        "renyi_0.5": qmath.renyi_relative_entropy(sigma, rho, 0.5),
        "renyi_1.5": qmath.renyi_relative_entropy(sigma, rho, 1.5),
        "sandwiched": {str(a): qmath.sandwiched_renyi(sigma, rho, a) for a in cfg.alpha},
        "hypothesis_testing": {str(e): qmath.hypothesis_testing_relative_entropy(sigma, rho, e) for e in cfg.eps},
        "sufficient_block_length": {},
        "support_contained": qmath.support_contained(sigma, rho),
    }
    for e in cfg.eps:
        try:
            report["sufficient_block_length"][str(e)] = sufficient_block_length(rho, sigma, e)
        except (UndetectableChangeError, ValueError):
            report["sufficient_block_length"][str(e)] = None
    print("D(sigma||rho)          = {} nats".format(D))
    print("D_max(sigma||rho)      = {} bits".format(report["max_relative_entropy_bits"]))
    print("D_1/2(sigma||rho)      = {} nats".format(report["renyi_0.5"]))
    print("D_3/2(sigma||rho)      = {} nats".format(report["renyi_1.5"]))
    for a, val in report["sandwiched"].items():
        print("sandwiched D_{}        = {} nats".format(a, val))
    for e, val in report["hypothesis_testing"].items():
        print("D_h^{}                 = {} nats".format(e, val))
    for e, val in report["sufficient_block_length"].items():
        print("sufficient l (eps={})  = {} copies per block".format(e, val))
    if not np.isfinite(D):
        print("Note: supp(sigma) is not contained in supp(rho); the change is detectable without false alarms.")
    elif D == 0:
        print("Note: the states coincide; there is no change to detect.")
    path = writejson(report, op.join(outdir, "divergences.json"))
    manifest.add(path)
    return report


def cmd_block_rate(cfg: ScenarioConfig, outdir: str, manifest: RunManifest) -> list:
    """Per-copy rates of every strategy for each block length."""
    pair = pair_from_config(cfg)
    rows = block_rate_table(pair, cfg.l_list)
    path = writecsv([r.as_row() for r in rows], BLOCK_RATE_HEADER, op.join(outdir, "block_rate.csv"))
    manifest.add(path)
    for r in rows:
        print(
            "l = {:3d}: hayashi {:.6f}  optimized {:.6f}  variational {:.6f}  D {:.6f}".format(
                r.l, r.rate_hayashi, r.rate_optimized, r.rate_variational, r.relative_entropy
            )
        )
    failed = [r.l for r in rows if not r.converged]
    if failed:
        raise ConvergenceError("Variational solver did not converge for l = {}".format(failed))
    return rows


def _trajectory_rows(scenario_id: str, model: LikelihoodModel, cfg: ScenarioConfig, l: int) -> list:
    rows = []
    nu_blocks = max(1, cfg.nu // l)
    steps = max(nu_blocks + 1, cfg.steps // l)
    for k, (outcomes, _) in enumerate(sim.sample_trajectories(model, nu_blocks, steps, cfg.trajectories, cfg.seed)):
        walk, cusum = walk_trajectory(outcomes, model)
        for n in range(steps):
            rows.append([scenario_id, k, (n + 1) * l, int(outcomes[n]), float(walk[n]), float(cusum[n])])
    return rows


def cmd_simulate(cfg: ScenarioConfig, outdir: str, manifest: RunManifest, verbose: bool = False) -> list:
    """Monte Carlo tradeoff curves (and family detector runs)."""
    kind = "hayashi" if cfg.measurement == "hayashi" else "optimized"
    if cfg.classical:
        sources = [("classical", classical_model(cfg.bias_pre, cfg.bias_post), 1)]
        if cfg.l_list != [1]:
            warnings.warn("Classical scenarios run one outcome per step; l_list is ignored")
    else:
        pair = pair_from_config(cfg)
        sources = [("l{}-{}".format(l, kind), pair, l) for l in cfg.l_list]
    points = []
    trajectories = []
    for name, source, l in sources:
        pts = sim.tradeoff_curve(
            source,
            l,
            kind,
            cfg.h_list,
            cfg.trials,
            cfg.cap,
            cfg.seed,
            cfg.threads,
            straddle=cfg.straddle,
            scenario_id=name,
            verbose=verbose,
        )
        points.extend(pts)
        if cfg.trajectories:
            model, _ = sim.build_model(source, l, kind)
            trajectories.extend(_trajectory_rows(name, model, cfg, l))
    if cfg.family and not cfg.classical:
        for l in cfg.l_list:
            for h in cfg.h_list:
                fam = sim.family_tradeoff(
                    cfg.r0,
                    cfg.family,
                    l,
                    np.exp(h),
                    cfg.trials,
                    cfg.cap,
                    cfg.seed,
                    cfg.threads,
                    truths=cfg.truths,
                    straddle=cfg.straddle,
                    verbose=verbose,
                )
                for p in fam:
                    p.scenario_id = "family-l{}-{}".format(l, p.scenario_id)
                points.extend(fam)
    path = writecsv([p.as_row() for p in points], sim.TRADEOFF_HEADER, op.join(outdir, "simulate.csv"))
    manifest.add(path)
    if trajectories:
        path = writecsv(trajectories, TRAJECTORY_HEADER, op.join(outdir, "trajectories.csv"))
        manifest.add(path)
    summary = {"config": cfg.to_json(), "version": __version__, "points": [p.to_json() for p in points]}
    failed = []
    if cfg.measurement == "variational-report" and not cfg.classical:
        rows = block_rate_table(pair_from_config(cfg), cfg.l_list)
        summary["rates"] = {
            str(r.l): {"optimized": r.rate_optimized, "variational": r.rate_variational, "converged": r.converged}
            for r in rows
        }
        failed = [r.l for r in rows if not r.converged]
    path = writejson(summary, op.join(outdir, "simulate.json"))
    manifest.add(path)
    for p in points:
        print(
            "{:>24s} h = {:5.2f}: T_FA {:.4g} (+-{:.2g})  delay {:.4g} (+-{:.2g})  Wald {:.4g}".format(
                p.scenario_id,
                p.h,
                p.t_fa_est.mean,
                p.t_fa_est.std_error,
                p.delay_est.mean,
                p.delay_est.std_error,
                p.predicted_delay,
            )
        )
        if p.censored_fraction > 0:
            warnings.warn("{} h = {}: {:.1%} of runs censored at the cap".format(p.scenario_id, p.h, p.censored_fraction))
    if failed:
        raise ConvergenceError("Variational solver did not converge for l = {}".format(failed))
    worst = max((p.censored_fraction for p in points), default=0.0)
    if worst > cfg.max_censored:
        raise CensoringError(
            "Censored fraction {:.3f} exceeds the configured limit {:.3f}".format(worst, cfg.max_censored)
        )
    return points


def cmd_classical_demo(cfg: ScenarioConfig, outdir: str, manifest: RunManifest) -> dict:
    """Bernoulli trajectories of Z_1^n and the CUSUM statistic around a
    change at nu, with the mean-trend lines."""
    bias_pre = 0.2 if cfg.bias_pre is None else cfg.bias_pre
    bias_post = 0.25 if cfg.bias_post is None else cfg.bias_post
    model = classical_model(bias_pre, bias_post)
    pre_rate = -qmath.kl_divergence(model.p, model.q)
    post_rate = qmath.kl_divergence(model.q, model.p)
    k = cfg.trajectories if cfg.trajectories else 20
    trajs = sim.sample_trajectories(model, cfg.nu, cfg.steps, k, cfg.seed)
    n = np.arange(1, cfg.steps + 1)
    trend = np.where(n <= cfg.nu, pre_rate * n, pre_rate * cfg.nu + post_rate * (n - cfg.nu))
    rows = []
    rules = [StoppingRule(h) for h in cfg.h_list]
    alarms = []
    for trial, (outcomes, _) in enumerate(trajs):
        walk, cusum = walk_trajectory(outcomes, model)
        for i in range(cfg.steps):
            rows.append(
                [trial, int(n[i]), int(outcomes[i]), float(walk[i]), float(cusum[i]), float(trend[i]), n[i] == cfg.nu]
            )
        alarms.append(alarm_times(outcomes, model, rules))
    path = writecsv(rows, DEMO_HEADER, op.join(outdir, "classical_demo.csv"))
    manifest.add(path)
    slopes = sim.estimate_trajectory_slopes(model, cfg.nu, cfg.steps, k, cfg.seed)
    summary = {
        "nu": cfg.nu,
        "steps": cfg.steps,
        "bias_pre": bias_pre,
        "bias_post": bias_post,
        "expected_pre_slope": pre_rate,
        "expected_post_slope": post_rate,
        "pre_slope": slopes.pre.to_json(),
        "post_slope": slopes.post.to_json(),
        "alarm_times": {str(h): [a[i] for a in alarms] for i, h in enumerate(cfg.h_list)},
    }
    path = writejson(summary, op.join(outdir, "classical_demo.json"))
    manifest.add(path)
    print("pre-change slope  {:.7f} +- {:.2g} (expected {:.7f})".format(slopes.pre.mean, slopes.pre.std_error, pre_rate))
    print(
        "post-change slope {:.7f} +- {:.2g} (expected {:.7f})".format(slopes.post.mean, slopes.post.std_error, post_rate)
    )
    return summary


def cmd_verify(directory: str) -> int:
    """Checks the files of an output directory against its run manifest."""
    try:
        manifest = RunManifest.load(op.join(directory, "run_manifest.json"))
    except (ConfigError, OSError) as err:
        print("Configuration error: {}".format(err), file=sys.stderr)
        return EXIT_CONFIG
    bad = manifest.mismatches(directory)
    for name in sorted(manifest.outputs):
        print("{:<24s} {}".format(name, "changed" if name in bad else "ok"))
    return EXIT_MISMATCH if bad else EXIT_OK


COMMANDS = {
    "divergences": cmd_divergences,
    "block-rate": cmd_block_rate,
    "simulate": cmd_simulate,
    "classical-demo": cmd_classical_demo,
}


def build_parser() -> argparse.ArgumentParser:
    # Initialize ArgumentParser
    parser = argparse.ArgumentParser(
        prog="qusum",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=textwrap.dedent(
            """\
    Appendix
    --------
    Configuration:
        Values are taken from the defaults, then --preset, then the
        --config parameter file, then the flags below. Parameter files hold
        one key = value per line with # comments; lists are comma
        separated and family entries read r1:theta; r1:theta. A file
        ending in .json is read as a JSON object.

    Presets:
        fig2            canonical qubit pair r0 = r1 = 0.9, theta = pi/4,
                        l in 1, 5, 50
        sm-classical    Bernoulli 1/5 -> 1/4, h in 6, 22, change at 10^4
        fast-accept     Bernoulli 0.2 -> 0.6 for quick checks

    Exit codes:
        0 success, 1 verify found a changed or missing file, 2
        configuration error, 3 variational solver did not converge, 4
        censored fraction above --max-censored.

    Reruns:
        Every output directory holds run_manifest.json. Passing it as
        --config repeats the run; qusum verify DIR checks the recorded
        SHA-256 digests.

    Example usage:
        qusum divergences --preset fig2 --eps 0.1,0.01
        qusum block-rate --preset fig2 --out results
        qusum simulate --preset fast-accept --trials 500 --threads 4
        qusum classical-demo --preset sm-classical
        qusum simulate --config results/run_manifest.json --out rerun
        qusum verify results
    """
        ),
    )
    parser.add_argument("-v", "--version", action="version", version=__version__)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="Parameter file (key = value or .json).", type=str)
    common.add_argument("--preset", choices=sorted(PRESETS), help="Named starting configuration.", type=str)
    common.add_argument("--seed", metavar="N", help="Master seed of every Monte Carlo run.", type=int)
    common.add_argument(
        "--out",
        metavar="DIR",
        help="Output directory. Default: $QUSUM_OUT_DIR or the working directory.",
        type=str,
    )
    common.add_argument("--trials", metavar="N", help="Monte Carlo runs per estimate.", type=int)
    common.add_argument("--cap", metavar="N", help="Run-length cap in block steps.", type=int)
    common.add_argument(
        "--threads",
        metavar="N",
        help="Number of workers; -1 uses every core. Affects wall time only.",
        type=int,
    )
    common.add_argument("--alpha", metavar="LIST", help="Comma separated Renyi orders.", type=str)
    common.add_argument("--eps", metavar="LIST", help="Comma separated error budgets in (0, 1).", type=str)
    common.add_argument(
        "--max-censored",
        metavar="FRACTION",
        dest="max_censored",
        help="Largest accepted share of censored runs (exit code 4 above it).",
        type=float,
    )
    common.add_argument(
        "--verbose",
        action="store_true",
        default=False,
        help="Show worker counts and progress bars.",
    )

    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    sub.add_parser("divergences", parents=[common], help="Divergences of the configured pair.")
    sub.add_parser("block-rate", parents=[common], help="Per-copy rates of the block measurements.")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo delay / false-alarm tradeoff.")
    sub.add_parser("classical-demo", parents=[common], help="Bernoulli CUSUM trajectories.")
    verify = sub.add_parser("verify", help="Check output files against their run manifest.")
    verify.add_argument(
        "directory",
        metavar="DIR",
        nargs="?",
        help="Output directory holding run_manifest.json. Default: $QUSUM_OUT_DIR or the working directory.",
        type=str,
    )
    return parser


def main(argv: Union[List[str], None] = None) -> int:
    # -----------------------------------------------------------------
    # Parse Arguments
    # -----------------------------------------------------------------
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args.directory if args.directory else default_out_dir())
    overrides = {
        "seed": args.seed,
        "trials": args.trials,
        "cap": args.cap,
        "threads": args.threads,
        "alpha": args.alpha,
        "eps": args.eps,
        "max_censored": args.max_censored,
    }

    # -----------------------------------------------------------------
    # Validate Configuration
    # -----------------------------------------------------------------
    try:
        cfg = ScenarioConfig.build(args.preset, args.config, overrides)
    except (ConfigError, OSError) as err:
        print("Configuration error: {}".format(err), file=sys.stderr)
        return EXIT_CONFIG
    outdir = makedir(args.out if args.out else default_out_dir())
    manifest = RunManifest(args.command, cfg)

    # -----------------------------------------------------------------
    # Run
    # -----------------------------------------------------------------
    code = EXIT_OK
    try:
        if args.command == "simulate":
            cmd_simulate(cfg, outdir, manifest, verbose=args.verbose)
        else:
            COMMANDS[args.command](cfg, outdir, manifest)
    except ConvergenceError as err:
        print("Numerical error: {}".format(err), file=sys.stderr)
        code = EXIT_CONVERGENCE
    except CensoringError as err:
        print("Censoring error: {}".format(err), file=sys.stderr)
        code = EXIT_CENSORED
    except (ConfigError, UndetectableChangeError) as err:
        print("Configuration error: {}".format(err), file=sys.stderr)
        code = EXIT_CONFIG
    manifest.write(outdir)
    return code


if __name__ == "__main__":
    sys.exit(main())
