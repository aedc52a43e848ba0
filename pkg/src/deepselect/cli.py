"""Command-line surface tying the library together.

Subcommands: synth, fit-dpm, fit-gmm, train, eval, demo-asymmetry,
divergence.  Every run is driven by one seed; reports are plain
deterministic text (identical arguments reproduce identical bytes), and
timing goes to stderr only.  Exit codes: 0 success, 1 validation error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from deepselect import divergence as dv
from deepselect.config import config_from_sources, parse_config_file
from deepselect.data import SynthSpec, load_features, save_features, synth_mixture
from deepselect.dpm import DpmState, fit_dpm
from deepselect.evaluation import LabeledAssignment, clustering_accuracy, estimated_k_report, format_summary, summarize
from deepselect.gmm import fit_gmm
from deepselect.persist import load_state, save_dpm_state, save_gmm_state, save_net
from deepselect.training import train

__all__ = ["cli", "main"]


class CliError(Exception):
    """Argument or input validation failure (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_vector(raw: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in raw.replace(",", " ").split()])
    except ValueError as exc:
        raise CliError(f"could not parse vector {raw!r}") from exc


def _parse_grid(raw: str) -> np.ndarray:
    parts = raw.split(":")
    if len(parts) != 3:
        raise CliError(f"grid must be lo:hi:step, got {raw!r}")
    lo, hi, step = (float(p) for p in parts)
    if step <= 0:
        raise CliError("grid step must be positive")
    return np.arange(lo, hi + step / 2, step)


def _build_config(args, require_seed: bool = True):
    file_values = parse_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {
        name: getattr(args, name)
        for name in (
            "loss", "alpha", "lambda3", "learning_rate", "mse_epochs", "reg_epochs",
            "cycles", "truncation", "clusters", "omega0", "a0", "b0", "m0", "m0_mode",
            "lambda0", "seed", "sigma_head", "prune_threshold", "batch_size", "fit_iters",
        )
        if hasattr(args, name)
    }
    if getattr(args, "arch", None):
        overrides["arch"] = tuple(int(tok) for tok in args.arch.replace(",", " ").split())
    config = config_from_sources(file_values, overrides)
    if require_seed and config.seed is None:
        raise CliError("--seed is required for stochastic commands (flag or config file)")
    return config


def _fit_report_lines(command, config, state, matrix):
    khat, sizes = estimated_k_report(state)
    lines = [
        f"command {command}",
        f"seed {config.seed}",
        f"khat {khat}",
        "sizes " + ",".join(str(int(s)) for s in sizes),
    ]
    if matrix.labels is not None:
        acc = clustering_accuracy(LabeledAssignment(state.assignments, matrix.labels))
        lines.append(f"accuracy {acc!r}")
    return lines


def _cmd_synth(args) -> int:
    spec = SynthSpec(k=args.k, d=args.d, n_per=args.n_per, separation=args.sep, seed=args.seed)
    matrix = synth_mixture(spec)
    save_features(matrix, args.out, fmt=args.format)
    sys.stderr.write(f"wrote {matrix.n} x {matrix.dim} features to {args.out}\n")
    return 0


def _cmd_fit_dpm(args) -> int:
    config = _build_config(args)
    matrix = load_features(args.features)
    if args.repeats > 1:
        seeds = np.random.SeedSequence(config.seed).spawn(args.repeats)
        records, reports = [], []
        for i, ss in enumerate(seeds):
            state = fit_dpm(
                matrix.values, config.truncation, hyper=config.hyper(matrix.values),
                max_iters=config.fit_iters, seed=ss, prune_threshold=config.prune_threshold,
            )
            khat, _ = estimated_k_report(state)
            acc = (
                clustering_accuracy(LabeledAssignment(state.assignments, matrix.labels))
                if matrix.labels is not None else float("nan")
            )
            records.append(("dpm", acc, khat))
            reports.append(f"trial {i} khat {khat}" + (f" accuracy {acc!r}" if matrix.labels is not None else ""))
        text = "\n".join(reports) + "\n" + format_summary(summarize(records))
        _emit(text, args.out)
        return 0
    state = fit_dpm(
        matrix.values, config.truncation, hyper=config.hyper(matrix.values),
        max_iters=config.fit_iters, seed=config.seed, prune_threshold=config.prune_threshold,
    )
    if args.state_out:
        save_dpm_state(state, args.state_out)
    _emit("\n".join(_fit_report_lines("fit-dpm", config, state, matrix)) + "\n", args.out)
    return 0


def _cmd_fit_gmm(args) -> int:
    config = _build_config(args)
    matrix = load_features(args.features)
    state = fit_gmm(matrix.values, config.clusters, max_iters=config.fit_iters, seed=config.seed)
    if args.state_out:
        save_gmm_state(state, args.state_out)
    _emit("\n".join(_fit_report_lines("fit-gmm", config, state, matrix)) + "\n", args.out)
    return 0


def _cmd_train(args) -> int:
    config = _build_config(args)
    matrix = load_features(args.features)
    if args.repeats > 1:
        seeds = np.random.SeedSequence(config.seed).spawn(args.repeats)
        records = []
        from dataclasses import replace as _replace

        for i, ss in enumerate(seeds):
            trial_config = _replace(config, seed=int(ss.generate_state(1)[0]))
            report = train(matrix.values, trial_config)
            khat = report.khat_trajectory[-1] if report.khat_trajectory else 0
            acc = (
                clustering_accuracy(LabeledAssignment(report.final_state.assignments, matrix.labels))
                if matrix.labels is not None and report.final_state is not None else float("nan")
            )
            records.append((config.loss, acc, khat))
        _emit(format_summary(summarize(records)), args.out)
        return 0
    report = train(matrix.values, config)
    lines = ["command train", f"loss {config.loss}", f"seed {config.seed}"]
    lines += report.lines()
    if report.khat_trajectory:
        lines.append(f"final khat {report.khat_trajectory[-1]}")
    if matrix.labels is not None and report.final_state is not None:
        acc = clustering_accuracy(LabeledAssignment(report.final_state.assignments, matrix.labels))
        lines.append(f"final accuracy {acc!r}")
    for phase, secs in report.wall_clock.items():
        sys.stderr.write(f"phase {phase}: {secs:.2f} s\n")
    if args.state_out and report.final_state is not None:
        if isinstance(report.final_state, DpmState):
            save_dpm_state(report.final_state, args.state_out)
        else:
            save_gmm_state(report.final_state, args.state_out)
    if args.net_out:
        save_net(report.final_net, args.net_out)
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_eval(args) -> int:
    matrix = load_features(args.features)
    state = load_state(args.state)
    khat, sizes = estimated_k_report(state)
    lines = ["command eval", f"khat {khat}", "sizes " + ",".join(str(int(s)) for s in sizes)]
    if matrix.labels is not None:
        if state.assignments.size != matrix.n:
            raise CliError(
                f"state holds {state.assignments.size} assignments but features have {matrix.n} rows"
            )
        acc = clustering_accuracy(LabeledAssignment(state.assignments, matrix.labels))
        lines.append(f"accuracy {acc!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_demo_asymmetry(args) -> int:
    rows = dv.asymmetry_table(args.mu1, _parse_grid(args.grid), args.alpha)
    _emit(dv.format_asymmetry_table(rows), args.out)
    return 0


def _cmd_divergence(args) -> int:
    mean1 = _parse_vector(args.mean1)
    mean2 = _parse_vector(args.mean2)
    var1 = _parse_vector(args.var1) if args.var1 else np.ones_like(mean1)
    var2 = _parse_vector(args.var2) if args.var2 else np.ones_like(mean2)
    if args.kind == "ajsd-first-order":
        value = dv.alpha_jsd_first_order(mean1, mean2, args.alpha)
    else:
        g1 = dv.DiagGaussian(mean1, var1)
        g2 = dv.DiagGaussian(mean2, var2)
        value = dv.kld_gaussian(g1, g2) if args.kind == "kld" else dv.alpha_jsd(g1, g2, args.alpha)
    _emit(f"{args.kind} {value!r}\n", args.out)
    return 0


def _add_config_flags(p: _Parser, training: bool = False) -> None:
    p.add_argument("--config", help="key=value config file; flags override its values")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fit-iters", dest="fit_iters", type=int, default=None)
    p.add_argument("--omega0", type=float, default=None)
    p.add_argument("--a0", type=float, default=None)
    p.add_argument("--b0", type=float, default=None)
    p.add_argument("--m0", type=float, default=None)
    p.add_argument("--m0-mode", dest="m0_mode", choices=("fixed", "data-mean"), default=None)
    p.add_argument("--lambda0", type=float, default=None)
    p.add_argument("--prune-threshold", dest="prune_threshold", type=float, default=None)
    if training:
        p.add_argument("--loss", choices=("ajsd", "kld", "abc"), default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--lambda3", type=float, default=None)
        p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
        p.add_argument("--mse-epochs", dest="mse_epochs", type=int, default=None)
        p.add_argument("--reg-epochs", dest="reg_epochs", type=int, default=None)
        p.add_argument("--cycles", type=int, default=None)
        p.add_argument("--arch", default=None, help="comma-separated layer widths, e.g. 512,384,256,128")
        p.add_argument("--sigma-head", dest="sigma_head", action="store_const", const=True, default=None)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=None)


def _build_parser() -> _Parser:
    parser = _Parser(prog="deepselect", description="Deep model selection experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate labeled Gaussian blobs")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n-per", dest="n_per", type=int, required=True)
    p.add_argument("--sep", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("binary", "text"), default="binary")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fit-dpm", help="fit the truncated DP mixture")
    p.add_argument("features")
    p.add_argument("--t", "--truncation", dest="truncation", type=int, default=None)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--state-out", dest="state_out", default=None)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_fit_dpm)

    p = sub.add_parser("fit-gmm", help="fit the hard-EM Gaussian mixture")
    p.add_argument("features")
    p.add_argument("--k", "--clusters", dest="clusters", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--state-out", dest="state_out", default=None)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_fit_gmm)

    p = sub.add_parser("train", help="alternating autoencoder + mixture training")
    p.add_argument("features")
    p.add_argument("--t", "--truncation", dest="truncation", type=int, default=None)
    p.add_argument("--k", "--clusters", dest="clusters", type=int, default=None)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--state-out", dest="state_out", default=None)
    p.add_argument("--net-out", dest="net_out", default=None)
    _add_config_flags(p, training=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="report accuracy and cluster count of a fitted state")
    p.add_argument("features")
    p.add_argument("--state", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("demo-asymmetry", help="emit the KLD vs aJSD asymmetry table")
    p.add_argument("--mu1", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.65)
    p.add_argument("--grid", required=True, help="lo:hi:step")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_demo_asymmetry)

    p = sub.add_parser("divergence", help="one-shot divergence computation")
    p.add_argument("--kind", choices=("kld", "ajsd", "ajsd-first-order"), required=True)
    p.add_argument("--mean1", required=True)
    p.add_argument("--mean2", required=True)
    p.add_argument("--var1", default=None)
    p.add_argument("--var2", default=None)
    p.add_argument("--alpha", type=float, default=0.65)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_divergence)

    return parser


_DASH_VALUE_FLAGS = {"--grid", "--mean1", "--mean2", "--var1", "--var2"}


def _merge_dash_values(argv):
    """Join '--flag -value' pairs so values starting with '-' parse."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _DASH_VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def cli(argv=None) -> int:
    parser = _build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = parser.parse_args(_merge_dash_values(list(argv)))
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        sys.stderr.write(parser.format_usage())
        return 1
    except (ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"runtime failure: {exc}\n")
        return 2
    except Exception as exc:  # anything unexpected is a runtime failure
        sys.stderr.write(f"runtime failure: {type(exc).__name__}: {exc}\n")
        return 2


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
