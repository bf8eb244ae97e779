"""Batch command line: ``causal analyze`` and ``causal generate``.

Exit codes: 0 success, 1 error, 2 effect not identified.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import __version__
from .dataset import SyntheticSpec, generate_linear_dataset, load_csv
from .errors import CausalError, ConfigError
from .estimation import DEFAULT_METHODS, METHODS, EstimationConfig, estimate_effect, method_kind
from .graph import augment_with_dataset_columns
from .identification import identify_effect
from .parsing import load_graph, render_dot, sniff_format
from .refutation import REFUTER_NAMES, RefuterConfig, applicable_refuters, run_refuters
from .report import Report, render_report

EXIT_OK, EXIT_ERROR, EXIT_NOT_IDENTIFIED = 0, 1, 2


@dataclass(frozen=True)
class AnalysisConfig:
    data_path: str
    graph_path: str
    treatment: str
    outcome: str
    graph_format: str = "auto"
    method: str | None = None
    refuters: tuple | None = None
    seed: int = 0
    bootstrap_reps: int = 200
    permutation_reps: int = 100
    refuter_replications: int = 100
    subset_fraction: float = 0.8
    simulated_beta: float | None = None
    rdd_cutoff: float | None = None
    rdd_bandwidth: float | None = None
    rdd_running_variable: str | None = None
    output_path: str | None = None
    output_format: str = "json"

    def __post_init__(self):
        for name in ("data_path", "graph_path", "treatment", "outcome"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be nonempty")
        if self.graph_format not in ("dot", "gml", "auto"):
            raise ConfigError(f"graph format must be dot, gml or auto, got {self.graph_format!r}")
        if self.output_format not in ("json", "text"):
            raise ConfigError(f"output format must be json or text, got {self.output_format!r}")
        if self.method is not None and self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; known: {', '.join(METHODS)}")
        if self.refuters is not None:
            object.__setattr__(self, "refuters", tuple(self.refuters))
            unknown = [r for r in self.refuters if r not in REFUTER_NAMES]
            if unknown:
                raise ConfigError(f"unknown refuter(s) {', '.join(unknown)}; "
                                  f"valid: {', '.join(REFUTER_NAMES)}")
        if 0 < self.bootstrap_reps < 20:
            raise ConfigError("bootstrap reps must be 0 or at least 20")
        if self.refuter_replications < 1:
            raise ConfigError("refuter replications must be at least 1")

    def resolved_format(self) -> str:
        return sniff_format(self.graph_path) if self.graph_format == "auto" else self.graph_format

    def estimation_config(self, method: str) -> EstimationConfig:
        return EstimationConfig(
            method=method, bootstrap_reps=self.bootstrap_reps,
            permutation_reps=self.permutation_reps, seed=self.seed,
            rdd_cutoff=self.rdd_cutoff, rdd_bandwidth=self.rdd_bandwidth,
            rdd_running_variable=self.rdd_running_variable)

    def refuter_config(self) -> RefuterConfig:
        return RefuterConfig(replications=self.refuter_replications, seed=self.seed,
                             subset_fraction=self.subset_fraction,
                             simulated_beta=self.simulated_beta)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _analyze_arguments(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", help="JSON file of settings; flags override it")
    p.add_argument("--data", dest="data_path", default=S, help="CSV with a header row")
    p.add_argument("--graph", dest="graph_path", default=S, help="DOT or GML graph file")
    p.add_argument("--graph-format", dest="graph_format", choices=("dot", "gml", "auto"), default=S)
    p.add_argument("--treatment", default=S)
    p.add_argument("--outcome", default=S)
    p.add_argument("--method", default=S, help="estimator name, e.g. backdoor.linear_regression")
    p.add_argument("--refuters", default=S, help="comma-separated refuter names")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--bootstrap-reps", dest="bootstrap_reps", type=int, default=S)
    p.add_argument("--permutation-reps", dest="permutation_reps", type=int, default=S)
    p.add_argument("--refuter-reps", dest="refuter_replications", type=int, default=S)
    p.add_argument("--subset-fraction", dest="subset_fraction", type=float, default=S)
    p.add_argument("--simulated-beta", dest="simulated_beta", type=float, default=S)
    p.add_argument("--rdd-cutoff", dest="rdd_cutoff", type=float, default=S)
    p.add_argument("--rdd-bandwidth", dest="rdd_bandwidth", type=float, default=S)
    p.add_argument("--rdd-running", dest="rdd_running_variable", default=S)
    p.add_argument("--out", dest="output_path", default=S)
    p.add_argument("--format", dest="output_format", choices=("json", "text"), default=S)


def parse_config(args, environ=None) -> AnalysisConfig:
    """Build an AnalysisConfig from ``analyze`` flags.

    Precedence: flags, then the ``--config`` file, then ``CAUSAL_SEED`` for
    the seed, then defaults.
    """
    environ = os.environ if environ is None else environ
    parser = _Parser(prog="causal analyze", add_help=False)
    _analyze_arguments(parser)
    flags = vars(parser.parse_args(list(args)))
    settings = {}
    config_file = flags.pop("config", None)
    if config_file:
        try:
            settings = json.loads(Path(config_file).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file {config_file!r}: {exc}") from None
        if not isinstance(settings, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in fields(AnalysisConfig)}
        unknown = sorted(set(settings) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    settings.update(flags)
    if "seed" not in settings and environ.get("CAUSAL_SEED"):
        try:
            settings["seed"] = int(environ["CAUSAL_SEED"])
        except ValueError:
            raise ConfigError(f"CAUSAL_SEED must be an integer, got {environ['CAUSAL_SEED']!r}") from None
    if isinstance(settings.get("refuters"), str):
        settings["refuters"] = [r.strip() for r in settings["refuters"].split(",") if r.strip()]
    missing = [k for k in ("data_path", "graph_path", "treatment", "outcome") if not settings.get(k)]
    if missing:
        flag = {"data_path": "--data", "graph_path": "--graph"}
        raise ConfigError("missing required flag(s): " +
                          ", ".join(flag.get(k, "--" + k) for k in missing))
    return AnalysisConfig(**settings)


def _config_echo(cfg: AnalysisConfig) -> dict:
    echo = asdict(cfg)
    echo["refuters"] = None if cfg.refuters is None else list(cfg.refuters)
    return echo


def run_pipeline(cfg: AnalysisConfig) -> Report:
    """Model, identify, estimate and refute, accumulating warnings."""
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        data = load_csv(cfg.data_path, cfg.treatment, cfg.outcome)
        graph = load_graph(cfg.graph_path, cfg.resolved_format())
    notes.extend(str(w.message) for w in caught)

    missing = sorted(n for n in graph.nodes - set(data.names) if n not in graph.latent)
    if missing:
        notes.append(f"graph variable(s) {', '.join(missing)} absent from the data are treated as latent")
        graph = graph.with_latent(missing)
    augmented = augment_with_dataset_columns(graph, data.names, cfg.treatment, cfg.outcome)
    added = sorted(augmented.nodes - graph.nodes)
    model = {
        "nodes": sorted(augmented.nodes),
        "edges": [list(e) for e in sorted(augmented.edges)],
        "latent": sorted(augmented.latent),
        "added_common_causes": added,
    }

    ident = identify_effect(augmented, cfg.treatment, cfg.outcome)
    notes.extend(ident.warnings)
    report = Report(__version__, _config_echo(cfg), "ok", model, ident.to_dict(), warnings=notes)
    if not ident.identified:
        report.status = "not_identified"
        notes.append(f"the effect of {cfg.treatment} on {cfg.outcome} is not identified by the graph")
        return report

    if cfg.method is not None:
        kind = method_kind(cfg.method)
        estimand = ident.first(kind)
        if estimand is None:
            found = ", ".join(e.kind for e in ident.estimands)
            raise ConfigError(f"method {cfg.method!r} needs a {kind} estimand; identified: {found}")
        method = cfg.method
    else:
        estimand = ident.estimands[0]
        method = DEFAULT_METHODS[estimand.kind]

    ecfg = cfg.estimation_config(method)
    estimate = estimate_effect(data, estimand, ecfg)
    notes.extend(estimate.warnings)
    report.estimate = estimate.to_dict()

    names = list(cfg.refuters) if cfg.refuters is not None else applicable_refuters(estimand)
    point_cfg = cfg.estimation_config(method)
    point_cfg = EstimationConfig(**{**point_cfg.to_dict(), "bootstrap_reps": 0, "permutation_reps": 0})
    results = run_refuters(names, data, augmented, estimand, estimate, cfg.refuter_config(),
                           estimation_config=point_cfg)
    report.refutations = [r.to_dict() for r in results]
    failed = [r.refuter for r in results if not r.passed]
    if failed:
        notes.append("refuters not passed: " + ", ".join(failed))
    return report


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _generate(args) -> int:
    try:
        spec_data = json.loads(Path(args.spec_json).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read spec file {args.spec_json!r}: {exc}") from None
    try:
        spec = SyntheticSpec(**spec_data)
    except TypeError as exc:
        raise ConfigError(f"invalid synthetic spec: {exc}") from None
    data, graph, truth = generate_linear_dataset(spec)
    prefix = args.out_prefix
    Path(prefix + ".csv").write_text(data.to_csv())
    Path(prefix + ".dot").write_text(render_dot(graph))
    Path(prefix + ".truth.json").write_text(json.dumps({"true_ate": truth, **asdict(spec)}, indent=2) + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    top = argparse.ArgumentParser(prog="causal", description="Model, identify, estimate and refute causal effects.")
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)
    analyze = sub.add_parser("analyze", help="run the four-step analysis", add_help=True)
    _analyze_arguments(analyze)
    gen = sub.add_parser("generate", help="write a synthetic dataset, graph and ground truth")
    gen.add_argument("--spec-json", required=True)
    gen.add_argument("--out-prefix", required=True)

    if not argv or argv[0] not in ("analyze", "generate"):
        try:
            top.parse_args(argv)
        except SystemExit as exc:
            return EXIT_OK if exc.code == 0 else EXIT_ERROR
        return EXIT_ERROR
    try:
        if argv[0] == "generate":
            try:
                args = gen.parse_args(argv[1:])
            except SystemExit as exc:
                return EXIT_OK if exc.code == 0 else EXIT_ERROR
            return _generate(args)
        if "-h" in argv[1:] or "--help" in argv[1:]:
            analyze.print_help()
            return EXIT_OK
        cfg = parse_config(argv[1:])
        report = run_pipeline(cfg)
        _write(render_report(report, cfg.output_format), cfg.output_path)
        return EXIT_NOT_IDENTIFIED if report.status == "not_identified" else EXIT_OK
    except (CausalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
