"""Command-line pipeline: ``hrfseg segment`` and ``hrfseg oracle``."""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass

import numpy as np

from hrfseg.errors import ConfigError, HrfError
from hrfseg.fine_partition import morphological_gradient, region_prior_means, watershed
from hrfseg.graph_core import build_rag, minimum_spanning_tree
from hrfseg.hierarchy import cut_k, cut_threshold, render_ucm, ultrametric
from hrfseg.mc_oracle import estimate_cut_frequencies
from hrfseg.raster_io import load_label_map, load_raster, save_label_map, save_ucm
from hrfseg.sws import (
    ChiParams,
    chain,
    chi_valuation,
    combine_priors,
    edge_chi,
    prior_density,
    sws_valuation,
    uniform_density,
)

MODES = ("uniform", "volume", "hrf", "hrf-transition")


@dataclass
class PipelineConfig:
    input: str
    prior: str | None = None
    prior2: str | None = None
    labels_in: str | None = None
    mode: str = "volume"
    markers: float | None = None
    chain: int = 0
    k: int | None = None
    threshold: float | None = None
    out_ucm: str | None = None
    out_labels: str | None = None
    seed: int = 0
    trials: int = 100_000
    dump_edges: str | None = None
    out_csv: str | None = None

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.mode.startswith("hrf") and self.prior is None:
            raise ConfigError(f"mode {self.mode} requires --prior")
        if self.prior2 is not None and self.prior is None:
            raise ConfigError("--prior2 given without --prior")
        if self.chain < 0:
            raise ConfigError("--chain must be >= 0")
        if self.markers is not None and not self.markers > 0:
            raise ConfigError("--markers must be positive")
        if self.k is not None and self.threshold is not None:
            raise ConfigError("give only one of --k / --threshold")
        if self.out_labels is not None and self.k is None and self.threshold is None:
            raise ConfigError("--out-labels needs exactly one of --k / --threshold")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("--threshold must lie in [0, 1]")
        if self.trials < 1:
            raise ConfigError("--trials must be >= 1")


class _Stages:
    """Times named stages and tags errors with the stage that raised them."""

    def __init__(self, out):
        self.out = out
        self.times = []
        self.name = None

    def __call__(self, name):
        self.name = name
        return self

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        self.times.append((self.name, elapsed))
        if exc is not None and isinstance(exc, HrfError):
            exc.args = (f"[{self.name}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
        return False

    def report(self):
        for name, t in self.times:
            print(f"  {name:<12s} {t:8.3f} s", file=self.out)
        print(f"  {'total':<12s} {sum(t for _, t in self.times):8.3f} s", file=self.out)


def _prepare(config: PipelineConfig, stage, log):
    """Shared front half: fine partition, tree, density and chi parameters."""
    with stage("load"):
        image = load_raster(config.input, kind="image")
        prior = None
        if config.prior is not None:
            prior = load_raster(config.prior, kind="prior")
            if config.prior2 is not None:
                prior = combine_priors(prior, load_raster(config.prior2, kind="prior"))
    with stage("partition"):
        if config.labels_in is not None:
            labels = load_label_map(config.labels_in)
            if labels.shape != image.shape:
                raise ConfigError(
                    f"label map {labels.shape} does not match image {image.shape}"
                )
        else:
            labels = watershed(morphological_gradient(image))
    n_regions = int(labels.max()) + 1
    print(f"fine regions: {n_regions}", file=log)
    with stage("rag"):
        rag = build_rag(labels, image)
    if config.dump_edges:
        rag.dump_edges(config.dump_edges)
    with stage("mst"):
        tree = minimum_spanning_tree(rag)
    n_markers = config.markers if config.markers is not None else n_regions
    with stage("density"):
        means = region_prior_means(labels, prior) if prior is not None else None
        if config.mode.startswith("hrf"):
            density = prior_density(means, n_markers)
        elif config.mode == "volume" and means is not None:
            density = prior_density(means, n_markers)
        else:
            density = uniform_density(labels, n_markers)
    if config.mode == "volume":
        params = ChiParams(mode="volume")
    elif config.mode == "hrf-transition":
        params = ChiParams(mode="transition")
    else:
        params = ChiParams(mode="none")
    return labels, rag, tree, means, density, params


def _valuate(tree, density, means, params):
    if params.mode == "none":
        return sws_valuation(tree, density)
    return chi_valuation(tree, density, means, params)


def run_segment(config: PipelineConfig, log=None) -> int:
    log = log or sys.stdout
    config.validate()
    stage = _Stages(log)
    labels, rag, tree, means, density, params = _prepare(config, stage, log)
    with stage("valuation"):
        valuation = _valuate(tree, density, means, params)
        for _ in range(config.chain):
            tree = chain(tree, valuation)
            valuation = _valuate(tree, density, means, params)
    if config.out_ucm:
        with stage("ucm"):
            pairs = np.stack([rag.u, rag.v], axis=1)
            saliency = ultrametric(tree, valuation, pairs)
            save_ucm(render_ucm(labels, saliency), config.out_ucm)
    if config.k is not None or config.threshold is not None:
        with stage("cut"):
            if config.k is not None:
                out = cut_k(tree, valuation, config.k, labels)
            else:
                out = cut_threshold(tree, valuation, config.threshold, labels)
        print(f"output regions: {int(out.max()) + 1}", file=log)
        if config.out_labels:
            save_label_map(out, config.out_labels)
    stage.report()
    return 0


def run_oracle(config: PipelineConfig, log=None) -> int:
    """Compare closed-form cut probabilities with simulated frequencies.

    Returns 0 when every edge lies within 4 binomial standard errors, else 1.
    """
    log = log or sys.stdout
    config.validate()
    stage = _Stages(sys.stderr)
    labels, rag, tree, means, density, params = _prepare(config, stage, sys.stderr)
    with stage("valuation"):
        valuation = _valuate(tree, density, means, params)
        for _ in range(config.chain):
            tree = chain(tree, valuation)
            valuation = _valuate(tree, density, means, params)
    chi = None if params.mode == "none" else edge_chi(tree, means, params)
    with stage("simulation"):
        report = estimate_cut_frequencies(tree, density, config.trials, config.seed, chi)
    report = report.with_closed_form(valuation.p)
    ok = report.passes(4.0)
    verdict = (
        f"# oracle {'PASS' if ok else 'FAIL'}: max deviation "
        f"{float(np.max(report.deviations(), initial=0.0)):.3f} sigma over "
        f"{tree.edge_count} edges, trials={config.trials}\n"
    )
    if config.out_csv:
        with open(config.out_csv, "w") as fh:
            fh.write(report.to_csv())
    else:
        log.write(report.to_csv())
    log.write(verdict)
    stage.report()
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hrfseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("segment", "build the hierarchy and write UCM / partitions"),
        ("oracle", "Monte-Carlo check of the closed-form cut probabilities"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--input", required=True, help="grayscale PGM image")
        p.add_argument("--prior", help="prior probability map (PGM)")
        p.add_argument("--prior2", help="second prior, averaged with --prior")
        p.add_argument("--labels-in", help="external fine partition (LBL)")
        p.add_argument("--mode", default="volume", choices=MODES)
        p.add_argument("--markers", type=float, help="expected marker count N (default: number of fine regions)")
        p.add_argument("--chain", type=int, default=0, help="re-run the valuation this many times on its own output")
        p.add_argument("--seed", type=int, default=0, help="Monte-Carlo seed")
        p.add_argument("--dump-edges", help="write the RAG edge list as CSV")
        if name == "segment":
            p.add_argument("--k", type=int, help="cut into exactly K regions")
            p.add_argument("--threshold", type=float, help="cut edges with probability above this value")
            p.add_argument("--out-ucm", help="16-bit PGM contour map")
            p.add_argument("--out-labels", help="output partition (LBL); needs --k or --threshold")
        else:
            p.add_argument("--trials", type=int, default=100_000, help="number of marker draws")
            p.add_argument("--out-csv", help="write the report here instead of stdout")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and ConfigError.exit_code
    fields = {k: v for k, v in vars(args).items() if k != "command"}
    config = PipelineConfig(**fields)
    try:
        if args.command == "segment":
            return run_segment(config)
        return run_oracle(config)
    except HrfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
