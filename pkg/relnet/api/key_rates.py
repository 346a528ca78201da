import logging
from typing import List, Sequence, Tuple

import numpy as np

from relnet import entsim, repair, topology
from relnet.api.validation import resolve_topologies
from relnet.db.session import ReportWriter
from relnet.schemas.entsim import KeyRateCurve, ProtocolParams
from relnet.schemas.experiment import KeyRatesConfig, RunOptions, expand_grid
from relnet.schemas.topology import Configuration

logger = logging.getLogger(__name__)

POINT_HEADER = [
    "family", "configuration", "t_cut", "p_cut", "mean_T_steps", "mean_T_seconds",
    "mean_W", "r", "R_bits_per_second", "n_samples",
]
AVERAGE_HEADER = ["family", "weighting", "t_cut", "R_bits_per_second"]
CONFIGURATION_HEADER = ["family", "configuration", "multiplicities", "paths", "count", "weighting", "weight"]

NETWORK_STREAM = 1_000
CHAIN_STREAM = 2_000


def configuration_curves(
    configurations: Sequence[Configuration], params: ProtocolParams, t_cuts, options: RunOptions, stream: int
) -> List[KeyRateCurve]:
    return [
        entsim.configuration_curve(
            c, params, t_cuts, stream=stream + i, shards=options.shards, threads=options.threads
        )
        for i, c in enumerate(configurations)
    ]


def _point_rows(family: str, curves: Sequence[KeyRateCurve]):
    for curve in curves:
        for p in curve.points:
            yield (family, curve.label, p.t_cut, p.p_cut, p.mean_t_steps, p.mean_t_seconds,
                   p.mean_w, p.r, p.rate, p.n_samples)


def _average_rows(family: str, averages: Sequence[KeyRateCurve]):
    for curve in averages:
        for t_cut, rate in zip(curve.t_cuts, curve.rates):
            yield family, curve.weighting, t_cut, rate


def _configuration_rows(family: str, weighting: str, configurations: Sequence[Configuration]):
    for c in configurations:
        multiplicities = " ".join(f"{e}={n}" for e, n in c.multiplicities.items())
        paths = " | ".join("-".join(p) for p in c.paths)
        yield family, c.id, multiplicities, paths, c.count, weighting, c.weight


def network_family(config: KeyRatesConfig, params: ProtocolParams, t_cuts, options: RunOptions):
    graph = resolve_topologies(config)[config.network.topology]
    classes = topology.enumerate_network_configurations(graph, config.network.up_probabilities[0])
    logger.info("network %s: %d configuration classes", graph.label, len(classes))
    curves = configuration_curves(classes, params, t_cuts, options, NETWORK_STREAM)
    averages, listed = [], []
    for q in config.network.up_probabilities:
        weighted = topology.enumerate_network_configurations(graph, q)
        label = f"q={q:g}"
        listed += list(_configuration_rows("network", label, weighted))
        averages.append(
            entsim.average_key_rate(curves, [c.total_weight for c in weighted], label="network", weighting=label)
        )
    return curves, averages, listed


def chain_family(config: KeyRatesConfig, params: ProtocolParams, t_cuts, options: RunOptions):
    chain = config.chain
    first = repair.condition_chain_configurations(chain.length, chain.multiplicity, chain.repair, chain.weightings[0])
    logger.info("chain of %d blocks: %d configurations", chain.length, len(first))
    curves = configuration_curves(first, params, t_cuts, options, CHAIN_STREAM)
    averages, listed = [], []
    for weighting in chain.weightings:
        weighted = repair.condition_chain_configurations(chain.length, chain.multiplicity, chain.repair, weighting)
        listed += list(_configuration_rows("chain", weighting, weighted))
        averages.append(
            entsim.average_key_rate(curves, [c.total_weight for c in weighted], label="chain", weighting=weighting)
        )
    return curves, averages, listed


def run_key_rates(config: KeyRatesConfig, writer: ReportWriter, options: RunOptions) -> None:
    """
    Per-configuration and weighted-average key-rate curves.

    - **key_rates_configurations.csv**: one row per (configuration, t_cut) point
    - **key_rates_average.csv**: weighted averages keyed by weighting
    - **configurations.csv**: enumerated configurations with their weights
    - **optimal_cutoffs.csv**: grid argmax of every curve
    """
    params = config.protocol.model_copy(update={"seed": options.seed, "samples": options.samples})
    t_cuts = [int(t) for t in np.rint(expand_grid(config.t_cut_grid))]
    logger.info("key rates on %d cut-offs with %d samples per configuration", len(t_cuts), params.samples)
    families: List[Tuple[str, list, list, list]] = []
    if config.network is not None:
        families.append(("network",) + network_family(config, params, t_cuts, options))
    if config.chain is not None:
        families.append(("chain",) + chain_family(config, params, t_cuts, options))

    points, averages, listed, optima = [], [], [], []
    for family, curves, family_averages, family_listed in families:
        points += list(_point_rows(family, curves))
        averages += list(_average_rows(family, family_averages))
        listed += family_listed
        for curve in list(curves) + list(family_averages):
            best = entsim.optimize_cutoff(curve)
            kind = curve.weighting or "configuration"
            optima.append((family, curve.label, kind, best, curve.rates[curve.t_cuts.index(best)]))
    writer.write_csv("key_rates_configurations.csv", POINT_HEADER, points)
    writer.write_csv("key_rates_average.csv", AVERAGE_HEADER, averages)
    writer.write_csv("configurations.csv", CONFIGURATION_HEADER, listed)
    writer.write_csv("optimal_cutoffs.csv", ["family", "curve", "kind", "t_cut", "R_bits_per_second"], optima)
