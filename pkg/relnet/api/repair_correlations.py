import logging

import numpy as np

from relnet import repair
from relnet.api.validation import resolve_topologies
from relnet.db.session import ReportWriter
from relnet.exceptions import NumericalError
from relnet.schemas.experiment import RepairCorrelationsConfig, RunOptions, expand_grid
from relnet.schemas.repair import RepairSpec

logger = logging.getLogger(__name__)

MEASURES = ("uptime", "cor_12", "cor_13", "c3", "d3")


def run_repair_correlations(config: RepairCorrelationsConfig, writer: ReportWriter, options: RunOptions) -> None:
    """
    Correlation measures of the repair model over the p_down grid, per system.

    - **repair_correlations_<system>.csv**: `p_down`, up-time, Cor(1,2), Cor(1,3), C3, D3
    - **repair_joint_<system>.csv**: the eight (pattern, probability) rows per p_down
    - **repair_monte_carlo_<system>.csv**: analytic vs. simulated patterns when enabled
    """
    systems = resolve_topologies(config)
    p_grid = expand_grid(config.p_down_grid)
    for name in config.systems:
        system = systems[name]
        logger.info("repair correlations for %s over %d p_down values", name, len(p_grid))
        rows, joints = [], []
        for p_down in p_grid:
            spec = RepairSpec(p_down=float(p_down), tau=config.tau)
            joint = repair.build_joint_distribution(system, spec, config.multiplicity)
            joints += [
                (float(p_down), pattern, probability) for pattern, probability in repair.joint_distribution_rows(joint)
            ]
            try:
                measures = repair.joint_measures(joint)
            except NumericalError as exc:
                logger.warning("p_down=%g: %s", p_down, exc.detail)
                measures = {m: np.nan for m in MEASURES}
                measures["uptime"] = joint.pattern("+**")
            rows.append((float(p_down),) + tuple(measures[m] for m in MEASURES))
        writer.write_csv(f"repair_correlations_{name}.csv", ("p_down",) + MEASURES, rows)
        writer.write_csv(f"repair_joint_{name}.csv", ["p_down", "pattern", "probability"], joints)
        if config.monte_carlo.enabled:
            _monte_carlo_check(config, name, system, writer, options)


def _monte_carlo_check(config, name, system, writer: ReportWriter, options: RunOptions) -> None:
    check = config.monte_carlo
    rows = []
    for index, p_down in enumerate(check.p_down):
        spec = RepairSpec(p_down=p_down, tau=config.tau)
        joint = repair.build_joint_distribution(system, spec, config.multiplicity)
        estimates = repair.estimate_pattern_probabilities(
            system, spec, config.multiplicity, 3, options.samples, [options.seed, index],
            shards=check.shards, threads=options.threads,
        )
        for pattern, analytic in joint.rows():
            estimate = estimates[pattern]
            z = (estimate.mean - analytic) / estimate.stderr if estimate.stderr > 0 else 0.0
            if abs(z) > 3:
                logger.warning("%s p_down=%g pattern %s: analytic %.6g vs estimate %.6g (z=%.2f)",
                               name, p_down, pattern, analytic, estimate.mean, z)
            rows.append((p_down, pattern, analytic, estimate.mean, estimate.stderr, z))
    writer.write_csv(
        f"repair_monte_carlo_{name}.csv",
        ["p_down", "pattern", "analytic", "estimate", "stderr", "z"],
        rows,
    )
