import logging
from typing import Dict, List

import numpy as np

from relnet import reliability, topology
from relnet.db.session import ReportWriter
from relnet.exceptions import NumericalError
from relnet.schemas.experiment import ReliabilityCurvesConfig, RunOptions, expand_grid
from relnet.schemas.reliability import BlockModel, ChainModel
from relnet.schemas.topology import ChainLayout, Topology

logger = logging.getLogger(__name__)


def _rate_or_nan(rate, survival, t: np.ndarray) -> np.ndarray:
    try:
        return np.asarray(rate(t), dtype=float)
    except NumericalError:
        logger.warning("survival underflows on part of the grid; failure rate left as nan there")
        values = np.full(t.shape, np.nan)
        for i, ti in enumerate(t):
            if survival(ti) > 0:
                values[i] = rate(ti)
        return values


def system_curves(layout, name: str, block: BlockModel, t: np.ndarray):
    """S(t) and mu(t) of a chain (closed form) or a general topology (indicator)."""
    if isinstance(layout, ChainLayout):
        chain = ChainModel.iid(block, layout.chain)
        survival = lambda x: reliability.chain_survival(chain, x)
        rate = lambda x: reliability.chain_failure_rate(chain, x)
    else:
        graph: Topology = topology.resolve_topology(layout, name)
        survivals, rates = topology.block_assignments(graph, block)
        survival = lambda x: topology.network_survival(graph, survivals, x)
        rate = lambda x: topology.network_failure_rate(graph, survivals, rates, x)
    return np.asarray(survival(t), dtype=float), _rate_or_nan(rate, survival, t)


def run_reliability_curves(config: ReliabilityCurvesConfig, writer: ReportWriter, options: RunOptions) -> None:
    """
    Reliability function and failure rate for every (system, model) pair.

    - **reliability_curves.csv**: `t`, then `<system>_<model>_S` and `<system>_<model>_mu`
    - **reference_laws.csv**: Gompertz-Makeham and Weibull overlay curves
    - **reference_fit.csv**: fitted law parameters when `reference.fit_to` is set
    """
    t = np.asarray(expand_grid(config.time_grid), dtype=float)
    logger.info("reliability curves: %d systems x %d models on %d times", len(config.systems), len(config.models), t.size)
    header: List[str] = ["t"]
    columns: List[np.ndarray] = [t]
    rates: Dict[str, np.ndarray] = {}
    for system in config.systems:
        for model_name, block in config.models.items():
            survival, rate = system_curves(config.topologies[system], system, block, t)
            prefix = f"{system}_{model_name}"
            header += [f"{prefix}_S", f"{prefix}_mu"]
            columns += [survival, rate]
            rates[prefix] = rate
    writer.write_csv("reliability_curves.csv", header, zip(*columns))

    laws = config.reference
    if laws.fit_to is not None:
        if laws.fit_to not in rates:
            logger.warning("fit_to %r names no produced curve; keeping configured parameters", laws.fit_to)
        else:
            fitted = reliability.fit_reference_laws(t, rates[laws.fit_to], laws.model_dump(exclude={"fit_to"}))
            laws = laws.model_copy(update=fitted)
            writer.write_csv("reference_fit.csv", ["parameter", "value"], sorted(fitted.items()))
    writer.write_csv(
        "reference_laws.csv",
        ["t", "gompertz_makeham_mu", "gompertz_makeham_S", "weibull_mu", "weibull_S"],
        zip(
            t,
            reliability.gompertz_makeham_failure_rate(t, laws.gompertz_a, laws.gompertz_b, laws.gompertz_lam),
            reliability.gompertz_makeham_survival(t, laws.gompertz_a, laws.gompertz_b, laws.gompertz_lam),
            reliability.weibull_failure_rate(t, laws.weibull_a, laws.weibull_b),
            reliability.weibull_survival(t, laws.weibull_a, laws.weibull_b),
        ),
    )
