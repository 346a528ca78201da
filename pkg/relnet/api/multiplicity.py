import itertools
import logging

from relnet import reliability
from relnet.db.session import ReportWriter
from relnet.schemas.experiment import MatchMultiplicityConfig, RunOptions, expand_grid
from relnet.schemas.reliability import BlockModel, ChainModel

logger = logging.getLogger(__name__)


def reference_chain(config: MatchMultiplicityConfig) -> ChainModel:
    ref = config.reference
    return ChainModel.iid(BlockModel(multiplicity=ref.multiplicity, flux=ref.flux, law=ref.law), ref.length)


def run_match_multiplicity(config: MatchMultiplicityConfig, writer: ReportWriter, options: RunOptions) -> None:
    """
    Minimal N' over the (p, k') grid.

    - **multiplicity_surface.csv**: `p`, `k_prime`, `n_mttf`, `n_initial`, `n_both`
    """
    chain = reference_chain(config)
    p_grid = expand_grid(config.p_grid)
    k_grid = expand_grid(config.k_prime_grid)
    logger.info("matching multiplicity on a %d x %d grid", len(p_grid), len(k_grid))
    rows = []
    for p, k_prime in itertools.product(p_grid, k_grid):
        search = dict(p_thres=config.p_thres, max_multiplicity=config.max_multiplicity)
        n_mttf = reliability.match_multiplicity(chain, float(p), float(k_prime), "mttf", **search)
        n_initial = reliability.match_multiplicity(chain, float(p), float(k_prime), "initial", **search)
        # both criteria are monotone in N', so the conjunction starts where the later one does
        rows.append((float(p), float(k_prime), n_mttf, n_initial, max(n_mttf, n_initial)))
    writer.write_csv("multiplicity_surface.csv", ["p", "k_prime", "n_mttf", "n_initial", "n_both"], rows)
