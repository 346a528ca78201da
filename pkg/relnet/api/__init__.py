from .reliability_curves import run_reliability_curves
from .multiplicity import run_match_multiplicity
from .repair_correlations import run_repair_correlations
from .key_rates import run_key_rates

RUNNERS = {
    "reliability-curves": run_reliability_curves,
    "match-multiplicity": run_match_multiplicity,
    "repair-correlations": run_repair_correlations,
    "key-rates": run_key_rates,
}
