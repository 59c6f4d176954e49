"""Physical-layer secret-key generation toolkit.

Correlated channel-observation modeling, guard-band quantization,
closed-form key-disagreement-rate and energy-efficiency analysis,
Monte Carlo cross-validation and neural-network channel prediction.
"""

from .analysis import (
    EnergyReport,
    KeyRateResult,
    energy_efficiency,
    key_rates,
    optimal_allocation,
    outage_probability,
    p1_closed_form,
    p2_closed_form,
)
from .channel import (
    CorrelationModel,
    ObservationPair,
    SystemParams,
    derive_correlation,
    load_system_params,
    sample_pair,
    sample_pairs,
    sample_trace,
)
from .montecarlo import (
    EmpiricalKeyRates,
    McEstimate,
    ValidationReport,
    empirical_key_rates,
    empirical_mse,
    validate,
)
from .nnbp import (
    ChannelPredictor,
    NetworkParams,
    Normalizer,
    PipelineResult,
    TrainConfig,
    nnbp_pipeline,
)
from .quantizer import (
    DELTA_MAX,
    EventKind,
    GuardBandQuantizer,
    QuantSymbol,
    classify_event,
    classify_events,
    empirical_quantizer,
    make_quantizer,
    quantize,
    quantize_one,
    reconcile_indices,
)
from .specfun import (
    ConvergenceError,
    SeriesControl,
    bessel_j0,
    gamma_lower_int,
    gamma_upper_int,
    marcum_q1,
)

__version__ = "0.1.0"
