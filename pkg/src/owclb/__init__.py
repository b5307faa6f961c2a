"""owclb: pole-zero link modeling and DCO-OFDM spectrum optimization for
bandwidth-limited optical wireless links."""

from .linkchain import (
    BeamSquintSinc,
    FirstOrderLowPass,
    FlatGain,
    GaussianLowPass,
    LaserSecondOrder,
    LinkChain,
    MagSqPoleZeroGnr,
    NoiseSpectrum,
    NotReducibleError,
    RationalPoleZero,
    ResponseTable,
    TableRangeError,
    Tabulated,
    chain_from_dict,
    chain_to_dict,
    eval_component_magsq,
    eval_noise_psd,
    gnr_eval,
    is_monotone_decreasing,
    load_chain,
    read_response_table,
    reduce_to_polezero,
    save_chain,
    write_response_table,
)
from .waterfill import (
    ModulationGap,
    NonMonotoneGnrError,
    WaterfillSolution,
    dsigma2_dfmax,
    newton_fmax,
    psd_opt,
    rate_closed_form,
    read_solution_csv,
    sigma2_from_power,
    sigma2_of_fmax,
    waterlevel_solve,
    write_solution_csv,
)
from .bitload import (
    DEFAULT_BIT_CAP,
    BitLoadPlan,
    FlopComparison,
    GroupTable,
    SubcarrierGrid,
    flop_report,
    hh_accelerated,
    hh_naive,
    marginal_power,
    read_plan_csv,
    write_plan_csv,
)
from .fit import (
    FitConfig,
    FitResult,
    fit_polezero,
    model_to_channel_dict,
    residual_scan,
    scan_orders,
)

__version__ = "0.1.0"

__all__ = [
    "BeamSquintSinc",
    "BitLoadPlan",
    "DEFAULT_BIT_CAP",
    "FirstOrderLowPass",
    "FitConfig",
    "FitResult",
    "FlatGain",
    "FlopComparison",
    "GaussianLowPass",
    "GroupTable",
    "LaserSecondOrder",
    "LinkChain",
    "MagSqPoleZeroGnr",
    "ModulationGap",
    "NoiseSpectrum",
    "NonMonotoneGnrError",
    "NotReducibleError",
    "RationalPoleZero",
    "ResponseTable",
    "SubcarrierGrid",
    "TableRangeError",
    "Tabulated",
    "WaterfillSolution",
    "chain_from_dict",
    "chain_to_dict",
    "dsigma2_dfmax",
    "eval_component_magsq",
    "eval_noise_psd",
    "fit_polezero",
    "flop_report",
    "gnr_eval",
    "hh_accelerated",
    "hh_naive",
    "is_monotone_decreasing",
    "load_chain",
    "marginal_power",
    "model_to_channel_dict",
    "newton_fmax",
    "psd_opt",
    "rate_closed_form",
    "read_plan_csv",
    "read_response_table",
    "read_solution_csv",
    "reduce_to_polezero",
    "residual_scan",
    "save_chain",
    "scan_orders",
    "sigma2_from_power",
    "sigma2_of_fmax",
    "waterlevel_solve",
    "write_plan_csv",
    "write_response_table",
    "write_solution_csv",
]
