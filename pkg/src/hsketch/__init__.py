"""Harmonic sketches: turnstile frequency-moment estimation over finite
abelian groups via character-decomposed triple towers, with a
singleton-detection sampling baseline and a Monte-Carlo benchmark harness."""

from .errors import (
    CannotCombineError,
    CorruptSketchError,
    DomainError,
    GroupMismatchError,
    HSketchError,
    InvalidConfigError,
    InvalidGroupError,
    InvalidRHatError,
    InvalidWorkloadError,
    NoSamplesError,
    QuadratureError,
    RegisterOverflowError,
    SaturatedError,
    SchemaError,
)
from .estimator import (
    ColumnAggregates,
    EstimateReport,
    RHatTable,
    aggregate_column,
    column_aggregates,
    estimate_f,
    estimate_modulo,
    estimate_support,
    estimate_union,
    export_estimates,
    modulo_spectrum,
    predict_variance,
    rhat_from_pmf,
    truncation_tail,
    variance_factor,
)
from .groups import (
    FunctionTable,
    GroupDescriptor,
    SpectrumTable,
    char_eval,
    dft,
    idft,
    make_group,
    norms,
    reduce_mod,
)
from .sampler import (
    BucketState,
    FingerprintBucket,
    SamplerSketch,
    classify_bucket,
    equal_memory_m_prime,
    sample_f_moment,
    splitter_update,
    tau_gra_density,
    tau_gra_estimate,
)
from .special import EtaParams, eta1_closed, eta1_quadrature, gamma_fn, riemann_gap_check
from .tower import (
    IntegerTowerSketch,
    SketchConfig,
    TowerSketch,
    binomial_assign,
    cell_count,
    combine_product,
    default_window,
    deserialize,
    sketch_new,
    theoretical_window,
)
from .workloads import TruthTable, WorkloadSpec, gen_stream, signed_representative

__version__ = "0.1.0"
