"""Link-level simulator for 2-user MU-MIMO OFDM reception.

Four receivers over a shared signal model: a covariance-based linear
receiver, linear interference rejection combining, nulling-projection
interferer classification, and joint ML classification with max-log soft
detection reading the same distance buffers.
"""

from .channel import (
    FLAT,
    PED_A,
    PED_B,
    CorrelationSpec,
    MultipathProfile,
    ToneChannel,
    ToneObservation,
    apply_correlation,
    gen_iid_block,
    gen_multipath,
    gen_pilots,
    transmit,
)
from .constellation import (
    HYPOTHESIS_KINDS,
    BitPartition,
    Constellation,
    ConstellationKind,
    bit_partition,
    build_constellation,
    demap_hard,
    hypothesis_set,
    modulate,
)
from .detect import (
    ClassificationResult,
    DistanceCountReport,
    DistanceEntry,
    DistanceTable,
    LinearWeights,
    LlrFrame,
    combine,
    count_distances,
    cov_weights,
    distance,
    distance_tables,
    irc_llr,
    irc_weights,
    joint_ml_classify,
    llr_frame_from_tables,
    max_log_llr,
    nulling_classify,
    nulling_filter,
)
from .fec import CodeConfig, decode, encode
from .harness import (
    ConfigError,
    CurveRecord,
    ExperimentConfig,
    load_config,
    parse_config_text,
    records_to_csv,
    records_to_json,
    run_ber_sweep,
    run_bler_sweep,
    run_classification_sweep,
    run_sweep,
)

__version__ = "0.1.0"
