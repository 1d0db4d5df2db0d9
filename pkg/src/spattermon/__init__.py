"""In-situ LPBF monitoring analytics.

Melt-pool spatter signature extraction and registration from off-axis
camera imagery, fringe-projection layer-surface reconstruction with areal
roughness, and regression models correlating spatter and process features
with layer roughness. Synthetic, seed-deterministic data generators stand
in for machine-bound recordings so the whole pipeline is verifiable at desk
scale.
"""

from .core import (
    EnergyDensities,
    HatchSchedule,
    InvalidParameterError,
    ProcessParameters,
    compute_sed,
    compute_ved,
    energy_densities,
    hatch_angle_for_layer,
    normalize_hatch_angle,
)
from .imaging import (
    Frame,
    Homography,
    LabelMap,
    connected_components,
    estimate_homography,
    threshold_segment,
    warp,
)
from .segmentation import (
    ClassProbabilities,
    DilatedKernel,
    SegmenterConfig,
    cross_entropy,
    dilated_conv,
    ingest_labelmap,
    kmeans_segment,
    pixel_accuracy,
    reference_segment,
)
from .registration import (
    DbscanParams,
    FrameInput,
    LayerSignatureMap,
    MPObservation,
    count_spatters,
    dbscan,
    ejection_angle,
    extract_mp_center,
    histogram,
    layer_aggregate,
    register_layer,
)
from .synth import (
    FlareSpec,
    GroundTruth,
    LayerSceneSpec,
    SceneSpec,
    synth_frame,
    synth_layer_sequence,
)
from .fpp import (
    FringeStack,
    HeightMap,
    PhaseMap,
    PhaseShiftSchedule,
    RoughnessResult,
    compute_sa,
    gamma_correct,
    phase_to_height,
    synth_fringes,
    unwrap_reference,
    wrap_phase,
)
from .analytics import (
    LayerFeatureRecord,
    LinearFit,
    PredictionMetrics,
    emit_report,
    linfit,
    prediction_metrics,
    regime_curve,
)
from .svr import (
    FEATURE_SETS,
    SvrHyperparams,
    SvrModel,
    compare_models,
    epsilon_loss,
    predict,
    train_svr,
)

__version__ = "0.1.0"
