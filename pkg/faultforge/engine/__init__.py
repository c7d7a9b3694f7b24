# Copyright (c), CommunityLogiq Software

from faultforge.engine.campaign import (
    CampaignResult,
    RangeProfile,
    ReplayReport,
    Session,
    SweepAxis,
    attach_monitor,
    get_scenario,
    harden_with_clipper,
    profile_ranges,
    replay,
    run_campaign,
    set_scenario,
    sweep,
)
from faultforge.engine.dataset import (
    DatasetHandle,
    Sample,
    batches,
    dataset_for_model,
    export_ground_truth_json,
    synthetic_classification_dataset,
    synthetic_detection_dataset,
)
from faultforge.engine.evaluation import (
    KpiReport,
    evaluate_results,
    iou,
    sde_due_classification,
    sde_due_detection,
    top_k,
    write_report,
)
from faultforge.engine.fault_gen import (
    FaultMatrix,
    NeuronFault,
    WeightFault,
    generate_fault_matrix,
    layer_selection_weights,
    load_fault_matrix,
    save_fault_matrix,
)
from faultforge.engine.injector import (
    CorruptedModel,
    FlipDirection,
    apply_neuron_faults,
    apply_weight_faults,
    flip_bit,
    make_fault_iterator,
)
from faultforge.engine.model_registry import (
    Model,
    builtin_model,
    builtin_models,
    enumerate_injectable_layers,
    load_model,
    register_layer_verifier,
    save_model,
)
from faultforge.engine.monitors import CountingMonitor, NanInfMonitor, RangeMonitor, detect_nan_inf
from faultforge.engine.scenario import (
    ScenarioConfig,
    num_faults_required,
    parse_scenario,
    save_scenario,
)
