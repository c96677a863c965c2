"""Ocular texture toolkit: predict binary soft attributes (gender-like,
race-like) from near-infrared eye images with learned binary statistical
filters, local binary patterns, or local phase quantization, pooled into
cell histograms and classified by a linear SVM under subject-disjoint
evaluation protocols."""

from .align import AlignParams, InsufficientBorder, OcularGeometry, Region, align_ocular, apply_region
from .dataset import (
    ATTRIBUTE_CLASSES,
    DatasetManifest,
    ManifestError,
    SampleRecord,
    filter_records,
    load_manifest,
    save_manifest,
)
from .descriptors import (
    Bsif,
    FilterBank,
    IcaConvergenceError,
    Lbp,
    Lpq,
    bsif_code_image,
    default_bank,
    descriptor_from_name,
    lbp_code_image,
    learn_filters,
    load_bank,
    lpq_code_image,
    save_bank,
)
from .experiments import (
    BlurSweepResult,
    EvalReport,
    ExperimentResult,
    SplitPlan,
    blur_experiment,
    cross_dataset_eval,
    make_splits,
    run_experiment,
    stratified_report,
    subgroup_experiment,
)
from .features import FeatureVector, extract_features, load_features, save_features, tessellate_histograms
from .image import (
    BlurConfig,
    PgmFormatError,
    gaussian_blur,
    load_pgm,
    resize_bicubic,
    write_pgm,
)
from .svm import SvmConfig, SvmModel, load_model, predict, save_model, train_svm
from .synth import SynthSpec, TextureParams, generate

__version__ = "0.1.0"
