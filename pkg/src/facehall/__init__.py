"""Context-patch face hallucination library.

Reconstructs high-resolution face images from low-resolution inputs using an
aligned training corpus. Each low-resolution patch is represented as a
sum-to-one combination of its K nearest context patches (training patches
drawn from a window around the patch position), and the combination predicts
the missing high-frequency detail. An optional reproducing-learning loop
feeds the current estimate back into the training set.
"""

from facehall.imagecore import (
    ImageFormatError,
    bicubic_upscale,
    degrade,
    load_image,
    rgb_to_yuv,
    save_image,
    yuv_to_rgb,
)
from facehall.metrics import QualityReport, evaluate, psnr, ssim
from facehall.patches import (
    ContextCandidateSet,
    FeatureVector,
    PatchGeometry,
    PatchIndex,
    assemble,
    candidate_count,
    enumerate_grid,
    gather_candidates,
    make_hr_residual,
    make_lr_feature,
)
from facehall.pipeline import (
    HallucinationConfig,
    TrainingCorpus,
    hallucinate,
    hallucinate_color,
    hallucinate_once,
    prepare_corpus,
)
from facehall.synth import synth_faces
from facehall.tlcr import (
    DegenerateSolutionError,
    RepresentationWeights,
    SolverConfig,
    contribution_ratio,
    predict_hr_patch,
    select_knn,
    solve_weights,
    solve_weights_full,
)

__version__ = "0.1.0"

__all__ = [
    "ImageFormatError",
    "bicubic_upscale",
    "degrade",
    "load_image",
    "rgb_to_yuv",
    "save_image",
    "yuv_to_rgb",
    "QualityReport",
    "evaluate",
    "psnr",
    "ssim",
    "ContextCandidateSet",
    "FeatureVector",
    "PatchGeometry",
    "PatchIndex",
    "assemble",
    "candidate_count",
    "enumerate_grid",
    "gather_candidates",
    "make_hr_residual",
    "make_lr_feature",
    "HallucinationConfig",
    "TrainingCorpus",
    "hallucinate",
    "hallucinate_color",
    "hallucinate_once",
    "prepare_corpus",
    "synth_faces",
    "DegenerateSolutionError",
    "RepresentationWeights",
    "SolverConfig",
    "contribution_ratio",
    "predict_hr_patch",
    "select_knn",
    "solve_weights",
    "solve_weights_full",
]
