"""Fine-scale soil mapping at desk scale.

Submodules
----------
raster / observations / synthetic
    Data model: covariate stacks, point observations, region partitions,
    and the deterministic synthetic study region.
splits
    Random and spatial-holdout cross-validation designs.
encoder / implicit / model / losses / train
    The dual-encoder implicit-function network, its objectives, and the
    pretrain/finetune/predict loops.
forest
    Random-forest baseline (compiled kernels with a numpy fallback).
mosaic
    Overlapping-tile regional inference with Gaussian blending.
metrics
    Evaluation metrics, probability histograms, regional analyses,
    report emission.
cli
    Command-line pipeline: synth, split, pretrain, finetune, train-rf,
    predict, evaluate, report.
"""

__version__ = "0.1.0"
