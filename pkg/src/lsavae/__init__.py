"""Latent-space stationarization of multivariate time series.

Additive decomposition, differencing and ADF unit-root testing; a small
numpy neural kernel; a convolutional (V)AE whose latent series is split
into seasonal, trend and stationary parts and recombined with adjustable
weights; and four forecasters for judging the recombined latents.
"""
from .decompose import (DecompositionResult, centered_moving_average, decompose_additive, estimate_period,
                        seasonal_profile)
from .ingest import CsvSchema, SchemaError, builtin_schemas, load_csv, write_csv
from .pipeline import RunConfig, fit_pipeline, stage_seeds, stationarize_frame
from .predictors import (KINDS, PredictorConfig, SweepResult, build_predictor, evaluate_rmse, run_sweep,
                         train_predictor)
from .series import (Frame, ScalerParams, Series, apply_scale, difference, fit_scale, inverse_difference,
                     invert_scale, make_windows)
from .stationarizer import (LatentDecomposition, LSAConfig, SeasonalStore, build_seasonal_store, recombine,
                            snap_seasonal, stationarization_loss, stationarize)
from .unitroot import AdfReport, adf_pvalue, adf_statistic, adf_test, critical_values, ols
from .vae import (TrainHistory, Vae, VaeConfig, build_vae, load_checkpoint, save_checkpoint, train_phase1,
                  train_phase2)

__version__ = "0.1.0"
