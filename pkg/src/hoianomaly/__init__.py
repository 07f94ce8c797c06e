"""Interpretable anomaly detection over human-object interaction (HOI) vectors.

A PCA + Gaussian mixture normality model scores each frame by its least
likely HOI vector, and every detection is explained by the tested event, the
closest normal event and a saliency heatmap over the interpretable features.
"""
__version__ = "0.1.0"

from ._backend import BACKEND
from .detector import (FrameScore, NormalityModel, detect, fit_normality_model, frame_score,
                       hoi_anomaly_score, score_frames, smooth_scores)
from .evaluation import LabelSet, explanation_map, roc_auc
from .explain import Explanation, closest_normal, frame_explanation_scores, saliency_heatmap
from .gmm import EmConfig, GmmModel, bic, fit_em, log_mixture_density, select_components
from .hoi_model import (DEFAULT_LAYOUT, Block, BlockLayout, FrameRecord, HoiVector, ValidationError,
                        Vocabulary, block_of, flatten, unflatten)
from .pca import PcaModel, back_project, fit_pca, project
from .synth import ScenarioSpec, default_scenario, generate, generate_training
