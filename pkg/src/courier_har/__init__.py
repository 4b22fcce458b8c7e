"""IMU activity-recognition toolkit for courier delivery traces.

Masked-reconstruction pretraining of a small transformer encoder on
unlabeled 6-axis IMU windows, supervised fine-tuning with a GRU classifier,
rule-based weak labeling, trajectory segmentation, elevation-change
detection, and a synthetic scenario oracle for desk-scale verification.
"""

from .autodiff import Tensor, no_grad
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .finetune import FinetuneConfig, augment, finetune, predict
from .masking import MaskSpec, apply_mask, masked_mse, sample_mask
from .metrics import compute_metrics, label_fraction_study, scaling_run
from .model import ClassifierConfig, EncoderConfig, count_params
from .optim import Adam
from .pretrain import PretrainConfig, run_pretraining
from .sensorio import (ImuWindow, SensorRecord, make_windows, normalize,
                       parse_stream, synchronize_and_resample)
from .synth import ScenarioPlan, delivery_cycle_plan, generate, generate_corpus
from .trajectory import (Segment, TrajPoint, find_act_clusters, refine_gps,
                         segment_gps, segment_trajectory, smooth_acts,
                         time_of_stop)
from .weaklabel import elevation_label, merge_to_binary, riding_label

__version__ = "0.1.0"
