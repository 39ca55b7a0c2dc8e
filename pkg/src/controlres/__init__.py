"""controlres: controllable image restoration on a desk-scale CPU stack.

A two-branch convolutional network whose latent features are blended per
channel by coefficients learned from a single control scalar, letting one
trained model sweep continuously between two restoration objectives at test
time. Ships with its own autodiff engine, degradation synthesizers, the
two-step training protocol, sweep/ablation evaluation, bit-exact
checkpoints, a CLI and an HTTP service.
"""

from .tensor import Tensor, backward, no_grad, conv2d, fully_connected, relu, \
    leaky_relu, pixel_shuffle, pixel_unshuffle, NumericsError
from .optim import Adam
from .model import ModelConfig, CfsModel, build_model, forward, forward_sa, \
    forward_main, map_control, couple, restore_image, dni_interpolate, \
    export_coefficients, param_checksum, ConfigError
from .degrade import DegradationSpec, PatchSet, add_awgn, jpeg_degrade, \
    bicubic_resize, gaussian_blur, extract_patches, build_pairs, \
    make_texture, make_texture_set, read_image, write_image, load_images
from .train import LossConfig, TrainRun, Critic, pixel_loss, wgan_gp_losses, \
    train_step1, train_step2, TrainingDiverged, build_critic, critic_forward
from .evaluate import fidelity, SweepReport, sweep_alpha, sweep_dni, \
    compare_methods, grid_unimodal
from .checkpoint import save_checkpoint, load_checkpoint, CheckpointError

__version__ = "0.1.0"
