"""From-scratch tensor ops, architecture, optimizer and training loop."""

from .gradcheck import GradCheckReport, grad_check, make_check_sample
from .network import (
    NetConfig,
    NetParams,
    apodization_forward,
    channel_ladder,
    cube_to_tensor,
    image_to_tensor,
    init_net_params,
    interpolation_forward,
    network_forward,
    network_loss_and_grads,
    param_count,
    tensor_to_image,
)
from .optim import AdamState, TrainConfig, adam_step, init_adam_state
from .training import EpochRecord, TrainingSet, normalize_pair, train

__all__ = [
    "GradCheckReport",
    "grad_check",
    "make_check_sample",
    "NetConfig",
    "NetParams",
    "apodization_forward",
    "channel_ladder",
    "cube_to_tensor",
    "image_to_tensor",
    "init_net_params",
    "interpolation_forward",
    "network_forward",
    "network_loss_and_grads",
    "param_count",
    "tensor_to_image",
    "AdamState",
    "TrainConfig",
    "adam_step",
    "init_adam_state",
    "EpochRecord",
    "TrainingSet",
    "normalize_pair",
    "train",
]
