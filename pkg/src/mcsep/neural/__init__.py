from .attention import AttentionState, attention_fuse
from .layers import blstm_layer
from .losses import (
    PermutationResult,
    dc_loss,
    dc_loss_dense,
    dl_loss,
    joint_loss,
    upit_psm_loss,
)
from .model import (
    ForwardOutput,
    Targets,
    TrainConfig,
    forward_full,
    init_params,
    loss_and_grad,
    make_targets,
)
from .train import Adam, Example, grad_check, load_checkpoint, save_checkpoint, train_epoch
