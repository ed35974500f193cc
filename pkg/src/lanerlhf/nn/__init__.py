from .adam import AdamState, adam_step
from .checkpoint import FORMAT_VERSION, CheckpointError, load_tensors, save_tensors
from .gradcheck import grad_check
from .layers import (
    glorot_uniform,
    linear_backward,
    linear_forward,
    linear_init,
    lstm_backward,
    lstm_forward,
    lstm_init,
    lstm_step_backward,
    lstm_step_forward,
    sigmoid,
)
from .losses import categorical_entropy, log_softmax, softmax, softmax_cross_entropy
from .params import Param, ParamSet
