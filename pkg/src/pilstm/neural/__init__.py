"""Hand-written LSTM, MLP and Adam on numpy, with checkpoint I/O."""

from pilstm.neural.adam import AdamState, adam_step
from pilstm.neural.checkpoint import load_checkpoint, save_checkpoint
from pilstm.neural.lstm import (
    ForwardTape,
    LstmParams,
    LstmState,
    backward_sequence,
    forward_sequence,
    lstm_backward,
    lstm_forward,
    lstm_step,
)
from pilstm.neural.mlp import MlpParams, mlp_backward, mlp_forward
from pilstm.neural.model import SequenceModel, forward_multi

__all__ = [
    "AdamState", "ForwardTape", "LstmParams", "LstmState", "MlpParams", "SequenceModel",
    "adam_step", "backward_sequence", "forward_multi", "forward_sequence", "load_checkpoint",
    "lstm_backward", "lstm_forward", "lstm_step", "mlp_backward", "mlp_forward", "save_checkpoint",
]
