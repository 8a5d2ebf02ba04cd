from .checkpoint import CheckpointError, load_container, save_container
from .gradcheck import GradCheckReport, check_configurations, grad_check, numerical_gradient, relative_error
from .layers import (BatchNorm, Conv1D, Conv1DTranspose, Dense, Flatten, Layer, LeakyReLU, ReLU,
                     Reshape, Sequential, ShapeError, Sigmoid, Tanh, recalibrate_batchnorm)
from .optim import AdamState, adam_step
from .recurrent import BLSTM, GRU, LSTM, GRUCell, LSTMCell, gru_cell_step
