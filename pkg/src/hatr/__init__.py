"""hatr: a desk-scale scene-text recognizer built from first principles.

A convolutional image encoder feeds a non-recurrent attention decoder
(teacher-forced training, beam-search inference), backed by a small
float64 autodiff tensor library with a compiled kernel core. Ships with a
synthetic word-image generator, a gradient verification suite, attention
map export, and a decoder speed benchmark against a recurrent baseline.
"""

__version__ = "0.1.0"

from .autodiff import Tape, Tensor, fd_check, no_grad

__all__ = ["Tape", "Tensor", "fd_check", "no_grad", "__version__"]
