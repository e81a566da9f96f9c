"""GAN-based image synthesis for data augmentation, built on a small numpy autodiff engine."""

__version__ = "0.1.0"
