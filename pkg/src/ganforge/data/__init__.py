from .dataset import Dataset, concat, load_cache, save_cache
from .loader import ImageDecodeError, decode_image, load_image_dir
from .resize import cubic_kernel, resize_bicubic
from .split import SplitSpec, split, split_indices
from .toys import synth_glyphs, synth_lungfields

__all__ = [
    "Dataset",
    "ImageDecodeError",
    "SplitSpec",
    "concat",
    "cubic_kernel",
    "decode_image",
    "load_cache",
    "load_image_dir",
    "resize_bicubic",
    "save_cache",
    "split",
    "split_indices",
    "synth_glyphs",
    "synth_lungfields",
]
