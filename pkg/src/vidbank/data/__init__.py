from .clips import VideoBlockSequence, partition_clip, sliding_window_starts
from .index import DatasetIndex, IndexEntry, load_clip_frames, load_index, save_index
from .flow import preprocess_flow
from .augment import augment, center_crop
from .synthetic import gen_synthetic, gen_glitch

__all__ = [
    "VideoBlockSequence",
    "partition_clip",
    "sliding_window_starts",
    "DatasetIndex",
    "IndexEntry",
    "load_clip_frames",
    "load_index",
    "save_index",
    "preprocess_flow",
    "augment",
    "center_crop",
    "gen_synthetic",
    "gen_glitch",
]
