import numpy as np
import pytest

from vidbank.data.clips import loop_pad, partition_clip, sliding_window_starts
from vidbank.errors import InsufficientFrames

from conftest import random_frames


def frames_with_index(t, size=8):
    """Frame t carries the constant value t, so sampling is traceable."""
    out = np.zeros((t, size, size, 3), dtype=np.float32)
    out += np.arange(t, dtype=np.float32)[:, None, None, None]
    return out


def test_40_frames_make_8_blocks_of_5():
    seq = partition_clip(frames_with_index(40), num_blocks=8, block_len=5, stride=1)
    assert seq.blocks.shape == (8, 5, 8, 8, 3)
    assert seq.num_blocks == 8 and seq.block_len == 5


def test_single_block_is_identity():
    frames = random_frames(np.random.default_rng(0), t=5, size=8)
    seq = partition_clip(frames, num_blocks=1, block_len=5, stride=1)
    np.testing.assert_array_equal(seq.blocks[0], frames)


def test_stride_3_index_arithmetic():
    seq = partition_clip(frames_with_index(120), num_blocks=8, block_len=5, stride=3)
    # block b, position l reads frame (b*5 + l) * 3
    assert [int(v) for v in seq.blocks[0, :, 0, 0, 0]] == [0, 3, 6, 9, 12]
    assert [int(v) for v in seq.blocks[7, :, 0, 0, 0]] == [105, 108, 111, 114, 117]
    assert seq.frame_offsets[:5] == (0, 3, 6, 9, 12)
    assert seq.frame_offsets[-1] == 117


def test_partition_is_lossless_at_stride_1():
    frames = random_frames(np.random.default_rng(1), t=24, size=8)
    seq = partition_clip(frames, num_blocks=4, block_len=6, stride=1)
    recovered = seq.blocks.reshape(24, 8, 8, 3)
    np.testing.assert_array_equal(recovered, frames)


def test_start_offset_shifts_all_indices():
    seq = partition_clip(frames_with_index(30), num_blocks=2, block_len=3,
                         stride=2, start=4)
    assert seq.frame_offsets == (4, 6, 8, 10, 12, 14)


def test_insufficient_frames_rejected():
    with pytest.raises(InsufficientFrames):
        partition_clip(frames_with_index(39), num_blocks=8, block_len=5, stride=1)
    with pytest.raises(InsufficientFrames):
        partition_clip(frames_with_index(100), num_blocks=8, block_len=5, stride=3)


def test_sliding_window_starts():
    assert sliding_window_starts(44, 8, 5, 1, hop=5) == [0]
    assert sliding_window_starts(50, 8, 5, 1, hop=5) == [0, 5, 10]
    assert sliding_window_starts(39, 8, 5, 1) == []


def test_loop_pad_repeats_frames():
    frames = frames_with_index(6)
    padded = loop_pad(frames, 15)
    assert padded.shape[0] == 15
    np.testing.assert_array_equal(padded[6], frames[0])
    np.testing.assert_array_equal(padded[13], frames[1])
