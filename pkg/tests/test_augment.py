import numpy as np
import pytest

from vidbank.configs import AugmentPolicy
from vidbank.data.augment import augment, center_crop
from vidbank.data.clips import VideoBlockSequence
from vidbank.errors import InvalidPolicy


def make_seq(rng, n=2, l=3, size=12):
    blocks = rng.random((n, l, size, size, 3), dtype=np.float32)
    return VideoBlockSequence(blocks=blocks, source_id="t",
                              frame_offsets=tuple(range(n * l)))


def test_identity_policy_returns_input():
    seq = make_seq(np.random.default_rng(0))
    out = augment(seq, AugmentPolicy(), seed=5)
    np.testing.assert_array_equal(out.blocks, seq.blocks)


def test_forced_flip_is_involution():
    seq = make_seq(np.random.default_rng(1))
    policy = AugmentPolicy(flip_p=1.0)
    twice = augment(augment(seq, policy, seed=3), policy, seed=4)
    np.testing.assert_array_equal(twice.blocks, seq.blocks)


def test_same_seed_is_bit_identical():
    seq = make_seq(np.random.default_rng(2))
    policy = AugmentPolicy(crop_size=8, flip_p=0.5, brightness=0.4,
                           contrast=0.4, saturation=0.4, greyscale_p=0.5)
    a = augment(seq, policy, seed=11)
    b = augment(seq, policy, seed=11)
    np.testing.assert_array_equal(a.blocks, b.blocks)


def test_different_seeds_differ():
    seq = make_seq(np.random.default_rng(2))
    policy = AugmentPolicy(crop_size=8, brightness=0.5)
    a = augment(seq, policy, seed=11)
    b = augment(seq, policy, seed=12)
    assert not np.array_equal(a.blocks, b.blocks)


def test_crop_is_clip_wise():
    # constant-per-frame values: every frame must be cropped identically
    rng = np.random.default_rng(4)
    seq = make_seq(rng, n=3, l=4, size=10)
    out = augment(seq, AugmentPolicy(crop_size=6), seed=0)
    assert out.blocks.shape == (3, 4, 6, 6, 3)
    flat_in = seq.blocks.reshape(12, 10, 10, 3)
    flat_out = out.blocks.reshape(12, 6, 6, 3)
    offsets = set()
    for f_in, f_out in zip(flat_in, flat_out):
        found = [(r, c) for r in range(5) for c in range(5)
                 if np.array_equal(f_in[r:r + 6, c:c + 6], f_out)]
        offsets.update(found)
    assert len(offsets) == 1


def test_greyscale_channels_equal():
    seq = make_seq(np.random.default_rng(5))
    out = augment(seq, AugmentPolicy(greyscale_p=1.0), seed=0)
    np.testing.assert_allclose(out.blocks[..., 0], out.blocks[..., 1], atol=1e-6)
    np.testing.assert_allclose(out.blocks[..., 1], out.blocks[..., 2], atol=1e-6)


def test_crop_larger_than_frame_rejected():
    seq = make_seq(np.random.default_rng(6))
    with pytest.raises(InvalidPolicy):
        augment(seq, AugmentPolicy(crop_size=64), seed=0)


def test_center_crop_takes_middle():
    frames = np.zeros((2, 8, 8, 3), dtype=np.float32)
    frames[:, 2:6, 2:6, :] = 1.0
    out = center_crop(frames, 4)
    assert out.shape == (2, 4, 4, 3)
    assert (out == 1.0).all()
