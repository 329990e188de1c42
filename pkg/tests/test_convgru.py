import pytest
import torch

from vidbank.errors import EmptySequence, ShapeMismatch
from vidbank.models.convgru import ConvGRUCell, aggregate_sequence


def make_cell(channels=6, seed=0):
    torch.manual_seed(seed)
    return ConvGRUCell(channels)


def test_output_shape_matches_input():
    cell = make_cell()
    z = torch.randn(2, 6, 4, 4)
    out = cell(z, None)
    assert out.shape == z.shape


def test_spatially_constant_input_gives_constant_output():
    cell = make_cell()
    z = torch.ones(1, 6, 4, 4) * torch.randn(1, 6, 1, 1)
    h = torch.ones(1, 6, 4, 4) * torch.randn(1, 6, 1, 1)
    out = cell(z, h)
    ref = out[..., 0, 0]
    for i in range(4):
        for j in range(4):
            torch.testing.assert_close(out[..., i, j], ref)


def test_one_by_one_kernel_locality():
    # perturbing one position leaves all others bit-identical
    cell = make_cell(seed=1)
    z = torch.randn(1, 6, 4, 4)
    h = torch.randn(1, 6, 4, 4)
    base = cell(z, h)
    z2 = z.clone()
    z2[0, :, 2, 3] += 1.0
    out = cell(z2, h)
    mask = torch.ones(4, 4, dtype=torch.bool)
    mask[2, 3] = False
    assert torch.equal(base[0][:, mask], out[0][:, mask])
    assert not torch.equal(base[0][:, 2, 3], out[0][:, 2, 3])


def test_fold_base_case_is_single_step():
    cell = make_cell(seed=2)
    z = torch.randn(2, 6, 3, 3)
    torch.testing.assert_close(aggregate_sequence(cell, [z]), cell(z, None))


def test_fold_equals_manual_unroll():
    cell = make_cell(seed=3)
    zs = [torch.randn(2, 6, 3, 3) for _ in range(5)]
    hidden = None
    for z in zs:
        hidden = cell(z, hidden)
    torch.testing.assert_close(aggregate_sequence(cell, zs), hidden)


def test_order_matters_for_generic_inputs():
    cell = make_cell(seed=4)
    zs = [torch.randn(1, 6, 2, 2) for _ in range(4)]
    forward = aggregate_sequence(cell, zs)
    backward = aggregate_sequence(cell, list(reversed(zs)))
    assert not torch.allclose(forward, backward)


def test_empty_sequence_rejected():
    cell = make_cell()
    with pytest.raises(EmptySequence):
        aggregate_sequence(cell, [])


def test_shape_mismatch_rejected():
    cell = make_cell()
    with pytest.raises(ShapeMismatch):
        cell(torch.randn(1, 4, 3, 3), None)          # wrong channels
    with pytest.raises(ShapeMismatch):
        cell(torch.randn(1, 6, 3, 3), torch.randn(1, 6, 2, 2))


def test_zero_gate_biases_at_init():
    cell = make_cell(seed=5)
    for conv in (cell.reset_gate, cell.update_gate, cell.candidate):
        assert torch.equal(conv.bias, torch.zeros_like(conv.bias))
