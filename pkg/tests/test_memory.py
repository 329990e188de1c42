import math

import numpy as np
import pytest
import torch

from vidbank.errors import DimensionMismatch, TooFewBlocks, ZeroVector
from vidbank.models.convgru import ConvGRUCell, aggregate_sequence
from vidbank.models.memory import (
    FuturePredictor,
    MemoryBank,
    address,
    bidirectional_predict,
    critic,
    expect_future,
    predict_sequence,
)


def constant_logit_predictor(channels, logits):
    """Predictor whose output is the given constant logit vector everywhere."""
    pred = FuturePredictor(channels, k=len(logits))
    with torch.no_grad():
        pred.conv1.weight.zero_()
        pred.conv1.bias.zero_()
        pred.conv2.weight.zero_()
        pred.conv2.bias.copy_(torch.tensor(logits, dtype=pred.conv2.bias.dtype))
    return pred


def test_zero_logits_give_uniform_distribution():
    torch.manual_seed(0)
    pred = constant_logit_predictor(4, [0.0] * 8)
    p = address(torch.randn(2, 4, 3, 3), pred)
    torch.testing.assert_close(p, torch.full((2, 8, 3, 3), 1 / 8))


def test_hand_computed_two_slot_distribution():
    pred = constant_logit_predictor(4, [math.log(2.0), 0.0])
    p = address(torch.randn(1, 4, 2, 2), pred)
    torch.testing.assert_close(p[:, 0], torch.full((1, 2, 2), 2 / 3))
    torch.testing.assert_close(p[:, 1], torch.full((1, 2, 2), 1 / 3))


def test_logit_shift_invariance():
    torch.manual_seed(1)
    context = torch.randn(1, 4, 2, 2)
    pred = FuturePredictor(4, k=6)
    p1 = address(context, pred)
    with torch.no_grad():
        pred.conv2.bias += 3.7       # same constant added to every slot
    p2 = address(context, pred)
    torch.testing.assert_close(p1, p2)


def test_distributions_sum_to_one():
    torch.manual_seed(2)
    pred = FuturePredictor(5, k=16)
    p = address(torch.randn(3, 5, 4, 4), pred)
    assert (p >= 0).all()
    torch.testing.assert_close(p.sum(dim=1), torch.ones(3, 4, 4),
                               atol=1e-6, rtol=0)


def test_one_hot_addressing_returns_memory_row():
    torch.manual_seed(3)
    bank = MemoryBank(k=5, channels=7)
    p = torch.zeros(1, 5, 2, 2)
    p[:, 3] = 1.0
    z_hat = expect_future(p, bank)
    for i in range(2):
        for j in range(2):
            torch.testing.assert_close(z_hat[0, :, i, j], bank.M[3])


def test_equal_mixture_of_basis_rows():
    bank = MemoryBank(k=2, channels=4)
    with torch.no_grad():
        bank.M.zero_()
        bank.M[0, 0] = 1.0
        bank.M[1, 1] = 1.0
    p = torch.full((1, 2, 1, 1), 0.5)
    z_hat = expect_future(p, bank)
    torch.testing.assert_close(z_hat[0, :, 0, 0],
                               torch.tensor([0.5, 0.5, 0.0, 0.0]))


def test_expectation_matches_bruteforce_loop():
    torch.manual_seed(4)
    bank = MemoryBank(k=8, channels=4).double()
    p = torch.rand(2, 8, 3, 3, dtype=torch.float64)
    p = p / p.sum(dim=1, keepdim=True)
    z_hat = expect_future(p, bank)
    for b in range(2):
        for h in range(3):
            for w in range(3):
                ref = sum(p[b, i, h, w] * bank.M[i] for i in range(8))
                assert (z_hat[b, :, h, w] - ref).abs().max() < 1e-12


def test_slot_count_mismatch_rejected():
    bank = MemoryBank(k=4, channels=3)
    with pytest.raises(DimensionMismatch):
        expect_future(torch.rand(1, 5, 2, 2), bank)


def test_critic_orthogonal_vectors_score_zero():
    a = torch.zeros(1, 4, 1, 1)
    b = torch.zeros(1, 4, 1, 1)
    a[0, 0] = 1.0
    b[0, 1] = 1.0
    assert critic(a, b).item() == 0.0


def test_critic_linearity_identity():
    # score of the expected future equals the probability-weighted sum of
    # per-slot scores, checked against an explicit double loop
    torch.manual_seed(5)
    k, c = 16, 8
    bank = MemoryBank(k=k, channels=c).double()
    p = torch.rand(1, k, 2, 2, dtype=torch.float64)
    p = p / p.sum(dim=1, keepdim=True)
    z = torch.randn(1, c, 2, 2, dtype=torch.float64)
    lhs = critic(expect_future(p, bank), z)
    rows = bank.M.detach()
    for h in range(2):
        for w in range(2):
            rhs = 0.0
            for i in range(k):
                dot = 0.0
                for ch in range(c):
                    dot += float(rows[i, ch]) * float(z[0, ch, h, w])
                rhs += float(p[0, i, h, w]) * dot
            assert abs(float(lhs[0, h, w]) - rhs) < 1e-10


def test_normalized_critic_bounded():
    torch.manual_seed(6)
    a = torch.randn(4, 8, 3, 3)
    b = torch.randn(4, 8, 3, 3)
    scores = critic(a, b, normalized=True)
    assert (scores <= 1.0 + 1e-6).all() and (scores >= -1.0 - 1e-6).all()


def test_normalized_critic_zero_vector_rejected():
    a = torch.zeros(1, 4, 1, 1)
    b = torch.ones(1, 4, 1, 1)
    with pytest.raises(ZeroVector):
        critic(a, b, normalized=True)


def _tiny_parts(seed=7, channels=6, k=5, dtype=torch.float64):
    torch.manual_seed(seed)
    cell = ConvGRUCell(channels).to(dtype)
    pred = FuturePredictor(channels, k).to(dtype)
    bank = MemoryBank(k, channels).to(dtype)
    zs = [torch.randn(2, channels, 3, 3, dtype=dtype) for _ in range(5)]
    return cell, pred, bank, zs


def test_predict_zero_steps_is_empty():
    cell, pred, bank, zs = _tiny_parts()
    assert predict_sequence(zs, 0, cell, pred, bank) == []


def test_predict_one_step_composition():
    cell, pred, bank, zs = _tiny_parts()
    out = predict_sequence(zs, 1, cell, pred, bank)
    expected = expect_future(address(aggregate_sequence(cell, zs), pred), bank)
    torch.testing.assert_close(out[0], expected)


def test_predict_three_steps_matches_unrolled_reference():
    cell, pred, bank, zs = _tiny_parts()
    out = predict_sequence(zs, 3, cell, pred, bank)
    # independently written unrolled loop
    hidden = None
    for z in zs:
        hidden = cell(z, hidden)
    reference = []
    for _ in range(3):
        p = torch.softmax(pred(hidden), dim=1)
        z_hat = torch.einsum("bkhw,kc->bchw", p, bank.M)
        hidden = cell(z_hat, hidden)
        reference.append(z_hat)
    for got, want in zip(out, reference):
        assert (got - want).abs().max() < 1e-10


def test_convex_hull_norm_bound():
    torch.manual_seed(8)
    bank = MemoryBank(k=12, channels=6).double()
    max_row = torch.linalg.vector_norm(bank.M, dim=1).max()
    pred = FuturePredictor(6, 12).double()
    for _ in range(50):
        context = torch.randn(1, 6, 4, 4, dtype=torch.float64)
        z_hat = expect_future(address(context, pred), bank)
        norms = torch.linalg.vector_norm(z_hat, dim=1)
        assert (norms <= max_row + 1e-9).all()


def test_bidirectional_index_arithmetic():
    cell_f, pred, bank, _ = _tiny_parts(seed=9)
    torch.manual_seed(10)
    cell_b = ConvGRUCell(6).double()
    zs = [torch.randn(1, 6, 2, 2, dtype=torch.float64) for _ in range(8)]
    (f_pred, f_tgt), (b_pred, b_tgt) = bidirectional_predict(
        zs, 3, cell_f, cell_b, pred, bank)
    assert len(f_pred) == len(b_pred) == 3
    for i in range(3):
        assert f_tgt[i] is zs[5 + i]          # forward targets: z6, z7, z8
        assert b_tgt[i] is zs[2 - i]          # backward targets: z3, z2, z1
    fwd_ctx = predict_sequence(zs[:5], 3, cell_f, pred, bank)
    for got, want in zip(f_pred, fwd_ctx):
        torch.testing.assert_close(got, want)


def test_bidirectional_tied_params_swap_under_reversal():
    cell_f, pred, bank, _ = _tiny_parts(seed=11)
    cell_b = ConvGRUCell(6).double()
    cell_b.load_state_dict(cell_f.state_dict())
    zs = [torch.randn(1, 6, 2, 2, dtype=torch.float64) for _ in range(6)]
    fwd, bwd = bidirectional_predict(zs, 2, cell_f, cell_b, pred, bank)
    fwd_r, bwd_r = bidirectional_predict(list(reversed(zs)), 2, cell_f,
                                         cell_b, pred, bank)
    # reversing time swaps the role of the two directions exactly
    for a, b in zip(fwd[0], bwd_r[0]):
        torch.testing.assert_close(a, b)
    for a, b in zip(bwd[0], fwd_r[0]):
        torch.testing.assert_close(a, b)
    for a, b in zip(fwd[1], bwd_r[1]):
        torch.testing.assert_close(a, b)


def test_bidirectional_zero_steps_empty():
    cell_f, pred, bank, zs = _tiny_parts(seed=12)
    cell_b = ConvGRUCell(6).double()
    (f_pred, f_tgt), (b_pred, b_tgt) = bidirectional_predict(
        zs, 0, cell_f, cell_b, pred, bank)
    assert f_pred == [] and f_tgt == [] and b_pred == [] and b_tgt == []


def test_too_few_blocks_rejected():
    cell_f, pred, bank, zs = _tiny_parts(seed=13)
    cell_b = ConvGRUCell(6).double()
    with pytest.raises(TooFewBlocks):
        bidirectional_predict(zs[:3], 3, cell_f, cell_b, pred, bank)


def test_slot_permutation_equivariance():
    torch.manual_seed(14)
    k, c = 6, 4
    bank = MemoryBank(k, c).double()
    pred = FuturePredictor(c, k).double()
    context = torch.randn(2, c, 3, 3, dtype=torch.float64)
    z_hat = expect_future(address(context, pred), bank)

    perm = torch.randperm(k)
    bank_p = MemoryBank(k, c).double()
    pred_p = FuturePredictor(c, k).double()
    pred_p.load_state_dict(pred.state_dict())
    with torch.no_grad():
        bank_p.M.copy_(bank.M[perm])
        pred_p.conv2.weight.copy_(pred.conv2.weight[perm])
        pred_p.conv2.bias.copy_(pred.conv2.bias[perm])
    z_hat_p = expect_future(address(context, pred_p), bank_p)
    assert (z_hat - z_hat_p).abs().max() < 1e-10


def test_addressed_memory_rows_receive_gradient():
    torch.manual_seed(15)
    bank = MemoryBank(k=7, channels=5)
    pred = FuturePredictor(5, 7)
    context = torch.randn(2, 5, 2, 2)
    p = address(context, pred)
    assert (p > 0).all()           # softmax never reaches exact zero
    target = torch.randn(2, 5, 2, 2)
    loss = ((expect_future(p, bank) - target) ** 2).sum()
    loss.backward()
    row_grads = torch.linalg.vector_norm(bank.M.grad, dim=1)
    assert (row_grads > 0).all()
