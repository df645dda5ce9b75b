"""Loss arithmetic against hand-computed values."""

import numpy as np
import pytest
import torch

from fringegan import lsgan_losses, l1_loss, total_generator_loss, ShapeMismatchError

TOL = 1e-6

# mean |a - b| of the two (2, 3, 5, 7) uniform tensors drawn below from a
# generator seeded with 42, computed once with numpy in double precision
L1_FROZEN = 0.331207505294


def test_perfect_discriminator_has_zero_loss():
    d_real = torch.ones(1, 1, 6, 6)
    d_fake = torch.zeros(1, 1, 6, 6)
    loss_d, loss_g_adv = lsgan_losses(d_real, d_fake)
    assert float(loss_d) == 0.0
    assert abs(float(loss_g_adv) - 1.0) <= TOL


def test_halfway_scores_give_half_and_quarter():
    d = torch.full((1, 1, 6, 6), 0.5)
    loss_d, loss_g_adv = lsgan_losses(d, d.clone())
    assert abs(float(loss_d) - 0.5) <= TOL
    assert abs(float(loss_g_adv) - 0.25) <= TOL


@pytest.mark.parametrize("shape", [(1, 1, 3, 3), (1, 1, 30, 30), (2, 1, 13, 13)])
def test_constant_scores_independent_of_map_size(shape):
    loss_d, loss_g_adv = lsgan_losses(
        torch.full(shape, 0.5), torch.full(shape, 0.5)
    )
    assert abs(float(loss_d) - 0.5) <= TOL
    assert abs(float(loss_g_adv) - 0.25) <= TOL


def test_score_shape_mismatch_rejected():
    with pytest.raises(ShapeMismatchError):
        lsgan_losses(torch.zeros(1, 1, 6, 6), torch.zeros(1, 1, 5, 5))


def test_l1_identical_tensors_give_zero():
    a = torch.rand(2, 3, 8, 8)
    assert float(l1_loss(a, a.clone())) == 0.0


def test_l1_constant_offset_recovered():
    a = torch.rand(2, 3, 8, 8)
    assert abs(float(l1_loss(a, a + 0.1)) - 0.1) <= TOL


def test_l1_on_fixed_random_tensors_matches_frozen_value():
    g = torch.Generator().manual_seed(42)
    a = torch.rand((2, 3, 5, 7), generator=g)
    b = torch.rand((2, 3, 5, 7), generator=g)
    assert abs(float(l1_loss(a, b)) - L1_FROZEN) <= TOL
    # and the same arithmetic done independently in numpy
    oracle = np.mean(np.abs(a.numpy().astype(np.float64) - b.numpy().astype(np.float64)))
    assert abs(float(l1_loss(a, b)) - oracle) <= TOL


def test_l1_shape_mismatch_rejected():
    with pytest.raises(ShapeMismatchError):
        l1_loss(torch.zeros(2, 3, 4, 4), torch.zeros(2, 3, 4, 5))


def test_total_generator_loss_weighted_sum():
    total = total_generator_loss(torch.tensor(0.25), torch.tensor(0.1), 60.0)
    assert abs(float(total) - 6.25) <= TOL


def test_total_generator_loss_degenerate_weights():
    adv = torch.tensor(0.37)
    assert float(total_generator_loss(adv, torch.tensor(12.0), 0.0)) == pytest.approx(
        0.37, abs=TOL
    )
    assert float(total_generator_loss(adv, torch.tensor(0.0), 60.0)) == pytest.approx(
        0.37, abs=TOL
    )
