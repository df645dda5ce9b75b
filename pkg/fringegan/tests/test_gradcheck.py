"""Analytic gradients of the generator objective versus finite differences.

The objective is differentiated with respect to the generator OUTPUT (the
candidate patch), not the weights: that is the quantity both loss terms act
on directly, so it isolates the loss arithmetic from the architecture.
Everything runs in double precision so the finite-difference error budget
is dominated by the step size, not rounding.
"""

import torch
from torch import nn

from fringegan import lsgan_losses, l1_loss, total_generator_loss

REL_TOL = 1e-4


def _toy_setup(seed):
    torch.manual_seed(seed)
    x_in = (torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1)
    target = (torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1)
    disc = nn.Sequential(
        nn.Conv2d(6, 4, 3, padding=1),
        nn.LeakyReLU(0.2),
        nn.Conv2d(4, 1, 3, padding=1),
    ).double()
    for p in disc.parameters():
        p.requires_grad_(False)
    return x_in, target, disc


def _objective(gen_out, x_in, target, disc, lambda_l1):
    scores = disc(torch.cat([x_in, gen_out], dim=1))
    _, adv = lsgan_losses(torch.ones_like(scores), scores)
    return total_generator_loss(adv, l1_loss(gen_out, target), lambda_l1)


def _check(lambda_l1, seed):
    x_in, target, disc = _toy_setup(seed)
    gen_out = (torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1).requires_grad_(True)

    obj = _objective(gen_out, x_in, target, disc, lambda_l1)
    obj.backward()
    analytic = gen_out.grad.detach().clone()

    h = 1e-6
    numeric = torch.zeros_like(analytic)
    with torch.no_grad():
        flat = gen_out.detach().reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.numel()):
            orig = float(flat[i])
            flat[i] = orig + h
            up = float(_objective(gen_out.detach(), x_in, target, disc, lambda_l1))
            flat[i] = orig - h
            down = float(_objective(gen_out.detach(), x_in, target, disc, lambda_l1))
            flat[i] = orig
            num_flat[i] = (up - down) / (2 * h)

    norm_ratio = float(torch.norm(analytic - numeric) / torch.norm(numeric))
    elementwise = float(
        torch.max(torch.abs(analytic - numeric) / torch.clamp(torch.abs(numeric), min=1e-8))
    )
    print(f"gradient check (lambda={lambda_l1}): norm ratio {norm_ratio:.3e}, "
          f"worst element {elementwise:.3e} (bound {REL_TOL})")
    assert norm_ratio <= REL_TOL
    assert elementwise <= REL_TOL


def test_gradient_of_full_objective_matches_finite_differences():
    _check(lambda_l1=60.0, seed=3)


def test_gradient_of_pure_adversarial_objective_matches_finite_differences():
    _check(lambda_l1=0.0, seed=4)
