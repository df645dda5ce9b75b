"""Least-squares adversarial and reconstruction losses.

The discriminator is trained to score real pairs toward 1 and generated
pairs toward 0; the generator is trained to push its pairs toward 1.  Using
squared distance to those targets instead of a sigmoid cross entropy keeps
gradients informative even when the discriminator is confident.
"""

import torch

from .errors import ShapeMismatchError


def lsgan_losses(d_real, d_fake):
    """Return ``(loss_d, loss_g_adv)`` for one batch of patch scores.

    loss_d     = mean((d_real - 1)^2) + mean(d_fake^2)
    loss_g_adv = mean((d_fake - 1)^2)

    Both inputs are raw (unbounded) discriminator outputs of identical
    shape; any shape works because only the mean over all elements enters.
    """
    if d_real.shape != d_fake.shape:
        raise ShapeMismatchError(
            f"score shapes differ: {tuple(d_real.shape)} vs {tuple(d_fake.shape)}"
        )
    loss_d = torch.mean((d_real - 1.0) ** 2) + torch.mean(d_fake ** 2)
    loss_g_adv = torch.mean((d_fake - 1.0) ** 2)
    return loss_d, loss_g_adv


def l1_loss(prediction, target):
    """Mean absolute error over every element of two same-shaped tensors."""
    if prediction.shape != target.shape:
        raise ShapeMismatchError(
            f"tensor shapes differ: {tuple(prediction.shape)} vs {tuple(target.shape)}"
        )
    return torch.mean(torch.abs(prediction - target))


def total_generator_loss(loss_g_adv, loss_l1, lambda_l1):
    """Weighted generator objective ``loss_g_adv + lambda_l1 * loss_l1``."""
    return loss_g_adv + lambda_l1 * loss_l1
