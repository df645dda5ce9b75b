"""Adversarial training loop.

One step processes one pair: the discriminator is updated on the current
real pair and on a generated pair drawn through the history buffer, then
the generator is updated on its adversarial score plus the weighted mean
absolute error to the target.  Everything random (weight init, pair order,
buffer draws) is derived from the seed in TrainConfig, so two runs with the
same seed produce identical loss curves.
"""

import csv
import math
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np
import torch

from .buffer import HistoryBuffer
from .data import PatchFolder
from .errors import InvalidConfigError, TrainingDivergedError
from .losses import lsgan_losses, l1_loss, total_generator_loss
from .networks import (
    GeneratorConfig,
    DiscriminatorConfig,
    FusionGenerator,
    PatchDiscriminator,
)

INPUT_RANGE = "[-1,1]"


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings.

    The learning rate holds at lr for the first half of the run and then
    decays linearly to zero.  steps overrides epochs when set; otherwise
    the run length is epochs passes over the dataset.  Batch size is fixed
    at one pair per step.
    """

    lambda_l1: float = 60.0
    epochs: int = 200
    steps: int | None = None
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    buffer_capacity: int = 64
    buffer_current_probability: float = 0.5
    seed: int = 0
    mode: str = "ac"
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.lambda_l1 < 0:
            raise InvalidConfigError("lambda_l1 must be nonnegative")
        if self.lr <= 0:
            raise InvalidConfigError("lr must be positive")
        if self.epochs < 1:
            raise InvalidConfigError("epochs must be at least 1")
        if self.steps is not None and self.steps < 1:
            raise InvalidConfigError("steps must be at least 1 when given")
        if self.checkpoint_every < 0:
            raise InvalidConfigError("checkpoint_every must be nonnegative")


@dataclass
class TrainResult:
    generator: FusionGenerator
    discriminator: PatchDiscriminator
    checkpoint_path: Path
    loss_csv_path: Path
    rows: list = field(default_factory=list)


def lr_factor(step, total):
    """Schedule multiplier: 1 for the first half, then linear decay to 0."""
    half = total / 2.0
    if step < half:
        return 1.0
    return (total - step) / (total - half)


def _checkpoint_payload(generator, discriminator, cfg, manifest, step):
    return {
        "generator_state": generator.state_dict(),
        "discriminator_state": discriminator.state_dict(),
        "generator_config": asdict(generator.config),
        "discriminator_config": asdict(discriminator.config),
        "train_config": asdict(cfg),
        "input_range": INPUT_RANGE,
        "scales": {
            "patch_size": manifest["patch_size"],
            "input_scale": manifest.get("input_scale"),
            "mua_max": manifest["mua_max"],
            "musp_max": manifest["musp_max"],
        },
        "step": step,
    }


def train(dataset_root, out_dir, gen_cfg=None, disc_cfg=None, cfg=None):
    """Train on one mode of a dataset and write checkpoint plus loss CSV.

    Writes <out_dir>/checkpoint.pt and <out_dir>/losses.csv (columns step,
    lr, loss_d, loss_g_adv, loss_l1, loss_g).  If any loss goes non-finite
    the full state is dumped to <out_dir>/diverged.pt and
    TrainingDivergedError is raised.
    """
    gen_cfg = gen_cfg if gen_cfg is not None else GeneratorConfig()
    disc_cfg = disc_cfg if disc_cfg is not None else DiscriminatorConfig()
    cfg = cfg if cfg is not None else TrainConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    dataset = PatchFolder(dataset_root, cfg.mode)
    total = cfg.steps if cfg.steps is not None else cfg.epochs * len(dataset)

    torch.manual_seed(cfg.seed)
    generator = FusionGenerator(gen_cfg)
    discriminator = PatchDiscriminator(disc_cfg)
    opt_g = torch.optim.Adam(generator.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    sched_g = torch.optim.lr_scheduler.LambdaLR(opt_g, lambda s: lr_factor(s, total))
    sched_d = torch.optim.lr_scheduler.LambdaLR(opt_d, lambda s: lr_factor(s, total))
    buffer = HistoryBuffer(
        cfg.buffer_capacity, seed=cfg.seed + 1,
        current_probability=cfg.buffer_current_probability,
    )
    order_rng = np.random.default_rng(cfg.seed + 2)

    rows = []
    order = []
    for step in range(total):
        if not order:
            order = list(order_rng.permutation(len(dataset)))
        x, y, _ = dataset[order.pop(0)]
        x = x.unsqueeze(0)
        y = y.unsqueeze(0)

        fake = generator(x)
        buffer.push((x, fake))
        d_x, d_fake_img = buffer.sample((x, fake.detach()))

        d_real = discriminator(torch.cat([x, y], dim=1))
        d_fake = discriminator(torch.cat([d_x, d_fake_img.detach()], dim=1))
        loss_d, _ = lsgan_losses(d_real, d_fake)
        opt_d.zero_grad()
        loss_d.backward()
        opt_d.step()

        d_fake_for_g = discriminator(torch.cat([x, fake], dim=1))
        _, loss_g_adv = lsgan_losses(d_real.detach(), d_fake_for_g)
        loss_l1 = l1_loss(fake, y)
        loss_g = total_generator_loss(loss_g_adv, loss_l1, cfg.lambda_l1)
        opt_g.zero_grad()
        loss_g.backward()
        opt_g.step()

        row = {
            "step": step,
            "lr": sched_g.get_last_lr()[0],
            "loss_d": float(loss_d.detach()),
            "loss_g_adv": float(loss_g_adv.detach()),
            "loss_l1": float(loss_l1.detach()),
            "loss_g": float(loss_g.detach()),
        }
        rows.append(row)
        if not all(math.isfinite(v) for v in (row["loss_d"], row["loss_g"])):
            payload = _checkpoint_payload(generator, discriminator, cfg, dataset.manifest, step)
            payload["optimizer_g_state"] = opt_g.state_dict()
            payload["optimizer_d_state"] = opt_d.state_dict()
            torch.save(payload, out / "diverged.pt")
            _write_loss_csv(out / "losses.csv", rows)
            raise TrainingDivergedError(
                f"non-finite loss at step {step}; state dumped to {out / 'diverged.pt'}"
            )

        sched_g.step()
        sched_d.step()

        if cfg.checkpoint_every and (step + 1) % cfg.checkpoint_every == 0 and step + 1 < total:
            payload = _checkpoint_payload(generator, discriminator, cfg, dataset.manifest, step + 1)
            torch.save(payload, out / f"checkpoint_{step + 1:06d}.pt")

    checkpoint_path = out / "checkpoint.pt"
    torch.save(
        _checkpoint_payload(generator, discriminator, cfg, dataset.manifest, total),
        checkpoint_path,
    )
    loss_csv_path = out / "losses.csv"
    _write_loss_csv(loss_csv_path, rows)
    return TrainResult(generator, discriminator, checkpoint_path, loss_csv_path, rows)


def _write_loss_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["step", "lr", "loss_d", "loss_g_adv", "loss_l1", "loss_g"]
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    "step": row["step"],
                    "lr": f"{row['lr']:.8e}",
                    "loss_d": f"{row['loss_d']:.8e}",
                    "loss_g_adv": f"{row['loss_g_adv']:.8e}",
                    "loss_l1": f"{row['loss_l1']:.8e}",
                    "loss_g": f"{row['loss_g']:.8e}",
                }
            )
