"""Generator and discriminator architectures.

The generator is an encoder-decoder fusion network: strided convolutions
halve the resolution while residual blocks refine features at every scale,
and each decoder stage adds (not concatenates) the encoder features of the
matching resolution back in before refining them again.  Addition keeps the
channel count fixed per scale, so the skip connections act as identity
paths from every encoder depth straight to the output head.

The discriminator is a patch classifier: a stack of 4x4 convolutions whose
final map scores overlapping receptive fields of the input pair rather than
the image as a whole.  Spectral normalization bounds its Lipschitz constant,
which keeps the least-squares adversarial game stable without batch
statistics.
"""

from dataclasses import dataclass

import torch
from torch import nn

from .errors import InvalidConfigError, ShapeMismatchError


def init_weights(module, std=0.02):
    """Initialize convolution weights from N(0, std^2) and zero the biases."""
    if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
        nn.init.normal_(module.weight, mean=0.0, std=std)
        if module.bias is not None:
            nn.init.zeros_(module.bias)


def receptive_field(module):
    """Receptive field (pixels) of one output unit of a convolution stack.

    Walks the convolution layers in registration order and accumulates

        rf <- rf + (kernel - 1) * jump,   jump <- jump * stride

    so the result is derived from the layers actually present, not from a
    table kept alongside them.  Dilation and transposed convolutions are not
    handled because the discriminator uses neither.
    """
    rf = 1
    jump = 1
    for m in module.modules():
        if isinstance(m, nn.ConvTranspose2d):
            raise InvalidConfigError("receptive_field only supports plain convolutions")
        if isinstance(m, nn.Conv2d):
            k = m.kernel_size[0]
            s = m.stride[0]
            if m.kernel_size[0] != m.kernel_size[1] or m.stride[0] != m.stride[1]:
                raise InvalidConfigError("anisotropic kernels are not supported")
            if m.dilation != (1, 1):
                raise InvalidConfigError("dilated convolutions are not supported")
            rf += (k - 1) * jump
            jump *= s
    return rf


@dataclass(frozen=True)
class GeneratorConfig:
    """Shape of the fusion generator.

    levels counts the strided halvings, so inputs must be divisible by
    2**levels.  Channel width starts at base_channels and doubles per level
    up to max_channels.
    """

    in_channels: int = 3
    out_channels: int = 3
    base_channels: int = 64
    levels: int = 8
    max_channels: int = 512
    init_std: float = 0.02

    def __post_init__(self):
        if self.levels < 1:
            raise InvalidConfigError("levels must be at least 1")
        if self.base_channels < 1 or self.max_channels < self.base_channels:
            raise InvalidConfigError("channel counts must be positive and ordered")
        if self.init_std <= 0:
            raise InvalidConfigError("init_std must be positive")

    @staticmethod
    def full_scale():
        """Configuration for 256 x 256 patches."""
        return GeneratorConfig(levels=8, base_channels=64)

    @staticmethod
    def desk():
        """Small configuration for 64 x 64 patches that trains quickly on a CPU."""
        return GeneratorConfig(levels=2, base_channels=16)

    def width(self, level):
        """Channel count at a given depth (0 = full resolution)."""
        return min(self.base_channels * (2 ** level), self.max_channels)


@dataclass(frozen=True)
class DiscriminatorConfig:
    """Shape of the patch discriminator.

    in_channels is 6 because the discriminator judges the input patch and
    the candidate output patch stacked together; it never sees one alone.
    """

    in_channels: int = 6
    base_channels: int = 64
    init_std: float = 0.02

    def __post_init__(self):
        if self.in_channels < 1 or self.base_channels < 1:
            raise InvalidConfigError("channel counts must be positive")
        if self.init_std <= 0:
            raise InvalidConfigError("init_std must be positive")

    @staticmethod
    def desk():
        return DiscriminatorConfig(base_channels=32)


class ResidualBlock(nn.Module):
    """Five 3x3 convolutions with a short skip from block input to block output.

    The first four convolutions are each followed by the stage activation;
    the fifth is linear and its output is added to the block input, so a
    freshly zero-initialized block is exactly the identity map.
    """

    def __init__(self, channels, negative_slope=0.0):
        super().__init__()
        self.convs = nn.ModuleList(
            nn.Conv2d(channels, channels, kernel_size=3, padding=1) for _ in range(5)
        )
        if negative_slope > 0:
            self.act = nn.LeakyReLU(negative_slope)
        else:
            self.act = nn.ReLU()

    def forward(self, x):
        h = x
        for conv in self.convs[:-1]:
            h = self.act(conv(h))
        return x + self.convs[-1](h)


class _Down(nn.Module):
    """One encoder stage: strided 4x4 convolution then a residual block."""

    def __init__(self, c_in, c_out):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, kernel_size=4, stride=2, padding=1)
        self.act = nn.LeakyReLU(0.2)
        self.block = ResidualBlock(c_out, negative_slope=0.2)

    def forward(self, x):
        return self.block(self.act(self.conv(x)))


class _Up(nn.Module):
    """One decoder stage: transposed 4x4 convolution, skip addition, residual block."""

    def __init__(self, c_in, c_out):
        super().__init__()
        self.conv = nn.ConvTranspose2d(c_in, c_out, kernel_size=4, stride=2, padding=1)
        self.act = nn.ReLU()
        self.block = ResidualBlock(c_out)

    def forward(self, x, skip):
        return self.block(self.act(self.conv(x)) + skip)


class FusionGenerator(nn.Module):
    """Encoder-decoder generator with additive long skips and a Tanh head.

    Encoder activations are leaky (slope 0.2) so gradients survive the
    adversarial phase where large regions of a feature map can sit below
    zero; decoder activations are plain rectifications.  The head maps the
    full-resolution features to out_channels and squashes to [-1, 1].
    """

    def __init__(self, config=None):
        super().__init__()
        self.config = config if config is not None else GeneratorConfig()
        c = self.config
        self.stem = nn.Conv2d(c.in_channels, c.width(0), kernel_size=3, padding=1)
        self.stem_act = nn.LeakyReLU(0.2)
        self.downs = nn.ModuleList(
            _Down(c.width(i), c.width(i + 1)) for i in range(c.levels)
        )
        self.bottleneck = ResidualBlock(c.width(c.levels), negative_slope=0.2)
        self.ups = nn.ModuleList(
            _Up(c.width(i + 1), c.width(i)) for i in reversed(range(c.levels))
        )
        self.head = nn.Conv2d(c.width(0), c.out_channels, kernel_size=3, padding=1)
        self.apply(lambda m: init_weights(m, c.init_std))

    def encode(self, x):
        """Return the per-scale encoder features, shallowest first.

        Exposed so the additive skip paths can be verified from outside:
        with every decoder weight zeroed the network output must equal
        tanh(head(encode(x)[0])).
        """
        if x.dim() != 4 or x.shape[1] != self.config.in_channels:
            raise ShapeMismatchError(
                f"expected (n, {self.config.in_channels}, h, w), got {tuple(x.shape)}"
            )
        step = 2 ** self.config.levels
        if x.shape[2] % step or x.shape[3] % step or x.shape[2] < step or x.shape[3] < step:
            raise ShapeMismatchError(
                f"spatial size {tuple(x.shape[2:])} is not divisible by {step}"
            )
        feats = [self.stem_act(self.stem(x))]
        for down in self.downs:
            feats.append(down(feats[-1]))
        return feats

    def forward(self, x):
        feats = self.encode(x)
        h = self.bottleneck(feats[-1])
        for up, skip in zip(self.ups, reversed(feats[:-1])):
            h = up(h, skip)
        return torch.tanh(self.head(h))


class PatchDiscriminator(nn.Module):
    """Patch classifier over stacked (input, candidate) pairs.

    Three strided 4x4 stages are followed by two stride-1 stages, so each
    unit of the score map sees a 70-pixel square of the pair.  Every
    convolution is spectrally normalized and all hidden activations are
    leaky with slope 0.2; the final map is left unbounded for the
    least-squares losses.
    """

    def __init__(self, config=None):
        super().__init__()
        self.config = config if config is not None else DiscriminatorConfig()
        b = self.config.base_channels
        specs = [
            (self.config.in_channels, b, 2),
            (b, 2 * b, 2),
            (2 * b, 4 * b, 2),
            (4 * b, 8 * b, 1),
            (8 * b, 1, 1),
        ]
        layers = []
        for i, (c_in, c_out, stride) in enumerate(specs):
            conv = nn.Conv2d(c_in, c_out, kernel_size=4, stride=stride, padding=1)
            init_weights(conv, self.config.init_std)
            layers.append(nn.utils.parametrizations.spectral_norm(conv))
            if i < len(specs) - 1:
                layers.append(nn.LeakyReLU(0.2))
        self.net = nn.Sequential(*layers)

    def forward(self, pair):
        if pair.dim() != 4 or pair.shape[1] != self.config.in_channels:
            raise ShapeMismatchError(
                f"expected (n, {self.config.in_channels}, h, w), got {tuple(pair.shape)}"
            )
        return self.net(pair)

    def receptive_field(self):
        """Pixels of the input pair seen by one unit of the score map."""
        return receptive_field(self.net)
