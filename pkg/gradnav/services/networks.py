"""
Policy, value, context-estimator and visual-encoder networks.

Every network keeps its parameters in an ordered name -> Tensor mapping, so the
same mapping drives optimizers, checkpoints and target-network copies.
"""
import logging
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from gradnav.diffcore import ShapeMismatchError, Tensor, no_grad, ops
from gradnav.models.observation import HISTORY_LENGTH, OBS_DIM, OBS_VELOCITY, PRIV_DIM
from gradnav.schemas.config import CameraConfig, NetConfig

logger = logging.getLogger(__name__)

ACTION_DIM = 4
LOG_2PI = float(np.log(2.0 * np.pi))


def _check_input(name: str, x: Tensor, width: int) -> None:
    if x.ndim != 2 or x.shape[1] != width:
        raise ShapeMismatchError(f"{name}: expected input of shape (n, {width}), got {x.shape}")


class Module:
    """Named-parameter container."""

    def __init__(self):
        self._params: Dict[str, Tensor] = {}
        self._children: Dict[str, "Module"] = {}

    def add_param(self, name: str, value: np.ndarray) -> Tensor:
        tensor = Tensor(np.asarray(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def add_child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self._params.items():
            yield prefix + name, tensor
        for child_name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def parameters(self) -> Dict[str, Tensor]:
        return dict(self.named_parameters())

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = [name for name in params if name not in state]
        if missing:
            raise ValueError(f"state is missing parameters: {missing}")
        for name, tensor in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != tensor.shape:
                raise ValueError(f"parameter '{name}': expected shape {tensor.shape}, got {value.shape}")
            tensor.data = value.copy()

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.grad = None
        for child in self._children.values():
            child.zero_grad()

    def num_parameters(self) -> int:
        return sum(t.size for _, t in self.named_parameters())


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, zero: bool = False):
        super().__init__()
        bound = 1.0 / np.sqrt(in_features)
        if zero:
            weight = np.zeros((in_features, out_features))
        else:
            weight = rng.uniform(-bound, bound, size=(in_features, out_features))
        self.weight = self.add_param("weight", weight)
        self.bias = self.add_param("bias", np.zeros(out_features))
        self.in_features = in_features
        self.out_features = out_features

    def __call__(self, x: Tensor) -> Tensor:
        return ops.matmul(x, self.weight) + self.bias


class MLP(Module):
    """tanh hidden layers followed by a linear output layer."""

    def __init__(
        self,
        in_features: int,
        hidden_sizes: Sequence[int],
        out_features: int,
        rng: np.random.Generator,
        zero_output: bool = False,
    ):
        super().__init__()
        self.layers = []
        width = in_features
        for i, hidden in enumerate(hidden_sizes):
            self.layers.append(self.add_child(f"layers.{i}", Linear(width, hidden, rng)))
            width = hidden
        self.output = self.add_child("output", Linear(width, out_features, rng, zero=zero_output))
        self.in_features = in_features

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = ops.tanh(layer(x))
        return self.output(x)


class PolicyNet(Module):
    """
    Diagonal Gaussian policy over normalized actions.

    Zero is the hover action: the environment squashes body rates with tanh and
    thrust with a sigmoid offset to the hover thrust, so a zero-initialized head
    starts at hover.
    """

    def __init__(self, config: NetConfig, rng: np.random.Generator):
        super().__init__()
        self.in_features = OBS_DIM + config.latent_dim + config.visual_dim
        self.backbone = self.add_child("backbone", MLP(self.in_features, config.hidden_sizes, ACTION_DIM, rng, zero_output=True))
        self.log_std = self.add_param("log_std", np.full(ACTION_DIM, config.log_std_init))

    def __call__(self, o: Tensor, z: Tensor, e: Tensor) -> Tuple[Tensor, Tensor]:
        x = ops.concat([o, z, e], axis=1)
        _check_input("policy", x, self.in_features)
        mean = self.backbone(x)
        return mean, self.log_std

    @staticmethod
    def log_prob(actions: Tensor, mean: Tensor, log_std: Tensor) -> Tensor:
        """Per-sample log density of a diagonal Gaussian, (n,)."""
        scaled = (actions - mean) * ops.exp(-log_std)
        return -0.5 * ops.sum(scaled * scaled, axis=1) - ops.sum(log_std) - 0.5 * ACTION_DIM * LOG_2PI

    @staticmethod
    def entropy(log_std: Tensor) -> Tensor:
        return ops.sum(log_std) + 0.5 * ACTION_DIM * (1.0 + LOG_2PI)


class ValueNet(Module):
    """Critic over the privileged observation and the latent."""

    def __init__(self, config: NetConfig, rng: np.random.Generator):
        super().__init__()
        self.in_features = PRIV_DIM + config.latent_dim
        self.backbone = self.add_child("backbone", MLP(self.in_features, config.hidden_sizes, 1, rng))

    def __call__(self, s: Tensor, z: Tensor) -> Tensor:
        x = ops.concat([s, z], axis=1)
        _check_input("value", x, self.in_features)
        return ops.reshape(self.backbone(x), (x.shape[0],))


class CENet(Module):
    """
    Context estimator: a beta-VAE from observation history and visual embedding
    to a latent z, decoded into a prediction of the next observation.
    """

    def __init__(self, config: NetConfig, rng: np.random.Generator):
        super().__init__()
        self.latent_dim = config.latent_dim
        self.in_features = HISTORY_LENGTH * OBS_DIM + config.visual_dim
        self.encoder = self.add_child("encoder", MLP(self.in_features, config.hidden_sizes, 2 * config.latent_dim, rng))
        self.decoder = self.add_child(
            "decoder", MLP(config.latent_dim, tuple(reversed(config.hidden_sizes)), OBS_DIM, rng)
        )

    def encode(self, history: Tensor, e: Tensor) -> Tuple[Tensor, Tensor]:
        x = ops.concat([history, e], axis=1)
        _check_input("cenet", x, self.in_features)
        out = self.encoder(x)
        return out[:, : self.latent_dim], out[:, self.latent_dim:]

    def decode(self, z: Tensor) -> Tensor:
        return self.decoder(z)

    def latent(self, history: np.ndarray, e: np.ndarray, noise: Optional[np.ndarray] = None) -> np.ndarray:
        """z without a tape: the posterior mean, or mean + sigma * noise when noise is given."""
        with no_grad():
            mu, log_sigma = self.encode(Tensor(history), Tensor(e))
        if noise is None:
            return mu.data.copy()
        return mu.data + np.exp(log_sigma.data) * noise


def kl_standard_normal(mu: Tensor, log_sigma: Tensor) -> Tensor:
    """Closed-form KL(N(mu, sigma^2) || N(0, I)) summed over latent dims, averaged over the batch."""
    per_dim = 0.5 * (mu * mu + ops.exp(2.0 * log_sigma) - 1.0 - 2.0 * log_sigma)
    return ops.mean(ops.sum(per_dim, axis=1))


def cenet_loss(
    cenet: CENet,
    history: Tensor,
    e: Tensor,
    o_next: Tensor,
    beta: float,
    noise: Optional[np.ndarray] = None,
) -> Tuple[Tensor, Tensor, Tensor]:
    """
    Reconstruction MSE of the next observation plus beta-weighted KL.

    Args:
        cenet: the estimator
        history: (n, 80) last five observations
        e: (n, 24) visual embeddings
        o_next: (n, 16) observation that followed
        beta: KL weight, non-negative
        noise: standard-normal draws for the reparameterized sample; None decodes the mean

    Returns:
        (total, mse, kl)
    """
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    mu, log_sigma = cenet.encode(history, e)
    z = mu if noise is None else mu + ops.exp(log_sigma) * noise
    reconstruction = cenet.decode(z)
    diff = reconstruction - o_next
    mse = ops.mean(diff * diff)
    kl = kl_standard_normal(mu, log_sigma)
    return mse + beta * kl, mse, kl


class VisualEncoder(Module):
    """Four stride-2 3x3 convolutions, global average pool, then 64 -> 512 -> 24."""

    def __init__(self, config: NetConfig, camera: CameraConfig, rng: np.random.Generator):
        super().__init__()
        self.height, self.width = camera.height, camera.width
        self.convs = []
        channels = 3
        for i, out_channels in enumerate(config.encoder_channels):
            conv = Module()
            fan_in = channels * 9
            bound = 1.0 / np.sqrt(fan_in)
            conv.add_param("weight", rng.uniform(-bound, bound, size=(out_channels, channels, 3, 3)))
            conv.add_param("bias", np.zeros(out_channels))
            self.convs.append(self.add_child(f"conv.{i}", conv))
            channels = out_channels
        self.fc = self.add_child("fc", Linear(channels, config.encoder_hidden, rng))
        self.head = self.add_child("head", Linear(config.encoder_hidden, config.visual_dim, rng))

    def __call__(self, images: np.ndarray) -> Tensor:
        """
        Embed a batch of RGB images.

        Args:
            images: (n, H, W, 3), uint8 or floats in [0, 1]

        Raises:
            ShapeMismatchError: if the image size does not match the encoder
        """
        images = np.asarray(images)
        if images.ndim != 4 or images.shape[1:] != (self.height, self.width, 3):
            raise ShapeMismatchError(
                f"visual encoder expects images of shape (n, {self.height}, {self.width}, 3), got {images.shape}"
            )
        pixels = images.astype(np.float64)
        if images.dtype == np.uint8:
            pixels = pixels / 255.0
        x = Tensor(np.ascontiguousarray(pixels.transpose(0, 3, 1, 2)))
        for conv in self.convs:
            params = conv.parameters()
            x = ops.relu(ops.conv2d(x, params["weight"], params["bias"], stride=2, padding=1))
        pooled = ops.mean(x, axis=(2, 3))
        return self.head(ops.relu(self.fc(pooled)))


class NavigationAgent:
    """
    Policy, critic (+ target copy), context estimator and visual encoder of one
    run, together with the observation ablations applied to the policy inputs.
    """

    def __init__(self, config: NetConfig, camera: CameraConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.config = config
        self.camera = camera
        self.policy = PolicyNet(config, rng)
        self.critic = ValueNet(config, rng)
        self.cenet = CENet(config, rng)
        self.encoder = VisualEncoder(config, camera, rng)
        self.target_critic = ValueNet(config, np.random.default_rng(0))
        self.target_critic.load_state_dict(self.critic.state_dict())
        logger.info(
            f"Agent initialized: policy {self.policy.num_parameters()} params, "
            f"critic {self.critic.num_parameters()}, cenet {self.cenet.num_parameters()}, "
            f"encoder {self.encoder.num_parameters()} (ablation={config.ablation})"
        )

    # --------------------------------------------------------------- groups
    def actor_parameters(self) -> Dict[str, Tensor]:
        return self.policy.parameters()

    def critic_parameters(self) -> Dict[str, Tensor]:
        return self.critic.parameters()

    def context_parameters(self) -> Dict[str, Tensor]:
        params = {f"cenet.{k}": v for k, v in self.cenet.parameters().items()}
        params.update({f"encoder.{k}": v for k, v in self.encoder.parameters().items()})
        return params

    def modules(self) -> Dict[str, Module]:
        return {
            "policy": self.policy,
            "critic": self.critic,
            "target_critic": self.target_critic,
            "cenet": self.cenet,
            "encoder": self.encoder,
        }

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {}
        for prefix, module in self.modules().items():
            state.update({f"{prefix}.{k}": v for k, v in module.state_dict().items()})
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        for prefix, module in self.modules().items():
            module.load_state_dict({k[len(prefix) + 1:]: v for k, v in state.items() if k.startswith(prefix + ".")})

    def parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {k: v.shape for k, v in self.state_dict().items()}

    def soft_update_target(self, alpha: float) -> None:
        """target <- alpha * target + (1 - alpha) * critic."""
        critic = self.critic.parameters()
        for name, target in self.target_critic.parameters().items():
            target.data = alpha * target.data + (1.0 - alpha) * critic[name].data

    # -------------------------------------------------------------- inputs
    @property
    def uses_depth_images(self) -> bool:
        return self.config.ablation == "depth_only"

    def encoder_images(self, images: np.ndarray, depth: np.ndarray) -> np.ndarray:
        """Images fed to the visual encoder: RGB, or depth replicated to three channels."""
        if not self.uses_depth_images:
            return images
        scaled = np.clip(depth / self.camera.far, 0.0, 1.0)
        return np.repeat(scaled[..., None], 3, axis=-1)

    def embed(self, images: np.ndarray) -> np.ndarray:
        """Visual embeddings without a tape."""
        with no_grad():
            return self.encoder(images).data.copy()

    def latent(self, history: np.ndarray, e: np.ndarray, noise: Optional[np.ndarray] = None) -> np.ndarray:
        if self.config.ablation == "no_cenet":
            return np.zeros((history.shape[0], self.config.latent_dim))
        return self.cenet.latent(history, e, noise)

    def policy_inputs(self, obs: Tensor, z: np.ndarray, e: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
        if self.config.ablation == "no_velocity":
            mask = np.ones(OBS_DIM)
            mask[OBS_VELOCITY] = 0.0
            obs = obs * mask
        if self.config.ablation == "no_visual":
            e = e * 0.0
        return obs, Tensor(z), e

    def act(self, obs: Tensor, z: np.ndarray, e: Tensor) -> Tuple[Tensor, Tensor]:
        return self.policy(*self.policy_inputs(obs, z, e))
