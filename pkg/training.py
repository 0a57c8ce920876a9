"""
Adversarial training loop: Wasserstein and BCE objectives, Adam updates,
critic/generator alternation, and the classical PCA-GAN baseline generator.
"""

from __future__ import annotations

import copy
import dataclasses
import time

import numpy as np

from config import logger
from critic import LINEAR, SIGMOID, clip_weights, critic_backward, critic_forward, init_critic
from errors import ArgumentError, ShapeError, TrainingDivergenceError
from evaluation import fit_gaussian, frechet_distance
from features import make_assignment
from qcircuit import CircuitSpec
from qgenerator import (
    GeneratorEnsemble,
    forward_batch,
    generator_gradient,
    init_ensemble,
    sample_noise,
    to_critic_space,
)

BCE_EPS = 1e-7
BN_EPS = 1e-5


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 8
    lr_generator: float = 0.3
    lr_critic: float = 0.05
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_c: float = 0.01
    critic_steps: int = 5
    loss_mode: str = "wasserstein"
    assignment_mode: str = "balanced"
    he_enabled: bool = True
    seed: int = 0
    n_qubits: int = 5
    depth: int = 6
    n_subgens: int = 8
    generator_kind: str = "quantum"
    latent_dim: int = 100
    baseline_hidden: int = 1024
    batch_norm: bool = False
    leaky_slope: float = 0.2
    weight_init_scale: float = 1.0
    critic_init_scale: float = 0.1
    eval_samples: int = 64

    def __post_init__(self):
        if self.lr_generator <= 0 or self.lr_critic <= 0:
            raise ArgumentError("learning rates must be positive")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if not 0 < self.adam_beta1 < self.adam_beta2 < 1:
            raise ArgumentError("requires 0 < adam_beta1 < adam_beta2 < 1")
        if self.loss_mode not in ("wasserstein", "bce"):
            raise ArgumentError(f"unknown loss mode {self.loss_mode!r}")
        if self.generator_kind not in ("quantum", "classical"):
            raise ArgumentError(f"unknown generator kind {self.generator_kind!r}")

    @property
    def n_features(self):
        return self.n_subgens * self.n_qubits

    @property
    def critic_head(self):
        return LINEAR if self.loss_mode == "wasserstein" else SIGMOID


# Adam

@dataclasses.dataclass
class AdamState:
    m: list
    v: list
    step: int = 0


def adam_init(tensors):
    return AdamState([np.zeros_like(t) for t in tensors], [np.zeros_like(t) for t in tensors], 0)


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns (new params, new state)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and Adam moments must have the same tensor count")
    step = state.step + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"Adam shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** step)
        v_hat = v / (1.0 - beta2 ** step)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, step)


# Losses

def _nonempty(*batches):
    arrays = [np.asarray(b, dtype=np.float64).reshape(-1) for b in batches]
    if any(a.size == 0 for a in arrays):
        raise ArgumentError("loss needs a nonempty batch")
    return arrays


def critic_loss(real_scores, fake_scores):
    """L_D = -mean(D(real)) + mean(D(fake))."""
    real, fake = _nonempty(real_scores, fake_scores)
    return float(-real.mean() + fake.mean())


def generator_loss(fake_scores):
    """L_G = -mean(D(fake))."""
    (fake,) = _nonempty(fake_scores)
    return float(-fake.mean())


def bce_losses(real_probs, fake_probs):
    """(critic loss, non-saturating generator loss) from sigmoid outputs."""
    real, fake = _nonempty(real_probs, fake_probs)
    real = np.clip(real, BCE_EPS, 1.0 - BCE_EPS)
    fake = np.clip(fake, BCE_EPS, 1.0 - BCE_EPS)
    loss_d = -np.mean(np.log(real)) - np.mean(np.log(1.0 - fake))
    loss_g = -np.mean(np.log(fake))
    return float(loss_d), float(loss_g)


def _critic_objective(loss_mode, real_scores, fake_scores):
    """Critic loss and its derivative w.r.t. each score."""
    n_real, n_fake = len(real_scores), len(fake_scores)
    if loss_mode == "wasserstein":
        loss = critic_loss(real_scores, fake_scores)
        return loss, np.full((n_real, 1), -1.0 / n_real), np.full((n_fake, 1), 1.0 / n_fake)
    loss, _ = bce_losses(real_scores, fake_scores)
    real = np.clip(real_scores, BCE_EPS, 1.0 - BCE_EPS)
    fake = np.clip(fake_scores, BCE_EPS, 1.0 - BCE_EPS)
    return loss, -1.0 / (n_real * real), 1.0 / (n_fake * (1.0 - fake))


def _generator_objective(loss_mode, fake_scores):
    n_fake = len(fake_scores)
    if loss_mode == "wasserstein":
        return generator_loss(fake_scores), np.full((n_fake, 1), -1.0 / n_fake)
    _, loss = bce_losses(np.full(n_fake, 0.5), fake_scores)
    fake = np.clip(fake_scores, BCE_EPS, 1.0 - BCE_EPS)
    return loss, -1.0 / (n_fake * fake)


# Classical baseline generator

@dataclasses.dataclass
class BaselineGeneratorParams:
    """latent -> hidden (LeakyReLU, optional batch norm) -> n_features (Tanh)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None
    slope: float = 0.2

    def __post_init__(self):
        self.w1, self.b1 = np.asarray(self.w1, dtype=np.float64), np.asarray(self.b1, dtype=np.float64)
        self.w2, self.b2 = np.asarray(self.w2, dtype=np.float64), np.asarray(self.b2, dtype=np.float64)
        hidden = self.w1.shape[1]
        if self.b1.shape != (hidden,) or self.w2.shape[0] != hidden or self.b2.shape != (self.w2.shape[1],):
            raise ShapeError("baseline generator layer shapes do not chain")
        if (self.gamma is None) != (self.beta is None):
            raise ShapeError("batch norm needs both gamma and beta")
        if self.gamma is not None:
            self.gamma = np.asarray(self.gamma, dtype=np.float64)
            self.beta = np.asarray(self.beta, dtype=np.float64)
            if self.gamma.shape != (hidden,) or self.beta.shape != (hidden,):
                raise ShapeError("batch norm parameters must match the hidden width")

    @property
    def batch_norm(self):
        return self.gamma is not None

    @property
    def latent_dim(self):
        return self.w1.shape[0]

    @property
    def n_features(self):
        return self.w2.shape[1]

    def tensors(self):
        tensors = [self.w1, self.b1, self.w2, self.b2]
        if self.batch_norm:
            tensors += [self.gamma, self.beta]
        return tensors

    def with_tensors(self, tensors):
        return BaselineGeneratorParams(*tensors, slope=self.slope)


def init_baseline(latent_dim, hidden, n_features, rng, batch_norm=False, slope=0.2):
    """Affine layers drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    bound1, bound2 = 1.0 / np.sqrt(latent_dim), 1.0 / np.sqrt(hidden)
    return BaselineGeneratorParams(
        w1=rng.uniform(-bound1, bound1, size=(latent_dim, hidden)),
        b1=rng.uniform(-bound1, bound1, size=hidden),
        w2=rng.uniform(-bound2, bound2, size=(hidden, n_features)),
        b2=rng.uniform(-bound2, bound2, size=n_features),
        gamma=np.ones(hidden) if batch_norm else None,
        beta=np.zeros(hidden) if batch_norm else None,
        slope=slope,
    )


def baseline_param_count(params):
    return int(sum(t.size for t in params.tensors()))


def _baseline_cache(params, latent):
    latent = np.asarray(latent, dtype=np.float64)
    if latent.ndim != 2 or latent.shape[1] != params.latent_dim:
        raise ShapeError(f"latent must have shape (batch, {params.latent_dim}), got {latent.shape}")
    z1 = latent @ params.w1 + params.b1
    cache = {"latent": latent, "z1": z1}
    pre = z1
    if params.batch_norm:
        mu = z1.mean(axis=0)
        inv_std = 1.0 / np.sqrt(z1.var(axis=0) + BN_EPS)
        xhat = (z1 - mu) * inv_std
        cache.update(xhat=xhat, inv_std=inv_std)
        pre = params.gamma * xhat + params.beta
    h = np.where(pre > 0, pre, params.slope * pre)
    out = np.tanh(h @ params.w2 + params.b2)
    cache.update(pre=pre, h=h, out=out)
    return out, cache


def baseline_forward(params, latent):
    """(batch, latent_dim) -> (batch, n_features) features in (-1, 1)."""
    out, _ = _baseline_cache(params, latent)
    return out


def baseline_backward(params, latent, upstream):
    """Gradients of the loss w.r.t. every baseline tensor, in tensors() order."""
    out, cache = _baseline_cache(params, latent)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != out.shape:
        raise ShapeError(f"upstream must have shape {out.shape}, got {upstream.shape}")

    d_out = upstream * (1.0 - out ** 2)
    gw2 = cache["h"].T @ d_out
    gb2 = d_out.sum(axis=0)
    d_h = d_out @ params.w2.T
    d_pre = d_h * np.where(cache["pre"] > 0, 1.0, params.slope)

    grads_bn = []
    d_z1 = d_pre
    if params.batch_norm:
        xhat, inv_std = cache["xhat"], cache["inv_std"]
        g_gamma = (d_pre * xhat).sum(axis=0)
        g_beta = d_pre.sum(axis=0)
        d_xhat = d_pre * params.gamma
        n = d_xhat.shape[0]
        d_z1 = (inv_std / n) * (n * d_xhat - d_xhat.sum(axis=0) - xhat * (d_xhat * xhat).sum(axis=0))
        grads_bn = [g_gamma, g_beta]

    gw1 = cache["latent"].T @ d_z1
    gb1 = d_z1.sum(axis=0)
    return [gw1, gb1, gw2, gb2] + grads_bn


# Generator dispatch (quantum ensemble or classical baseline)

def generator_tensors(generator):
    if isinstance(generator, GeneratorEnsemble):
        return [generator.weights]
    return generator.tensors()


def generator_with_tensors(generator, tensors):
    if isinstance(generator, GeneratorEnsemble):
        return generator.with_weights(tensors[0])
    return generator.with_tensors(tensors)


def sample_latent(generator, batch, rng):
    if isinstance(generator, GeneratorEnsemble):
        return sample_noise(generator, batch, rng)
    return rng.standard_normal((batch, generator.latent_dim))


def generate_features(generator, latent):
    """Critic-space features in [0, 1] for the given latent batch."""
    if isinstance(generator, GeneratorEnsemble):
        return to_critic_space(forward_batch(generator, latent))
    return to_critic_space(baseline_forward(generator, latent))


def sample_features(generator, n, rng):
    """n fresh critic-space feature vectors."""
    return generate_features(generator, sample_latent(generator, n, rng))


def _generator_grads(generator, latent, d_features):
    # features = (m + 1) / 2, so dL/dm = dL/dx / 2
    d_m = d_features / 2.0
    if isinstance(generator, GeneratorEnsemble):
        return [generator_gradient(generator, latent, d_m)]
    return baseline_backward(generator, latent, d_m)


def critic_loss_and_grad(critic, real, fake, loss_mode):
    """Critic loss on a real/fake pair and its gradients w.r.t. the critic tensors."""
    inputs = np.concatenate([real, fake], axis=0)
    scores = critic_forward(critic, inputs)
    n_real = len(real)
    loss, g_real, g_fake = _critic_objective(loss_mode, scores[:n_real], scores[n_real:])
    grads, _ = critic_backward(critic, inputs, np.concatenate([g_real, g_fake], axis=0))
    return loss, grads


def generator_loss_and_grad(generator, critic, latent, loss_mode):
    """
    Generator loss for a latent batch and its gradients w.r.t. the generator
    tensors: the critic's input gradient chained with the generator Jacobian
    (parameter shift for the quantum ensemble, backprop for the baseline).
    """
    fake = generate_features(generator, latent)
    scores = critic_forward(critic, fake)
    loss, g_scores = _generator_objective(loss_mode, scores)
    _, d_fake = critic_backward(critic, fake, g_scores)
    return loss, _generator_grads(generator, latent, d_fake)


# Training state and checkpoints

@dataclasses.dataclass
class EpochMetrics:
    epoch: int
    loss_d: float | None
    loss_g: float | None
    frechet: float
    wall_seconds: float = 0.0


@dataclasses.dataclass
class StepRecord:
    loss_d: float
    loss_g: float


@dataclasses.dataclass
class TrainingState:
    generator: object
    critic: object
    gen_adam: AdamState
    critic_adam: AdamState
    rng: np.random.Generator
    epoch: int = 0
    history: list = dataclasses.field(default_factory=list)


@dataclasses.dataclass
class Checkpoint:
    """Self-describing snapshot of a run after `epoch` completed epochs."""

    config: TrainConfig
    generator: object
    critic: object
    pca: object
    gen_adam: AdamState
    critic_adam: AdamState
    rng_state: dict
    epoch: int
    history: list
    metadata: dict = dataclasses.field(default_factory=dict)


def init_training_state(config, n_features=None):
    """Fresh generator, critic and optimiser state drawn from config.seed."""
    n_features = n_features or config.n_features
    rng = np.random.default_rng(config.seed)
    if config.generator_kind == "quantum":
        if n_features != config.n_features:
            raise ShapeError(
                f"quantum generator produces {config.n_features} features, data has {n_features}"
            )
        spec = CircuitSpec.linear(config.n_qubits, config.depth)
        assignment = make_assignment(config.assignment_mode, n_features, config.n_subgens, config.n_qubits)
        generator = init_ensemble(config.n_subgens, spec, assignment, rng, config.weight_init_scale)
    else:
        generator = init_baseline(
            config.latent_dim, config.baseline_hidden, n_features, rng,
            batch_norm=config.batch_norm, slope=config.leaky_slope,
        )
    critic = init_critic(n_features, rng, head=config.critic_head, scale=config.critic_init_scale)
    return TrainingState(
        generator=generator,
        critic=critic,
        gen_adam=adam_init(generator_tensors(generator)),
        critic_adam=adam_init(critic.tensors()),
        rng=rng,
    )


def state_from_checkpoint(checkpoint):
    rng = np.random.default_rng()
    rng.bit_generator.state = copy.deepcopy(checkpoint.rng_state)
    return TrainingState(
        generator=checkpoint.generator,
        critic=checkpoint.critic,
        gen_adam=checkpoint.gen_adam,
        critic_adam=checkpoint.critic_adam,
        rng=rng,
        epoch=checkpoint.epoch,
        history=list(checkpoint.history),
    )


def make_checkpoint(state, config, pca, metadata=None):
    return Checkpoint(
        config=config,
        generator=state.generator,
        critic=state.critic,
        pca=pca,
        gen_adam=state.gen_adam,
        critic_adam=state.critic_adam,
        rng_state=copy.deepcopy(state.rng.bit_generator.state),
        epoch=state.epoch,
        history=list(state.history),
        metadata=dict(metadata or {}),
    )


def _diagnostics(state, loss_d, loss_g):
    return {
        "epoch": state.epoch,
        "loss_d": loss_d,
        "loss_g": loss_g,
        "critic_max_abs": float(max(np.max(np.abs(t)) for t in state.critic.tensors())),
        "generator_max_abs": float(max(np.max(np.abs(t)) for t in generator_tensors(state.generator))),
        "critic_adam_step": state.critic_adam.step,
        "gen_adam_step": state.gen_adam.step,
    }


def train_step(real_batch, state, config):
    """
    critic_steps critic updates (fresh latent batch each, weights clipped in
    Wasserstein mode) followed by one generator update.

    Returns:
        (new state, StepRecord with the mean critic loss and the generator loss).
    """
    real = np.asarray(real_batch, dtype=np.float64)
    batch = len(real)
    critic, critic_adam = state.critic, state.critic_adam
    generator, gen_adam = state.generator, state.gen_adam

    critic_losses = []
    for _ in range(config.critic_steps):
        latent = sample_latent(generator, batch, state.rng)
        fake = generate_features(generator, latent)
        loss_d, grads = critic_loss_and_grad(critic, real, fake, config.loss_mode)
        if not np.isfinite(loss_d):
            raise TrainingDivergenceError(
                f"critic loss diverged ({loss_d})", _diagnostics(state, loss_d, None)
            )
        tensors, critic_adam = adam_step(
            critic.tensors(), grads, critic_adam, config.lr_critic,
            config.adam_beta1, config.adam_beta2, config.adam_eps,
        )
        critic = critic.with_tensors(tensors)
        if config.loss_mode == "wasserstein":
            critic = clip_weights(critic, config.clip_c)
        critic_losses.append(loss_d)

    latent = sample_latent(generator, batch, state.rng)
    loss_g, grads = generator_loss_and_grad(generator, critic, latent, config.loss_mode)
    if not np.isfinite(loss_g):
        raise TrainingDivergenceError(
            f"generator loss diverged ({loss_g})", _diagnostics(state, float(np.mean(critic_losses)), loss_g)
        )
    tensors, gen_adam = adam_step(
        generator_tensors(generator), grads, gen_adam, config.lr_generator,
        config.adam_beta1, config.adam_beta2, config.adam_eps,
    )
    generator = generator_with_tensors(generator, tensors)

    new_state = dataclasses.replace(
        state, generator=generator, critic=critic, gen_adam=gen_adam, critic_adam=critic_adam
    )
    return new_state, StepRecord(float(np.mean(critic_losses)), loss_g)


def epoch_frechet(generator, real_features, config, epoch):
    """Feature-space Fréchet distance of eval_samples generated vectors vs. the real features."""
    rng = np.random.default_rng([config.seed, epoch])
    fake = sample_features(generator, config.eval_samples, rng)
    return frechet_distance(fit_gaussian(real_features), fit_gaussian(fake))


def train(features, config, pca, resume=None, metadata=None, wall_clock=True):
    """
    Runs the adversarial loop over scaled PCA features.

    Yields a Checkpoint for the initial state (epoch 0, unless resuming) and
    one after every completed epoch up to config.epochs.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or len(features) == 0:
        raise ArgumentError("training needs a nonempty (n, F) feature matrix")

    if resume is None:
        state = init_training_state(config, features.shape[1])
        initial = epoch_frechet(state.generator, features, config, 0)
        state.history.append(EpochMetrics(0, None, None, initial))
        logger.info(f"Epoch 0: initial Fréchet {initial:.6f}")
        yield make_checkpoint(state, config, pca, metadata)
    else:
        state = state_from_checkpoint(resume)
        logger.info(f"Resuming from epoch {state.epoch}")

    n = len(features)
    for epoch in range(state.epoch + 1, config.epochs + 1):
        started = time.perf_counter()
        order = state.rng.permutation(n)
        records = []
        for start in range(0, n, config.batch_size):
            real = features[order[start:start + config.batch_size]]
            state, record = train_step(real, state, config)
            records.append(record)

        frechet = epoch_frechet(state.generator, features, config, epoch)
        wall = time.perf_counter() - started if wall_clock else 0.0
        metrics = EpochMetrics(
            epoch=epoch,
            loss_d=float(np.mean([r.loss_d for r in records])),
            loss_g=float(np.mean([r.loss_g for r in records])),
            frechet=frechet,
            wall_seconds=wall,
        )
        state.epoch = epoch
        state.history.append(metrics)
        logger.info(
            f"Epoch {epoch}/{config.epochs}: L_D {metrics.loss_d:.6f} L_G {metrics.loss_g:.6f} "
            f"Fréchet {frechet:.6f}"
        )
        yield make_checkpoint(state, config, pca, metadata)
