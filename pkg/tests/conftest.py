"""Shared fixtures.

Two tiers of trained models are provided: `tiny_models` trains in seconds
and only guarantees structural sanity; `toy_models` is the real toy-scale
cascade used by the quantitative acceptance checks and takes a few
minutes on one core (trained once per session).
"""

import numpy as np
import pytest
import torch

from diffdenoise.epsnet import EpsMeanPredictor, EpsPredictorNet, train_eps_predictor
from diffdenoise.phantom import PhantomSpec, generate_phantoms
from diffdenoise.resize import downsample
from diffdenoise.schedule import linear_beta_schedule, make_tau

torch.set_num_threads(1)

TOY_T = 200
TOY_BETA1 = 1e-5
TOY_BETAT = 0.08


@pytest.fixture(scope="session")
def toy_schedule():
    return linear_beta_schedule(TOY_T, TOY_BETA1, TOY_BETAT)


@pytest.fixture(scope="session")
def toy_tau():
    return make_tau(TOY_T, 50, 2, 50)


def _train_pair(images, schedule, base_channels, n_hidden, steps, batch_size):
    lr_images = [downsample(img, 2) for img in images]
    torch.manual_seed(0)
    lr_net = EpsPredictorNet(conditional=False, base_channels=base_channels,
                             n_hidden=n_hidden)
    train_eps_predictor(lr_net, lr_images, schedule, steps=steps, seed=0,
                        batch_size=batch_size)
    hr_net = EpsPredictorNet(conditional=True, base_channels=base_channels,
                             n_hidden=n_hidden)
    train_eps_predictor(hr_net, images, schedule, steps=steps, seed=1,
                        batch_size=batch_size, cond_images=lr_images)
    return (EpsMeanPredictor(lr_net, schedule), EpsMeanPredictor(hr_net, schedule))


@pytest.fixture(scope="session")
def tiny_models(toy_schedule):
    """Barely-trained 16x16 cascade pair for structural tests."""
    spec = PhantomSpec(width=16, height=16, seed=1000)
    images = generate_phantoms(spec, 16)
    return _train_pair(images, toy_schedule, base_channels=8, n_hidden=1,
                       steps=60, batch_size=8)


@pytest.fixture(scope="session")
def toy_models(toy_schedule):
    """Toy-scale 64x64 cascade pair; the slow fixture behind the
    quantitative acceptance criteria."""
    spec = PhantomSpec(width=64, height=64, seed=1000)
    images = generate_phantoms(spec, 64)
    return _train_pair(images, toy_schedule, base_channels=24, n_hidden=2,
                       steps=1500, batch_size=8)
