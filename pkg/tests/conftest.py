# coding=utf-8
import os

import numpy as np
import pytest

from lacsh.core.entity import McmcConfig
from lacsh.tools.random import RandomStream
from lacsh.validation.synthetic import generate_synthetic


@pytest.fixture
def write_text(tmp_path):
    """
    Write a text file under the test's temporary directory and return its path.
    """
    def write(name, text):
        path = os.path.join(str(tmp_path), name)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        return path
    return write


@pytest.fixture
def small_truth():
    """
    A 12-unit synthetic dataset with 3 metrics, 2 covariates and 1 lagged metric, anchored at the first unit.
    """
    return generate_synthetic(12, 3, 2, 1, coord_mode='fixed', rng=RandomStream(11), anchor_index=0)


@pytest.fixture
def small_data(small_truth):
    return small_truth.data


@pytest.fixture
def short_config(small_data):
    return McmcConfig(n_scans=300, burn_in=100, thin=2, seed=5, anchor_index=small_data.anchor_index,
                      log_every=100)


@pytest.fixture
def rng():
    return RandomStream(20240101)
