# coding=utf-8
import dataclasses
import os

import numpy as np
import pytest

from lacsh.algorithms.basic import run_chain
from lacsh.core.errors import InvalidCheckpoint, MissingInput
from lacsh.support.persistence import (write_chain, read_chain, chain_metadata, dataset_fingerprint, save_checkpoint,
                                       load_checkpoint, save_dataset, load_dataset, CHECKPOINT_MAGIC)


@pytest.fixture
def short_chain(small_data, short_config):
    return run_chain(dataclasses.replace(short_config, n_scans=160, burn_in=100, thin=3), small_data, verbose=False)


class TestChainFiles:
    def test_write_and_read(self, short_chain, small_data, tmp_path):
        path = str(tmp_path / 'chain.csv')
        write_chain(short_chain, path, small_data)
        chain, meta = read_chain(path)
        names, matrix = short_chain.scalar_columns()
        names2, matrix2 = chain.scalar_columns()
        assert names == names2
        np.testing.assert_array_equal(matrix, matrix2)
        np.testing.assert_array_equal(chain.scan_index, short_chain.scan_index)
        np.testing.assert_array_equal(chain.accepted, short_chain.accepted)
        assert chain.acceptance_rate == short_chain.acceptance_rate
        assert meta['dataset_fingerprint'] == dataset_fingerprint(small_data)
        assert meta['config']['seed'] == 5

    def test_header(self, short_chain, small_data, tmp_path):
        path = str(tmp_path / 'chain.csv')
        write_chain(short_chain, path, small_data)
        with open(path, encoding='utf-8') as f:
            header = f.readline().strip().split(',')
        assert header[:3] == ['a_1', 'a_2', 'a_3']
        assert 'H_12' in header and 'Sigma_Y_3_1' in header and 'Sigma_Y_1_3' not in header
        assert header[-5:] == ['sigma2_T', 'sigma2_H', 'phi', 'scan', 'accepted']
        assert os.path.exists(str(tmp_path / 'chain.json'))

    def test_byte_deterministic(self, short_chain, small_data, tmp_path):
        paths = [str(tmp_path / 'one.csv'), str(tmp_path / 'two.csv')]
        for p in paths:
            write_chain(short_chain, p, small_data)
        contents = []
        for p in paths:
            with open(p, 'rb') as f:
                contents.append(f.read())
        assert contents[0] == contents[1]

    def test_metadata(self, short_chain, small_data):
        meta = chain_metadata(short_chain, small_data)
        assert meta['n_draws'] == 20
        assert meta['N'] == 12 and meta['P'] == 3 and meta['K'] == 2 and meta['Q'] == 1
        assert meta['anchor_index'] == 0
        assert 0 <= meta['acceptance_rate'] <= 1
        assert len(meta['proposal_covariance']) == 9

    def test_missing_chain(self, tmp_path):
        with pytest.raises(MissingInput):
            read_chain(str(tmp_path / 'nothing.csv'))


class TestCheckpoint:
    def test_round_trip(self, tmp_path, small_truth):
        path = str(tmp_path / 'state.ckpt')
        payload = {'scan': 7, 'state': small_truth.state, 'values': np.arange(3.0)}
        save_checkpoint(payload, path)
        with open(path, 'rb') as f:
            assert f.read(len(CHECKPOINT_MAGIC) + 1) == CHECKPOINT_MAGIC + b'\x01'
        loaded = load_checkpoint(path)
        assert loaded['scan'] == 7
        np.testing.assert_array_equal(loaded['state'].H, small_truth.state.H)
        assert not os.path.exists(path + '.tmp')

    def test_bad_magic(self, write_text):
        path = write_text('bad.ckpt', 'not a checkpoint')
        with pytest.raises(InvalidCheckpoint):
            load_checkpoint(path)

    def test_bad_version(self, tmp_path):
        path = str(tmp_path / 'v9.ckpt')
        with open(path, 'wb') as f:
            f.write(CHECKPOINT_MAGIC + b'\x09')
        with pytest.raises(InvalidCheckpoint):
            load_checkpoint(path)

    def test_missing(self, tmp_path):
        with pytest.raises(MissingInput):
            load_checkpoint(str(tmp_path / 'missing.ckpt'))


class TestDatasetFiles:
    def test_round_trip(self, small_data, tmp_path):
        directory = str(tmp_path / 'dataset')
        save_dataset(small_data, directory)
        data = load_dataset(directory)
        for name in ('Y', 'Xstar', 'Ystar', 'T', 'coords'):
            np.testing.assert_array_equal(getattr(data, name), getattr(small_data, name))
        assert data.unit_ids == small_data.unit_ids
        assert data.unit_names == small_data.unit_names
        assert data.anchor_index == small_data.anchor_index
        assert data.metric_names == small_data.metric_names
        assert data.standardization_log == small_data.standardization_log
        assert data.pruning_log == small_data.pruning_log
        assert dataset_fingerprint(data) == dataset_fingerprint(small_data)

    def test_fingerprint_sensitivity(self, small_data):
        changed = dataclasses.replace(small_data, Y=small_data.Y + 1e-12)
        assert dataset_fingerprint(changed) != dataset_fingerprint(small_data)
        assert dataset_fingerprint(dataclasses.replace(small_data, anchor_index=1)) != \
            dataset_fingerprint(small_data)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(MissingInput):
            load_dataset(str(tmp_path / 'none'))
