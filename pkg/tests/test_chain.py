# coding=utf-8
import dataclasses
import os

import numpy as np
import pytest

from lacsh.algorithms.basic import run_chain, ChainRunner, build_toolbox, initial_state
from lacsh.core.errors import InvalidValue, NumericalUnderflow
from lacsh.support.persistence import load_checkpoint
from lacsh.tools.toolbox import Toolbox


def assert_same_chain(c1, c2):
    n1, m1 = c1.scalar_columns()
    n2, m2 = c2.scalar_columns()
    assert n1 == n2
    np.testing.assert_array_equal(m1, m2)
    np.testing.assert_array_equal(c1.scan_index, c2.scan_index)
    np.testing.assert_array_equal(c1.accepted, c2.accepted)
    assert c1.acceptance_count == c2.acceptance_count


class TestRunChain:
    def test_smoke(self, small_data, short_config):
        chain = run_chain(short_config, small_data, verbose=False)
        assert len(chain) == 100
        np.testing.assert_array_equal(chain.scan_index, np.arange(102, 301, 2))
        assert np.all(chain.H[:, small_data.anchor_index] < 0)
        assert 0.0 < chain.acceptance_rate < 1.0
        assert chain.n_proposals == 300
        assert chain.block_names[-1] == 'H_anc'
        assert chain.proposal_covariance.shape == (9, 9)
        assert chain.logbook.select('scan') == [100, 200, 300]

    def test_determinism(self, small_data, short_config):
        assert_same_chain(run_chain(short_config, small_data, verbose=False),
                          run_chain(short_config, small_data, verbose=False))

    def test_seed_matters(self, small_data, short_config):
        other = dataclasses.replace(short_config, seed=6)
        c1 = run_chain(short_config, small_data, verbose=False)
        c2 = run_chain(other, small_data, verbose=False)
        assert not np.array_equal(c1.H, c2.H)

    def test_cut_feedback(self, small_data, short_config, rng):
        other = dataclasses.replace(small_data, Y=rng.normal(size=small_data.Y.shape))
        c1 = run_chain(short_config, small_data, verbose=False)
        c2 = run_chain(short_config, other, verbose=False)
        np.testing.assert_array_equal(c1.gamma, c2.gamma)
        np.testing.assert_array_equal(c1.sigma2_T, c2.sigma2_T)
        assert not np.array_equal(c1.H, c2.H)

    def test_resume_is_exact(self, small_data, short_config, tmp_path):
        full = run_chain(short_config, small_data, verbose=False)
        path = str(tmp_path / 'chain.ckpt')
        first = dataclasses.replace(short_config, n_scans=150, checkpoint_path=path)
        run_chain(first, small_data, verbose=False)
        assert load_checkpoint(path)['scan'] == 150
        resumed = run_chain(short_config, small_data, verbose=False, resume_from=path)
        assert_same_chain(full, resumed)

    def test_failure_writes_checkpoint(self, small_data, short_config, tmp_path):
        def fail_at_five(runner):
            if runner.scan == 5:
                raise NumericalUnderflow('boom')

        path = str(tmp_path / 'failed.ckpt')
        config = dataclasses.replace(short_config, checkpoint_path=path)
        tb = build_toolbox(config)
        tb.register('update_fail', fail_at_five, step=True)
        with pytest.raises(NumericalUnderflow):
            run_chain(config, small_data, toolbox=tb, verbose=False)
        assert os.path.exists(path)
        payload = load_checkpoint(path)
        assert payload['scan'] == 5
        assert payload['retained'] == []

    def test_periodic_checkpoints(self, small_data, short_config, tmp_path):
        path = str(tmp_path / 'periodic.ckpt')
        config = dataclasses.replace(short_config, checkpoint_every=50, checkpoint_path=path)
        chain = run_chain(config, small_data, verbose=False)
        payload = load_checkpoint(path)
        assert payload['scan'] == 300
        assert len(payload['retained']) == len(chain)

    def test_linear_only(self, small_data, short_config):
        config = dataclasses.replace(short_config, outcome_terms='linear_only')
        chain = run_chain(config, small_data, verbose=False)
        np.testing.assert_array_equal(chain.beta[:, [2, 4, 5]], 0.0)
        assert np.unique(chain.beta[:, 1]).size > 1

    def test_fixed_treatment_model(self, small_data, short_config):
        config = dataclasses.replace(short_config, fixed=('gamma', 'sigma2_T'))
        chain = run_chain(config, small_data, verbose=False)
        start = initial_state(small_data, config)
        np.testing.assert_array_equal(chain.gamma, np.tile(start.gamma, (len(chain), 1)))
        np.testing.assert_array_equal(chain.sigma2_T, start.sigma2_T)

    def test_fixed_block_coordinate(self, small_data, short_config):
        config = dataclasses.replace(short_config, fixed=('phi',))
        chain = run_chain(config, small_data, verbose=False)
        assert np.unique(chain.phi).size == 1

    def test_unknown_fixed_parameter(self, small_data, short_config):
        with pytest.raises(InvalidValue):
            ChainRunner(small_data, dataclasses.replace(short_config, fixed=('omega',)))

    def test_base_variant(self, small_data, short_config):
        config = dataclasses.replace(short_config, model_variant='base_lhfi')
        chain = run_chain(config, small_data, verbose=False)
        assert chain.zeta.shape == (100, 2 + small_data.K + small_data.Q)
        assert np.unique(chain.phi).size == 1
        assert np.all(chain.H[:, small_data.anchor_index] < 0)
        assert chain.block_names[0] == 'zeta_0'

    def test_unanchored_pilot(self, small_data, short_config):
        config = dataclasses.replace(short_config, anchor_index=None)
        chain = run_chain(config, small_data, verbose=False)
        assert len(chain) == 100
        assert 'H_anc' not in chain.block_names

    @pytest.mark.parametrize('truncation', ['conditional', 'none'])
    def test_truncation_modes(self, small_data, short_config, truncation):
        config = dataclasses.replace(short_config, truncation=truncation)
        chain = run_chain(config, small_data, verbose=False)
        assert np.all(chain.H[:, small_data.anchor_index] < 0)

    def test_invalid_config(self, small_data, short_config):
        with pytest.raises(InvalidValue):
            run_chain(dataclasses.replace(short_config, burn_in=300), small_data, verbose=False)
        with pytest.raises(InvalidValue):
            run_chain(dataclasses.replace(short_config, model_variant='other'), small_data, verbose=False)

    def test_verbose_prints_logbook(self, small_data, short_config, capsys):
        run_chain(short_config, small_data, verbose=True)
        out = capsys.readouterr().out
        assert 'accept_rate' in out
        assert len(out.strip().splitlines()) >= 4


class TestInitialState:
    def test_anchor_negative(self, small_data, short_config):
        state = initial_state(small_data, short_config)
        assert state.H[small_data.anchor_index] < 0
        state.validate(small_data.anchor_index)
        assert state.phi > 0

    def test_base_variant_has_zeta(self, small_data, short_config):
        state = initial_state(small_data, dataclasses.replace(short_config, model_variant='base_lhfi'))
        assert state.zeta.shape == (2 + small_data.K + small_data.Q,)


class TestToolbox:
    def test_schedule_order(self, short_config):
        tb = build_toolbox(short_config)
        assert list(tb.schedule) == ['update_H', 'update_a', 'update_Sigma_Y', 'update_sigma2_T', 'update_gamma',
                                     'update_hblock']

    def test_base_variant_skips_treatment(self, short_config):
        tb = build_toolbox(dataclasses.replace(short_config, model_variant='base_lhfi'))
        assert 'update_gamma' not in tb.schedule
        assert 'update_sigma2_T' not in tb.schedule

    def test_register_and_unregister(self):
        tb = Toolbox()
        tb.register('update_x', lambda runner, k=1: k, step=True)
        tb.register('helper', lambda: 0)
        assert list(tb.schedule) == ['update_x']
        assert tb.update_x(None, k=3) == 3
        tb.unregister('update_x')
        assert not tb.schedule

    def test_unscheduled_step_warns(self, small_data, short_config):
        tb = build_toolbox(short_config)
        tb.register('update_extra', lambda runner: None)
        with pytest.warns(UserWarning, match='update_extra'):
            ChainRunner(small_data, short_config, toolbox=tb)

    def test_scheduled_step_must_be_named_update(self, small_data, short_config):
        tb = build_toolbox(short_config)
        tb.register('extra', lambda runner: None, step=True)
        with pytest.raises(AssertionError):
            ChainRunner(small_data, short_config, toolbox=tb)
