# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`persistence` reads and writes the artifacts of a run:

* the chain, one wide CSV per chain with a column per scalar parameter plus ``scan`` and ``accepted``, and a JSON
  sidecar holding the seed, the configuration echo, the acceptance rate, the dimensions and a fingerprint of the dataset;
* checkpoints, versioned binary files starting with the magic bytes ``LACSHCKPT1`` followed by a one-byte format version
  and a pickled payload;
* the :class:`~lacsh.core.entity.Dataset`, as ``dataset.csv`` plus ``dataset.json``.

All writers are byte-deterministic: floats are written with 17 significant digits and JSON keys are sorted.
"""
import hashlib
import json
import os
import pickle
from collections import OrderedDict

import numpy as np
import pandas as pd

from ..core.entity import ChainStore, Dataset, column_key
from ..core.errors import InvalidCheckpoint, MissingInput, ShapeMismatch, MalformedRow

CHECKPOINT_MAGIC = b'LACSHCKPT1'
CHECKPOINT_VERSION = 1
FLOAT_FORMAT = '%.17g'


def _sidecar_path(chain_path):
    return os.path.splitext(str(chain_path))[0] + '.json'


def _write_json(obj, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write('\n')


def _read_json(path):
    if not os.path.exists(path):
        raise MissingInput('file not found: {}'.format(path))
    with open(path, encoding='utf-8') as f:
        return json.load(f)


def dataset_fingerprint(data):
    """
    SHA-256 digest of the numeric content and unit identifiers of a dataset, used to match chains with datasets.
    """
    h = hashlib.sha256()
    for arr in (data.Y, data.Xstar, data.Ystar, data.T, data.coords):
        h.update(np.ascontiguousarray(arr, dtype='<f8').tobytes())
        h.update(str(arr.shape).encode())
    h.update('\x1f'.join(data.unit_ids).encode('utf-8'))
    h.update(str(data.anchor_index).encode())
    return h.hexdigest()


def chain_metadata(chain, data=None):
    """
    The sidecar content of *chain* as a dict.
    """
    meta = {
        'seed': chain.seed,
        'config': chain.config,
        'acceptance_rate': chain.acceptance_rate,
        'acceptance_count': chain.acceptance_count,
        'n_proposals': chain.n_proposals,
        'n_draws': len(chain),
        'anchor_index': chain.anchor_index,
        'block_names': chain.block_names,
        'proposal_covariance': None if chain.proposal_covariance is None else chain.proposal_covariance.tolist(),
        'N': chain.N,
        'P': chain.P,
        'n_gamma': int(chain.gamma.shape[1]),
        'n_zeta': 0 if chain.zeta is None else int(chain.zeta.shape[1]),
    }
    if data is not None:
        meta['K'] = data.K
        meta['Q'] = data.Q
        meta['dataset_fingerprint'] = dataset_fingerprint(data)
    return meta


def write_chain(chain, path, data=None):
    """
    Write *chain* to the CSV *path* and its metadata to the sidecar with the same stem and a ``.json`` suffix.
    """
    names, matrix = chain.scalar_columns()
    frame = pd.DataFrame(matrix, columns=names)
    frame['scan'] = chain.scan_index
    frame['accepted'] = chain.accepted.astype(int)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    _write_json(chain_metadata(chain, data), _sidecar_path(path))


def read_chain(path):
    """
    Read a chain written by :func:`write_chain`.

    :return: a tuple ``(chain, metadata)``
    """
    if not os.path.exists(path):
        raise MissingInput('chain file not found: {}'.format(path))
    meta = _read_json(_sidecar_path(path))
    try:
        frame = pd.read_csv(path, float_precision='round_trip')
    except (pd.errors.ParserError, ValueError) as e:
        raise MalformedRow('cannot parse chain file {}: {}'.format(path, e))
    names = [c for c in frame.columns if c not in ('scan', 'accepted')]
    chain = ChainStore.from_scalar_columns(
        names, frame[names].to_numpy(dtype=float), scan_index=frame['scan'].to_numpy(dtype=int),
        accepted=frame['accepted'].to_numpy(dtype=bool), acceptance_count=meta['acceptance_count'],
        n_proposals=meta['n_proposals'], proposal_covariance=meta['proposal_covariance'],
        block_names=meta['block_names'], seed=meta['seed'], config=meta['config'], anchor_index=meta['anchor_index'])
    if chain.N != meta['N'] or chain.P != meta['P']:
        raise ShapeMismatch('chain columns disagree with the metadata dimensions')
    return chain, meta


def save_checkpoint(payload, path):
    """
    Write the checkpoint *payload* (a picklable dict) to *path*.
    """
    tmp = str(path) + '.tmp'
    with open(tmp, 'wb') as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(bytes([CHECKPOINT_VERSION]))
        pickle.dump(payload, f, protocol=4)
    os.replace(tmp, path)


def load_checkpoint(path):
    """
    Read a checkpoint written by :func:`save_checkpoint`.

    :raises InvalidCheckpoint: if the magic bytes or the version do not match
    """
    if not os.path.exists(path):
        raise MissingInput('checkpoint not found: {}'.format(path))
    with open(path, 'rb') as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise InvalidCheckpoint('{} is not a lacsh checkpoint'.format(path))
        version = f.read(1)
        if not version or version[0] != CHECKPOINT_VERSION:
            raise InvalidCheckpoint('unsupported checkpoint version {!r}'.format(version))
        return pickle.load(f)


def save_dataset(data, directory):
    """
    Write *data* to ``dataset.csv`` (one row per unit) and ``dataset.json`` (names, anchor and logs) in *directory*.
    """
    os.makedirs(directory, exist_ok=True)
    frame = pd.DataFrame({'unit_id': data.unit_ids, 'name': data.unit_names, 'income_group': data.income_group,
                          'lat': data.coords[:, 0], 'lon': data.coords[:, 1]})
    for group, names, matrix in data._groups():
        for j, name in enumerate(names):
            frame[column_key(group, name)] = matrix[:, j]
    frame.to_csv(os.path.join(directory, 'dataset.csv'), index=False, float_format=FLOAT_FORMAT,
                 lineterminator='\n')
    meta = {'anchor_index': data.anchor_index, 'metric_names': data.metric_names,
            'covariate_names': data.covariate_names, 'lagged_metric_names': data.lagged_metric_names,
            'treatment_name': data.treatment_name, 'prune_threshold': data.prune_threshold,
            'standardization_log': [[k, list(v)] for k, v in data.standardization_log.items()],
            'pruning_log': data.pruning_log}
    _write_json(meta, os.path.join(directory, 'dataset.json'))


def load_dataset(directory):
    """
    Read a dataset written by :func:`save_dataset`.
    """
    meta = _read_json(os.path.join(directory, 'dataset.json'))
    csv_path = os.path.join(directory, 'dataset.csv')
    if not os.path.exists(csv_path):
        raise MissingInput('file not found: {}'.format(csv_path))
    frame = pd.read_csv(csv_path, float_precision='round_trip', dtype={'unit_id': str, 'name': str,
                                                                       'income_group': str},
                        keep_default_na=False)

    def cols(group, names):
        keys = [column_key(group, n) for n in names]
        return frame[keys].to_numpy(dtype=float) if keys else np.empty((len(frame), 0))

    return Dataset(Y=cols('Y', meta['metric_names']), Xstar=cols('X', meta['covariate_names']),
                   Ystar=cols('Ystar', meta['lagged_metric_names']),
                   T=frame[column_key('T', meta['treatment_name'])].to_numpy(dtype=float),
                   coords=frame[['lat', 'lon']].to_numpy(dtype=float), unit_ids=list(frame['unit_id']),
                   unit_names=list(frame['name']), income_group=list(frame['income_group']),
                   anchor_index=meta['anchor_index'], metric_names=meta['metric_names'],
                   covariate_names=meta['covariate_names'], lagged_metric_names=meta['lagged_metric_names'],
                   treatment_name=meta['treatment_name'],
                   standardization_log=OrderedDict((k, tuple(v)) for k, v in meta['standardization_log']),
                   pruning_log=meta['pruning_log'], prune_threshold=meta['prune_threshold'])


__all__ = ['CHECKPOINT_MAGIC', 'CHECKPOINT_VERSION', 'write_chain', 'read_chain', 'chain_metadata',
           'dataset_fingerprint', 'save_checkpoint', 'load_checkpoint', 'save_dataset', 'load_dataset']
