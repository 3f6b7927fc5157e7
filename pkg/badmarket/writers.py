import json
import logging
from numbers import Number

import numpy as np

_log = logging.getLogger(__name__)


def _number(value):
    """Plain float for JSON; +-inf and nan become null."""
    value = float(value)
    return value if np.isfinite(value) else None


def _numbers(values):
    return [_number(v) for v in np.asarray(values, dtype=float).ravel()]


def _jsonable(value):
    """Convert numpy scalars/arrays and tuples inside metadata to JSON types."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Number):
        return _number(value)
    if value is None or isinstance(value, str):
        return value
    _log.warning(f"converting metadata value {value!r} of type {type(value).__name__} to string")
    return str(value)


def preference_to_dict(spec):
    block = {'family': spec.family, 'params': _jsonable(dict(spec.params))}
    if spec.externality is not None:
        block['externality'] = {
            'gamma': _numbers(spec.externality.gamma),
            'statistic': spec.externality.statistic,
        }
        if spec.externality.shift:
            block['externality']['shift'] = _numbers(spec.externality.shift)
    else:
        block['externality'] = None
    if spec.scale != 1.0:
        block['scale'] = float(spec.scale)
    return block


def economy_to_dict(econ):
    """
    Economy document as a JSON-ready dict.

    Bounds of +inf are written as null; witness keys are the internal commodity
    indices as strings.
    """
    cs = econ.commodities
    return {
        'commodities': {
            'ell': cs.ell,
            'bad_count': cs.bad_count,
            'regulated_count': cs.regulated_count,
            'labels': list(cs.labels),
        },
        'consumers': [
            {
                'id': c.id,
                'weight': float(c.weight),
                'endowment': _numbers(c.endowment),
                'shares': _numbers(c.shares),
                'bounds': _numbers(c.bounds),
                'preference': preference_to_dict(c.preference),
            }
            for c in econ.consumers
        ],
        'firms': [
            {
                'id': f.id,
                'kind': f.kind,
                'offset': _numbers(f.offset),
                'generators': [_numbers(g) for g in f.generators],
                'free_disposal': f.free_disposal,
            }
            for f in econ.firms
        ],
        'monotone_witnesses': {str(k): list(v) for k, v in sorted(econ.monotone_witnesses.items())},
        'metadata': _jsonable(econ.metadata),
    }


def quota_scheme_to_dict(scheme):
    return {
        'regulated_count': scheme.regulated_count,
        'quotas': {firm_id: _numbers(m) for firm_id, m in scheme.quotas.items()},
    }


def certificate_to_dict(cert):
    """
    Certificate document as a JSON-ready dict.

    Floats are written with repr, the shortest decimal that reads back to the same
    double (at most 17 significant digits).
    """
    doc = {
        'kind': 'equilibrium',
        'free_disposal': bool(cert.free_disposal),
        'price': _numbers(cert.price),
        'bundles': {cid: _numbers(x) for cid, x in zip(cert.consumer_ids, cert.bundles)},
        'activities': {fid: _numbers(a.levels) for fid, a in zip(cert.firm_ids, cert.activities)},
        'productions': {fid: _numbers(y) for fid, y in zip(cert.firm_ids, cert.productions)},
        'residuals': _jsonable(cert.residuals),
    }
    if hasattr(cert, 'rents'):
        doc['kind'] = 'quota'
        doc['rents'] = {fid: _number(r) for fid, r in zip(cert.firm_ids, cert.rents)}
        doc['compliance_residual'] = _numbers(cert.compliance_residual)
        doc['scheme'] = quota_scheme_to_dict(cert.scheme)
    return doc


def _save(doc, output_file):
    text = json.dumps(doc, indent=2, allow_nan=False)
    with open(output_file, 'w', encoding='utf-8') as file:
        file.write(text + "\n")
    return True


def save_economy(econ, output_file='economy.json'):
    """
    Write an economy document.

    Parameters
    ----------
    econ (Economy): the economy.
    output_file (str): destination path.

    Returns
    -------
    bool: True once written.
    """
    return _save(economy_to_dict(econ), output_file)


def save_certificate(cert, output_file='certificate.json'):
    """Write an equilibrium or quota certificate document. Returns True once written."""
    return _save(certificate_to_dict(cert), output_file)


def save_quota_scheme(scheme, output_file='quota.json'):
    return _save(quota_scheme_to_dict(scheme), output_file)
