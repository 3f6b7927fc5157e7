import json
import logging

import numpy as np

from badmarket import vocabularies
from badmarket.economy import CommoditySpace, Consumer, Economy, Technology
from badmarket.errors import DimensionError, ParseError, SchemaError
from badmarket.firms import ActivityVector
from badmarket.preferences import Externality, PreferenceSpec

# readers.py: turns documents into objects. Validation of the economy's assumptions
# lives in economy.validate_economy; only structure is checked here.

_log = logging.getLogger(__name__)


def _parse(text, what):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{what} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SchemaError(f"{what} must be a JSON object")
    return doc


def _read_text(path):
    with open(path, 'r', encoding='utf-8') as file:
        return file.read()


def _require(block, key, where):
    if not isinstance(block, dict) or key not in block:
        raise SchemaError(f"{where}: missing field '{key}'")
    return block[key]


def _floats(values, where, allow_null=False):
    if not isinstance(values, list):
        raise SchemaError(f"{where}: expected a list of numbers")
    out = []
    for v in values:
        if v is None and allow_null:
            out.append(np.inf)
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append(float(v))
        else:
            raise SchemaError(f"{where}: {v!r} is not a number")
    return tuple(out)


def _preference(block, where):
    family = _require(block, 'family', where)
    params = _require(block, 'params', where)
    if not isinstance(params, dict):
        raise SchemaError(f"{where}: params must be an object")
    ext = block.get('externality')
    externality = None
    if ext is not None:
        externality = Externality(
            gamma=_floats(_require(ext, 'gamma', f"{where}.externality"), f"{where}.externality.gamma"),
            statistic=ext.get('statistic', 'mean_allocation'),
            shift=_floats(ext.get('shift') or [], f"{where}.externality.shift"),
        )
    try:
        return PreferenceSpec(family, params, externality=externality, scale=block.get('scale', 1.0))
    except SchemaError:
        raise
    except (TypeError, KeyError, ValueError) as e:
        raise SchemaError(f"{where}: malformed params ({e})") from e


def economy_from_dict(doc):
    """
    Build an Economy from a parsed document.

    Optional fields and their defaults: consumer ``weight`` 1/n, ``shares`` empty when
    there are no firms, ``bounds`` all null (+inf), firm ``offset`` zero and ``id``
    firm{j}, ``monotone_witnesses`` empty, ``metadata`` empty.

    Raises
    ------
    SchemaError: a required field is missing or mistyped, or dimensions disagree.
    """
    for key in vocabularies.document_keys:
        if key == 'monotone_witnesses':
            continue
        _require(doc, key, 'economy')
    unknown = set(doc) - set(vocabularies.document_keys) - set(vocabularies.optional_document_keys)
    if unknown:
        _log.warning(f"ignoring unknown economy fields: {sorted(unknown)}")

    cblock = doc['commodities']
    ell = _require(cblock, 'ell', 'commodities')
    try:
        commodities = CommoditySpace(
            ell=ell,
            bad_count=cblock.get('bad_count', 0),
            regulated_count=cblock.get('regulated_count', 0),
            labels=tuple(cblock.get('labels') or ()),
        )
    except (TypeError, ValueError) as e:
        raise SchemaError(f"commodities: {e}") from e

    if not isinstance(doc['consumers'], list) or not doc['consumers']:
        raise SchemaError("consumers must be a nonempty list")
    if not isinstance(doc['firms'], list):
        raise SchemaError("firms must be a list")
    n = len(doc['consumers'])

    firms = []
    for j, fblock in enumerate(doc['firms']):
        where = f"firms[{j}]"
        kind = _require(fblock, 'kind', where)
        gens = fblock.get('generators') or []
        if not isinstance(gens, list):
            raise SchemaError(f"{where}: generators must be a list")
        try:
            firms.append(
                Technology(
                    kind=kind,
                    offset=_floats(fblock.get('offset') or [], f"{where}.offset"),
                    generators=tuple(_floats(g, f"{where}.generators") for g in gens),
                    free_disposal=bool(fblock.get('free_disposal', False)),
                    id=fblock.get('id'),
                )
            )
        except DimensionError as e:
            raise SchemaError(f"{where}: {e}") from e

    consumers = []
    for i, block in enumerate(doc['consumers']):
        where = f"consumers[{i}]"
        endowment = _floats(_require(block, 'endowment', where), f"{where}.endowment")
        shares = block.get('shares')
        if shares is None:
            if firms:
                raise SchemaError(f"{where}: missing field 'shares'")
            shares = []
        bounds = block.get('bounds')
        if bounds is None:
            bounds = [None] * len(endowment)
        try:
            consumers.append(
                Consumer(
                    id=block.get('id', f"c{i + 1}"),
                    weight=float(block.get('weight', 1.0 / n)),
                    endowment=endowment,
                    shares=_floats(shares, f"{where}.shares"),
                    bounds=_floats(bounds, f"{where}.bounds", allow_null=True),
                    preference=_preference(_require(block, 'preference', where), f"{where}.preference"),
                )
            )
        except SchemaError:
            raise
        except (TypeError, ValueError) as e:
            raise SchemaError(f"{where}: {e}") from e

    witnesses = doc.get('monotone_witnesses') or {}
    if not isinstance(witnesses, dict):
        raise SchemaError("monotone_witnesses must be an object keyed by commodity index")
    try:
        witnesses = {int(k): tuple(v) for k, v in witnesses.items()}
    except (TypeError, ValueError) as e:
        raise SchemaError(f"monotone_witnesses: keys must be commodity indices ({e})") from e

    try:
        return Economy(
            commodities,
            tuple(consumers),
            firms=tuple(firms),
            monotone_witnesses=witnesses,
            metadata=doc.get('metadata') or {},
        )
    except DimensionError as e:
        raise SchemaError(str(e)) from e


def load_economy(text):
    """
    Parse an economy document.

    Parameters
    ----------
    text (str): JSON economy document.

    Returns
    -------
    Economy

    Raises
    ------
    ParseError: the text is not JSON.
    SchemaError: a field is missing, mistyped or of the wrong size.
    """
    return economy_from_dict(_parse(text, 'economy document'))


def read_economy(path):
    return load_economy(_read_text(path))


def quota_scheme_from_dict(doc):
    from badmarket.quota import QuotaScheme

    t = _require(doc, 'regulated_count', 'quota')
    quotas = _require(doc, 'quotas', 'quota')
    if not isinstance(quotas, dict):
        raise SchemaError("quota: quotas must be an object keyed by firm id")
    return QuotaScheme(
        regulated_count=t,
        quotas={str(k): _floats(v, f"quota.quotas[{k}]") for k, v in quotas.items()},
    )


def read_quota_scheme(path):
    """Read a quota document ``{regulated_count, quotas: {firm-id: t-vector}}``."""
    return quota_scheme_from_dict(_parse(_read_text(path), 'quota document'))


def _per_id(block, where):
    if not isinstance(block, dict):
        raise SchemaError(f"certificate.{where} must be an object keyed by id")
    ids = tuple(block)
    return ids, [_floats(v, f"certificate.{where}[{k}]", allow_null=True) for k, v in block.items()]


def certificate_from_dict(doc):
    """
    Build an EquilibriumCertificate (or QuotaCertificate for kind 'quota').

    Consumer and firm order follow the order of the keys in ``bundles`` and
    ``activities``.
    """
    from badmarket.solver import EquilibriumCertificate

    price = _floats(_require(doc, 'price', 'certificate'), 'certificate.price')
    consumer_ids, bundles = _per_id(_require(doc, 'bundles', 'certificate'), 'bundles')
    firm_ids, levels = _per_id(doc.get('activities', {}), 'activities')
    prod_ids, productions = _per_id(doc.get('productions', {}), 'productions')
    if prod_ids != firm_ids:
        raise SchemaError("certificate activities and productions name different firms")
    ell = len(price)
    if any(len(x) != ell for x in bundles) or any(len(y) != ell for y in productions):
        raise SchemaError(f"certificate vectors must have length {ell}")
    fields = dict(
        price=np.array(price),
        bundles=np.array(bundles).reshape(len(consumer_ids), ell),
        activities=tuple(ActivityVector(a) for a in levels),
        productions=np.array(productions).reshape(len(firm_ids), ell),
        consumer_ids=consumer_ids,
        firm_ids=firm_ids,
        residuals=doc.get('residuals') or {},
        free_disposal=bool(doc.get('free_disposal', False)),
    )
    if doc.get('kind', 'equilibrium') == 'quota':
        from badmarket.quota import QuotaCertificate

        rents = _require(doc, 'rents', 'certificate')
        return QuotaCertificate(
            **fields,
            rents=tuple(float(rents[f]) for f in firm_ids),
            compliance_residual=np.array(_floats(_require(doc, 'compliance_residual', 'certificate'), 'compliance_residual')),
            scheme=quota_scheme_from_dict(_require(doc, 'scheme', 'certificate')),
        )
    return EquilibriumCertificate(**fields)


def read_certificate(path):
    """
    Read a certificate document.

    Raises
    ------
    ParseError: the file is not JSON.
    SchemaError: a field is missing or vectors have inconsistent lengths.
    """
    return certificate_from_dict(_parse(_read_text(path), 'certificate document'))
