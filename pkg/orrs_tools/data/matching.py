import logging
from collections import defaultdict, namedtuple
from dataclasses import astuple

from orrs_tools.data.exceptions import DuplicateInspectionException
from orrs_tools.data.records import MatchedSample, UnmatchedRecord, UnmatchedReasons, normalize_plate
from orrs_tools.data.vsp import compute_vsp


matching_logger = logging.getLogger(__name__)

MatchResult = namedtuple('MatchResult', ('matched', 'unmatched'))
QcResult = namedtuple('QcResult', ('kept', 'dropped'))


def _orrs_sort_key(record):
    return (record.timestamp, normalize_plate(record.plate), astuple(record))


def _check_duplicate_inspections(im_records):
    seen = set()
    offenders = []
    for record in im_records:
        key = (record.vin, record.inspection_date)
        if key in seen and key not in offenders:
            offenders.append(key)
        seen.add(key)
    if offenders:
        raise DuplicateInspectionException(sorted(offenders))


def _select_inspection(candidates, timestamp):
    """Most recent inspection at or before ``timestamp``; else the nearest later one.

    Returns (inspection, used_fallback). ``candidates`` must be sorted by (date, vin).
    """
    preceding = [c for c in candidates if c.inspection_timestamp <= timestamp]
    if preceding:
        latest = preceding[-1].inspection_date
        return [c for c in preceding if c.inspection_date == latest][-1], False
    return candidates[0], True


def match_records(orrs, im, site_grades=None):
    _check_duplicate_inspections(im)
    site_grades = site_grades or {}

    registry = defaultdict(list)
    for record in im:
        registry[normalize_plate(record.plate)].append(record)
    for plate in registry:
        registry[plate].sort(key=lambda r: (r.inspection_date, r.vin))

    matched, unmatched = [], []
    fallbacks = 0
    for record in sorted(orrs, key=_orrs_sort_key):
        plate = normalize_plate(record.plate)
        if not plate:
            unmatched.append(UnmatchedRecord(record, UnmatchedReasons.EMPTY_PLATE))
            continue
        candidates = registry.get(plate)
        if not candidates:
            unmatched.append(UnmatchedRecord(record, UnmatchedReasons.NO_REGISTRY_ENTRY))
            continue
        inspection, fallback = _select_inspection(candidates, record.timestamp)
        fallbacks += int(fallback)
        vsp = compute_vsp(record.velocity, record.acceleration, site_grades.get(record.site_id, 0.0))
        matched.append(MatchedSample(record, inspection, vsp, fallback))

    if fallbacks:
        matching_logger.warning(
            "{0} ORRS records had no preceding inspection; joined the nearest later one.".format(fallbacks)
        )
    matching_logger.info("Matched {0} ORRS records, {1} unmatched.".format(len(matched), len(unmatched)))
    return MatchResult(matched, unmatched)


def apply_qc(records, policy):
    kept, dropped = [], []
    for record in records:
        if policy.violates(record):
            dropped.append(record)
        else:
            kept.append(record)
    matching_logger.info("QC kept {0}, dropped {1} of {2} records ({3:.2%}).".format(
        len(kept), len(dropped), len(records), len(dropped) / len(records) if records else 0.0
    ))
    return QcResult(kept, dropped)
