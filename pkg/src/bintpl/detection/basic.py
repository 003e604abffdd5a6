"""Channel A: basic-feature matching against the inverted index.

A unit sharing at least one string literal or exported name with the target
becomes a candidate when any rule holds (all comparisons strict):

    1. common strings / unit strings            > string_proportion (0.5)
    2. common string weight                     > weight_sum (100)
       and common weight / unit string weight   > weight_proportion (0.1)
    3. common exported names                    > export_count (20)

Weights apply to strings only; exported names are counted.

The vanilla baseline instead counts strings and exported names alike:

    1. common features                          > feature_count (15)
    2. common features / unit features          > feature_proportion (0.2)
"""

import logging
from typing import Dict, List, Optional, Set, Union

from bintpl.config import BasicRules, VanillaRules
from bintpl.detection.candidates import CHANNEL_A, Candidate, MatchedFeature
from bintpl.featuredb import EXPORT, STRING, TplDatabase, UnitTotals
from bintpl.features import BinaryFeatureSet

logger = logging.getLogger(__name__)


def passes_basic_rules(
    common_strings: int,
    common_weight: float,
    common_exports: int,
    totals: UnitTotals,
    rules: BasicRules,
) -> bool:
    """Whether a unit's overlap with the target satisfies any matching rule."""
    if totals.string_count > 0 and common_strings / totals.string_count > rules.string_proportion:
        return True
    if (
        common_weight > rules.weight_sum
        and totals.string_weight > 0
        and common_weight / totals.string_weight > rules.weight_proportion
    ):
        return True
    return common_exports > rules.export_count


def passes_vanilla_rules(common_features: int, totals: UnitTotals, rules: VanillaRules) -> bool:
    """Whether a unit's overlap satisfies the vanilla baseline."""
    if common_features > rules.feature_count:
        return True
    unit_features = totals.string_count + totals.export_count
    return unit_features > 0 and common_features / unit_features > rules.feature_proportion


def match_basic(
    target: BinaryFeatureSet,
    db: TplDatabase,
    rules: Optional[Union[BasicRules, VanillaRules]] = None,
) -> List[Candidate]:
    """Channel-A candidates for target, sorted by unit id.

    rules selects the rule set: BasicRules (default) or the VanillaRules
    baseline. Each candidate's score starts as its common-feature count.
    """
    rules = rules or BasicRules()
    common: Dict[str, Set[MatchedFeature]] = {}

    for literal in target.strings:
        for unit_id in db.index.lookup(literal.value, STRING):
            common.setdefault(unit_id, set()).add(
                MatchedFeature(STRING, literal.value, db.index.weight(literal.value))
            )
    for export in target.exports:
        for unit_id in db.index.lookup(export.name, EXPORT):
            common.setdefault(unit_id, set()).add(MatchedFeature(EXPORT, export.name, 0.0))

    candidates = []
    for unit_id in sorted(common):
        features = common[unit_id]
        strings = [f for f in features if f.kind == STRING]
        n_exports = len(features) - len(strings)
        weight = sum(f.weight for f in strings)
        totals = db.unit_totals(unit_id)
        if isinstance(rules, VanillaRules):
            passed = passes_vanilla_rules(len(features), totals, rules)
        else:
            passed = passes_basic_rules(len(strings), weight, n_exports, totals, rules)
        if not passed:
            continue
        logger.debug(
            f"Channel A: {unit_id} shares {len(strings)}/{totals.string_count} strings "
            f"(weight {weight:.1f}/{totals.string_weight:.1f}) and {n_exports} exports"
        )
        candidates.append(Candidate(
            unit=db.unit(unit_id),
            channel=CHANNEL_A,
            matched_basic=frozenset(features),
            score=len(features),
        ))

    logger.info(f"Channel A: {len(candidates)} candidates from {len(common)} units sharing basic features")
    return candidates
