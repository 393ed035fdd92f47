"""
Events file format

    # comment
    FEATURES <g>                    (optional, fixes the feature count)
    EVENT <id> [<true_label>]
    CAND <label> <feat_id>...
    END

A block without a true label is unlabeled. Without a FEATURES line the
feature count is the largest id plus one.
"""

import logging
from typing import List, Optional

from ..errors import MaxentHmmError
from ..maxent.models import Candidate, Dataset, EventBlock
from .lines import LineReader, PathLike, read_text, write_text

logger = logging.getLogger(__name__)


def parse_events_text(text: str, source: str = "<events>") -> Dataset:
    """
    Parse events from a string

    Raises:
        ParseError: with the offending line number, for any malformed input
    """
    reader = LineReader(text, source)
    events: List[EventBlock] = []
    seen_ids = set()
    declared: Optional[int] = None

    for line in reader:
        if line.keyword == "FEATURES":
            if declared is not None or events:
                raise reader.error(line.no, "FEATURES must appear once, before the first EVENT")
            reader.check_arity(line, 1)
            declared = reader.int_at(line, 1, minimum=0)
            continue
        if line.keyword != "EVENT":
            raise reader.error(line.no, f"expected EVENT, got {line.keyword}")
        if len(line.tokens) not in (2, 3):
            raise reader.error(line.no, "EVENT takes an id and an optional true label")
        event_id = line.tokens[1]
        true_label = line.tokens[2] if len(line.tokens) == 3 else None
        if event_id in seen_ids:
            raise reader.error(line.no, f"duplicate event id {event_id!r}")
        seen_ids.add(event_id)

        candidates: List[Candidate] = []
        while True:
            cand = reader.next()
            if cand.keyword == "END":
                reader.check_arity(cand, 0)
                break
            if cand.keyword != "CAND":
                raise reader.error(cand.no, f"expected CAND or END, got {cand.keyword}")
            if len(cand.tokens) < 2:
                raise reader.error(cand.no, "CAND needs a label")
            ids = [reader.int_at(cand, i, minimum=0) for i in range(2, len(cand.tokens))]
            if len(set(ids)) != len(ids):
                dupes = sorted({i for i in ids if ids.count(i) > 1})
                raise reader.error(cand.no, f"duplicate feature id(s) {dupes} in candidate {cand.tokens[1]!r}")
            candidates.append(Candidate(cand.tokens[1], tuple(sorted(ids))))

        if not candidates:
            raise reader.error(cand.no, f"event {event_id!r} has no candidates")
        try:
            events.append(EventBlock(event_id, true_label, tuple(candidates)))
        except MaxentHmmError as e:
            raise reader.error(cand.no, str(e)) from None

    widest = max((ev.max_feature() for ev in events), default=-1) + 1
    if declared is not None and widest > declared:
        raise reader.error(reader.last_line_no, f"feature id {widest - 1} exceeds FEATURES {declared}")
    if not events:
        logger.warning(f"{source}: no events")
    data = Dataset(tuple(events), declared if declared is not None else widest)
    logger.info(f"read {len(data)} events over {data.num_features} features from {source}")
    return data


def parse_events(path: PathLike) -> Dataset:
    return parse_events_text(read_text(path), str(path))


def serialize_events(data: Dataset, header: Optional[str] = None) -> str:
    """Canonical text form: sorted ids, one candidate per line, FEATURES always written"""
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.append(f"FEATURES {data.num_features}")
    for ev in data.events:
        lines.append(f"EVENT {ev.event_id}" + ("" if ev.true_label is None else f" {ev.true_label}"))
        for c in ev.candidates:
            lines.append(" ".join(["CAND", c.label] + [str(i) for i in c.active]))
        lines.append("END")
    return "\n".join(lines) + "\n"


def write_events(data: Dataset, path: PathLike, header: Optional[str] = None) -> None:
    write_text(path, serialize_events(data, header))
    logger.info(f"wrote {len(data)} events to {path}")
