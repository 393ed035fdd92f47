"""
Sequence file format

    SEQ <id>
    STEP <pos> <src_state> <obs_id> [<gold_next>]
    CAND <next_state> <feat_id>...
    ENDSEQ

Positions start at 1 and never skip; several STEP lines may share a
position when they leave different source states.
"""

import logging
from typing import List

from ..errors import MaxentHmmError
from ..maxent.models import Candidate
from ..sequence.models import SeqEventBlock, SeqSequence
from .lines import LineReader, PathLike, read_text, write_text

logger = logging.getLogger(__name__)


def parse_sequences_text(text: str, source: str = "<sequences>") -> List[SeqSequence]:
    reader = LineReader(text, source)
    sequences: List[SeqSequence] = []
    seen = set()
    for line in reader:
        if line.keyword != "SEQ":
            raise reader.error(line.no, f"expected SEQ, got {line.keyword}")
        reader.check_arity(line, 1)
        seq_id = line.tokens[1]
        if seq_id in seen:
            raise reader.error(line.no, f"duplicate sequence id {seq_id!r}")
        seen.add(seq_id)

        blocks: List[SeqEventBlock] = []
        position = 0
        while True:
            step = reader.next()
            if step.keyword == "ENDSEQ":
                reader.check_arity(step, 0)
                break
            if step.keyword != "STEP":
                raise reader.error(step.no, f"expected STEP or ENDSEQ, got {step.keyword}")
            if len(step.tokens) not in (4, 5):
                raise reader.error(step.no, "STEP takes a position, a source state, an observation and a gold next state")
            pos = reader.int_at(step, 1, minimum=1)
            if pos not in (position, position + 1) or (position == 0 and pos != 1):
                raise reader.error(step.no, f"position {pos} does not follow position {position}")
            position = pos
            gold = step.tokens[4] if len(step.tokens) == 5 else None

            candidates = []
            while reader.peek() is not None and reader.peek().keyword == "CAND":
                cand = reader.next()
                if len(cand.tokens) < 2:
                    raise reader.error(cand.no, "CAND needs a next state")
                ids = [reader.int_at(cand, i, minimum=0) for i in range(2, len(cand.tokens))]
                try:
                    candidates.append(Candidate.of(cand.tokens[1], ids))
                except MaxentHmmError as e:
                    raise reader.error(cand.no, str(e)) from None
            try:
                blocks.append(SeqEventBlock(seq_id, pos, step.tokens[2], step.tokens[3], tuple(candidates), gold))
            except MaxentHmmError as e:
                raise reader.error(step.no, str(e)) from None
        try:
            sequences.append(SeqSequence(seq_id, tuple(blocks)))
        except MaxentHmmError as e:
            raise reader.error(step.no, str(e)) from None

    if not sequences:
        logger.warning(f"{source}: no sequences")
    logger.info(f"read {len(sequences)} sequences from {source}")
    return sequences


def parse_sequences(path: PathLike) -> List[SeqSequence]:
    return parse_sequences_text(read_text(path), str(path))


def serialize_sequences(sequences: List[SeqSequence]) -> str:
    lines = []
    for seq in sequences:
        lines.append(f"SEQ {seq.sequence_id}")
        for b in sorted(seq.blocks, key=lambda b: (b.position, b.source_state)):
            gold = "" if b.gold_next is None else f" {b.gold_next}"
            lines.append(f"STEP {b.position} {b.source_state} {b.observation}{gold}")
            for c in b.candidates:
                lines.append(" ".join(["CAND", c.label] + [str(i) for i in c.active]))
        lines.append("ENDSEQ")
    return "\n".join(lines) + "\n" if lines else ""


def write_sequences(sequences: List[SeqSequence], path: PathLike) -> None:
    write_text(path, serialize_sequences(sequences))
    logger.info(f"wrote {len(sequences)} sequences to {path}")
