"""
Model file formats

Plain model:
    MAXENT <g>
    W <feat_id> <weight>            one line per id 0..g-1
    NAME <feat_id> <string>         optional

Hidden-variable model:
    HIDDEN <k>
    VALUE <name>                    k lines, in order
    OUTPUT <z> <label>              deterministic models only
    SMAP <feat_id> <history_id>     extraction tables
    EMAP <feat_id> <emitter_id>
    SELECTOR
    MAXENT ...
    EMITTER <z>                     k blocks unless deterministic
    MAXENT ...

MEMM:
    MEMM <n>
    STATE <name>                    n lines
    MODEL <name>                    one block per trained state
    FMAP <global_id> <local_id>
    MAXENT ...
"""

import logging
from typing import Dict, List, Optional, Union

import numpy as np

from ..errors import MaxentHmmError
from ..hidden.models import HiddenMaxentModel, HiddenTables
from ..maxent.models import MaxentModel
from ..sequence.models import MemmModel
from .lines import LineReader, PathLike, read_text, write_text

logger = logging.getLogger(__name__)

WEIGHT_FORMAT = "{:.17g}"

AnyModel = Union[MaxentModel, HiddenMaxentModel, MemmModel]


def _maxent_lines(model: MaxentModel) -> List[str]:
    lines = [f"MAXENT {model.num_features}"]
    lines.extend(f"W {i} {WEIGHT_FORMAT.format(float(w))}" for i, w in enumerate(model.weights))
    for i in sorted(model.names or {}):
        lines.append(f"NAME {i} {model.names[i]}")
    return lines


def _read_maxent(reader: LineReader) -> MaxentModel:
    header = reader.expect("MAXENT", 1)
    g = reader.int_at(header, 1, minimum=0)
    weights = np.full(g, np.nan)
    names: Dict[int, str] = {}
    while reader.peek() is not None and reader.peek().keyword in ("W", "NAME"):
        line = reader.next()
        if len(line.tokens) < 3:
            raise reader.error(line.no, f"{line.keyword} needs an id and a value")
        fid = reader.int_at(line, 1, minimum=0)
        if fid >= g:
            raise reader.error(line.no, f"feature id {fid} outside MAXENT {g}")
        if line.keyword == "W":
            reader.check_arity(line, 2)
            if not np.isnan(weights[fid]):
                raise reader.error(line.no, f"weight of feature {fid} given twice")
            w = reader.float_at(line, 2)
            if not np.isfinite(w) or w <= 0:
                raise reader.error(line.no, f"weight of feature {fid} must be positive, got {w}")
            weights[fid] = w
        else:
            names[fid] = line.rest()[len(line.tokens[1]):].strip()
    missing = np.flatnonzero(np.isnan(weights))
    if missing.size:
        raise reader.error(header.no, f"no weight for feature id(s) {missing[:20].tolist()}")
    return MaxentModel(weights, names or None)


def serialize_model(model: MaxentModel) -> str:
    return "\n".join(_maxent_lines(model)) + "\n"


def serialize_hidden_model(model: HiddenMaxentModel) -> str:
    lines = [f"HIDDEN {model.n_hidden}"]
    lines.extend(f"VALUE {hv}" for hv in model.hidden_values)
    if model.is_deterministic:
        lines.extend(f"OUTPUT {z} {out}" for z, out in enumerate(model.deterministic_outputs))
    if model.tables is not None:
        lines.extend(f"SMAP {f} {j}" for f, j in sorted(model.tables.selector_map.items()))
        lines.extend(f"EMAP {f} {j}" for f, j in sorted(model.tables.emitter_map.items()))
    lines.append("SELECTOR")
    lines.extend(_maxent_lines(model.selector))
    for z, emitter in enumerate(model.emitters):
        lines.append(f"EMITTER {z}")
        lines.extend(_maxent_lines(emitter))
    return "\n".join(lines) + "\n"


def serialize_memm(model: MemmModel) -> str:
    lines = [f"MEMM {len(model.states)}"]
    lines.extend(f"STATE {s}" for s in model.states)
    for s in sorted(model.per_state):
        lines.append(f"MODEL {s}")
        lines.extend(f"FMAP {g} {loc}" for g, loc in sorted(model.feature_maps.get(s, {}).items()))
        lines.extend(_maxent_lines(model.per_state[s]))
    return "\n".join(lines) + "\n"


def _read_hidden(reader: LineReader) -> HiddenMaxentModel:
    header = reader.expect("HIDDEN", 1)
    k = reader.int_at(header, 1, minimum=1)
    values = [reader.expect("VALUE", 1).tokens[1] for _ in range(k)]
    outputs: Dict[int, str] = {}
    smap: Dict[int, int] = {}
    emap: Dict[int, int] = {}
    while reader.peek() is not None and reader.peek().keyword in ("OUTPUT", "SMAP", "EMAP"):
        line = reader.next()
        reader.check_arity(line, 2)
        if line.keyword == "OUTPUT":
            z = reader.int_at(line, 1, minimum=0)
            if z >= k:
                raise reader.error(line.no, f"hidden index {z} outside HIDDEN {k}")
            outputs[z] = line.tokens[2]
        else:
            table = smap if line.keyword == "SMAP" else emap
            table[reader.int_at(line, 1, minimum=0)] = reader.int_at(line, 2, minimum=0)
    reader.expect("SELECTOR", 0)
    selector = _read_maxent(reader)
    emitters = []
    while reader.peek() is not None and reader.peek().keyword == "EMITTER":
        line = reader.expect("EMITTER", 1)
        z = reader.int_at(line, 1, minimum=0)
        if z != len(emitters):
            raise reader.error(line.no, f"expected EMITTER {len(emitters)}, got {z}")
        emitters.append(_read_maxent(reader))
    deterministic = None
    if outputs:
        if emitters:
            raise reader.error(header.no, "a model with OUTPUT lines cannot have emitters")
        if sorted(outputs) != list(range(k)):
            raise reader.error(header.no, f"OUTPUT lines must cover hidden indices 0..{k - 1}")
        deterministic = tuple(outputs[z] for z in range(k))
    tables = HiddenTables(smap, emap) if smap or emap else None
    try:
        return HiddenMaxentModel(tuple(values), selector, tuple(emitters), deterministic, tables)
    except MaxentHmmError as e:
        raise reader.error(header.no, str(e)) from None


def _read_memm(reader: LineReader) -> MemmModel:
    header = reader.expect("MEMM", 1)
    n = reader.int_at(header, 1, minimum=1)
    states = [reader.expect("STATE", 1).tokens[1] for _ in range(n)]
    per_state: Dict[str, MaxentModel] = {}
    maps: Dict[str, Dict[int, int]] = {}
    while reader.peek() is not None:
        line = reader.expect("MODEL", 1)
        state = line.tokens[1]
        if state in per_state:
            raise reader.error(line.no, f"state {state!r} has two models")
        fmap: Dict[int, int] = {}
        while reader.peek() is not None and reader.peek().keyword == "FMAP":
            fline = reader.expect("FMAP", 2)
            fmap[reader.int_at(fline, 1, minimum=0)] = reader.int_at(fline, 2, minimum=0)
        per_state[state] = _read_maxent(reader)
        maps[state] = fmap
    try:
        return MemmModel(tuple(states), per_state, maps)
    except MaxentHmmError as e:
        raise reader.error(header.no, str(e)) from None


def _finish(reader: LineReader) -> None:
    extra = reader.peek()
    if extra is not None:
        raise reader.error(extra.no, f"unexpected {extra.keyword} after the model")


def parse_model_text(text: str, source: str = "<model>") -> MaxentModel:
    reader = LineReader(text, source)
    model = _read_maxent(reader)
    _finish(reader)
    return model


def parse_hidden_text(text: str, source: str = "<model>") -> HiddenMaxentModel:
    reader = LineReader(text, source)
    model = _read_hidden(reader)
    _finish(reader)
    return model


def parse_memm_text(text: str, source: str = "<model>") -> MemmModel:
    reader = LineReader(text, source)
    return _read_memm(reader)


def parse_any_text(text: str, source: str = "<model>") -> AnyModel:
    """Dispatch on the first keyword: MAXENT, HIDDEN or MEMM"""
    reader = LineReader(text, source)
    head = reader.peek()
    first: Optional[str] = head.keyword if head is not None else None
    if first == "MAXENT":
        return parse_model_text(text, source)
    if first == "HIDDEN":
        return parse_hidden_text(text, source)
    if first == "MEMM":
        return parse_memm_text(text, source)
    raise reader.error(head.no if head is not None else 1, f"unknown model file kind {first!r}")


def read_model(path: PathLike) -> MaxentModel:
    return parse_model_text(read_text(path), str(path))


def read_any(path: PathLike) -> AnyModel:
    model = parse_any_text(read_text(path), str(path))
    logger.info(f"read {type(model).__name__} from {path}")
    return model


def write_model(model: AnyModel, path: PathLike) -> None:
    if isinstance(model, HiddenMaxentModel):
        text = serialize_hidden_model(model)
    elif isinstance(model, MemmModel):
        text = serialize_memm(model)
    else:
        text = serialize_model(model)
    write_text(path, text)
    logger.info(f"wrote {type(model).__name__} to {path}")
