"""
Text file formats (events, models, sequences) and seeded synthetic data
"""

from .events import parse_events, parse_events_text, serialize_events, write_events
from .model_file import (
    parse_any_text,
    parse_hidden_text,
    parse_memm_text,
    parse_model_text,
    read_any,
    read_model,
    serialize_hidden_model,
    serialize_memm,
    serialize_model,
    write_model,
)
from .seq_file import parse_sequences, parse_sequences_text, serialize_sequences, write_sequences
from .synth import SynthResult, random_dataset, synth_generate

__all__ = [
    'parse_events', 'parse_events_text', 'serialize_events', 'write_events',
    'parse_any_text', 'parse_hidden_text', 'parse_memm_text', 'parse_model_text',
    'read_any', 'read_model', 'serialize_hidden_model', 'serialize_memm', 'serialize_model', 'write_model',
    'parse_sequences', 'parse_sequences_text', 'serialize_sequences', 'write_sequences',
    'SynthResult', 'random_dataset', 'synth_generate',
]
