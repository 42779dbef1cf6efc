"""
Vocabulary and linearization of trajectories into token sequences.
"""

from geoformer.tokenizer.linearizer import (
    DecodeError,
    SignatureError,
    TokenizationError,
    WindowError,
    build_context,
    decode_day,
    decode_window,
    encode_day,
    encode_uid,
    linearize_window,
    parse_signature,
    render_signature,
    signature_from_day,
)
from geoformer.tokenizer.vocabulary import Vocabulary, build_vocabulary

__all__ = [
    "DecodeError",
    "SignatureError",
    "TokenizationError",
    "Vocabulary",
    "WindowError",
    "build_context",
    "build_vocabulary",
    "decode_day",
    "decode_window",
    "encode_day",
    "encode_uid",
    "linearize_window",
    "parse_signature",
    "render_signature",
    "signature_from_day",
]
