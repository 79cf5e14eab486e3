"""Word-level highlighting of medical chat messages: TF-IDF, LIME over issue classifiers,
and a lexicon-pretrained bidirectional LSTM tagger."""

from .corpus import Conversation, Message, Token, load_dataset, preprocess, tokenize
from .errors import HighlightError

__version__ = "0.1.0"

__all__ = ["Conversation", "Message", "Token", "HighlightError", "load_dataset", "preprocess", "tokenize"]
