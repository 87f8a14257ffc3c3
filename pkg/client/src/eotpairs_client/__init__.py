"""Consumer library for benchmark pair definition files."""

from .client import ClientPair, PairValidationError, load_pair
from .pairfile import PairFormatError, dumps_canonical, load_document

__version__ = "0.1.0"
