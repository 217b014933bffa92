"""Controllable table-to-text generation with constraint graphs."""

from .core import (
    BOS,
    BOS_ID,
    EOS,
    EOS_ID,
    UNK,
    UNK_ID,
    ControlAlphabet,
    ControlStateSeq,
    DataTable,
    Example,
    Vocabulary,
    build_vocab,
    detokenize,
    tokenize,
)
from .errors import (
    AlignmentError,
    AlphabetError,
    CompatibilityError,
    ConstraintViolation,
    DomainError,
    ExportError,
    FormatError,
    GraphError,
    IoError,
    NoFeasibleOutput,
    NumericalError,
    RangeTooLarge,
    RegexSyntaxError,
    SchemaError,
    SteergenError,
)

__version__ = "0.1.0"
