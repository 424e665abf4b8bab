"""Source languages, path detection and the tree-sitter grammar registry.
"""
import enum
import logging
import os
import threading
from typing import Callable, Dict

from tree_sitter import Language as TSLanguage, Parser

from ..errors import UnsupportedLanguageError

logger = logging.getLogger(__name__)


class Language(enum.Enum):
    C = 'c'
    CPP = 'cpp'
    JAVA = 'java'
    PYTHON = 'python'
    JAVASCRIPT = 'javascript'
    GO = 'go'
    PHP = 'php'
    RUBY = 'ruby'
    RUST = 'rust'
    OTHER = 'other'


_EXTENSIONS = {
    '.c': Language.C, '.h': Language.C,
    '.cc': Language.CPP, '.cpp': Language.CPP, '.cxx': Language.CPP, '.c++': Language.CPP,
    '.hh': Language.CPP, '.hpp': Language.CPP, '.hxx': Language.CPP, '.h++': Language.CPP,
    '.ipp': Language.CPP, '.inl': Language.CPP,
    '.java': Language.JAVA,
    '.py': Language.PYTHON,
    '.js': Language.JAVASCRIPT, '.jsx': Language.JAVASCRIPT, '.mjs': Language.JAVASCRIPT,
    '.go': Language.GO,
    '.php': Language.PHP,
    '.rb': Language.RUBY,
    '.rs': Language.RUST,
}

_ALIASES = {
    'c++': Language.CPP,
    'cxx': Language.CPP,
    'js': Language.JAVASCRIPT,
    'py': Language.PYTHON,
}


def language_for_path(path: str) -> Language:
    """Guesses the language of a file from its extension."""
    _, ext = os.path.splitext(path or '')
    return _EXTENSIONS.get(ext.lower(), Language.OTHER)


def parse_language(value: str) -> Language:
    """Parses a language tag such as `C`, `c++` or `cpp`."""
    key = (value or '').strip().lower()
    if key in _ALIASES:
        return _ALIASES[key]
    try:
        return Language(key)
    except ValueError:
        return Language.OTHER


def _load_c():
    import tree_sitter_c
    return tree_sitter_c.language()


def _load_cpp():
    import tree_sitter_cpp
    return tree_sitter_cpp.language()


_loaders: Dict[Language, Callable] = {}
_grammars: Dict[Language, TSLanguage] = {}
_lock = threading.Lock()
_local = threading.local()


def register_grammar(language: Language, loader: Callable) -> None:
    """Registers a grammar plug-in.

    :param language: the language served by the grammar
    :param loader: zero-argument callable returning a tree-sitter language pointer
    """
    with _lock:
        _loaders[language] = loader
        _grammars.pop(language, None)


def grammar(language: Language) -> TSLanguage:
    """Returns the (shared, read-only) tree-sitter language for `language`.

    :raises UnsupportedLanguageError: when no grammar is registered or loadable
    """
    with _lock:
        if language in _grammars:
            return _grammars[language]
        loader = _loaders.get(language)
        if loader is None:
            raise UnsupportedLanguageError(language.value)
        try:
            loaded = TSLanguage(loader())
        except ImportError as e:
            logger.warning('Grammar for %s is registered but not installed: %s' % (language.value, e))
            raise UnsupportedLanguageError(language.value)
        _grammars[language] = loaded
        return loaded


def is_supported(language: Language) -> bool:
    """Tests whether a grammar for `language` is registered and loadable."""
    try:
        grammar(language)
    except UnsupportedLanguageError:
        return False
    return True


def parser_for(language: Language) -> Parser:
    """Returns a parser for `language`; parsers are cached per thread."""
    parsers = getattr(_local, 'parsers', None)
    if parsers is None:
        parsers = _local.parsers = {}
    if language not in parsers:
        parsers[language] = Parser(grammar(language))
    return parsers[language]


register_grammar(Language.C, _load_c)
register_grammar(Language.CPP, _load_cpp)
