from .comments import strip_comments, strip_source_comments
from .functions import FunctionChanges, FunctionPair, changed_functions
from .ir import Statement, StatementIR, build_statement_ir
from .languages import Language, language_for_path, parse_language, register_grammar
from .tree import SyntaxNode, SyntaxTree, parse_source
