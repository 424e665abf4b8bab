"""Command-line application: one subcommand per corpus task.
"""
import logging
import sys
from dataclasses import fields
from typing import List, Optional, Sequence

from deriva.core import BaseCLI, format_exception, init_logging

from . import __version__
from .corpus.filters import PRESETS
from .corpus.splits import SplitStrategy
from .enrich.representations import Representation
from .enrich.slicing import EnrichmentLevel
from .errors import ConfigurationError, VfcError
from .options import PipelineConfig
from .tasks import TASKS, build_criteria
from .tasks.records import DEDUP_MODES

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_CONFIG_ERROR = 2

_CONFIG_FIELDS = frozenset(f.name for f in fields(PipelineConfig))

# server connection flags of the base CLI; the corpus tasks never contact a server
_SERVER_FLAGS = frozenset(('host', 'credential_file', 'token', 'oauth2_token'))


def _csv(value: str) -> List[str]:
    return [item.strip() for item in value.split(',') if item.strip()]


class CorpusApp(BaseCLI):

    def __init__(self, description, epilog):
        super().__init__(description, epilog, __version__)
        self._remove_server_flags()
        self._add_commands()

    def _remove_server_flags(self):
        parser = self.parser
        for action in [a for a in parser._actions if a.dest in _SERVER_FLAGS]:
            parser._remove_action(action)
            for group in parser._action_groups + parser._mutually_exclusive_groups:
                if action in group._group_actions:
                    group._group_actions.remove(action)
            for option in action.option_strings:
                parser._option_string_actions.pop(option, None)
        parser._mutually_exclusive_groups[:] = [g for g in parser._mutually_exclusive_groups if g._group_actions]

    def _add_commands(self):
        commands = self.parser.add_subparsers(dest='command', metavar='<command>')
        commands.required = True

        def command(name, help_text, output_required=True):
            sub = commands.add_parser(name, help=help_text, description=help_text)
            sub.add_argument('input', metavar='<input>', help='Input file.')
            sub.add_argument('-o', '--output', metavar='<file>', required=output_required,
                             help='Output file' + ('.' if output_required else ' (default: stdout).'))
            return sub

        def snapshots(sub):
            sub.add_argument('--snapshot-store', metavar='<spec>', default=None,
                             help='Snapshot store: "git:<path>", "cache:<path>" or a directory.')
            sub.add_argument('--full-chain', action='store_const', const=True, default=None,
                             help='Add every enclosing control header, not only the innermost one.')

        def tokens(sub):
            sub.add_argument('--tokenizer', metavar='<spec>', default=None,
                             help='Tokenizer: "builtin" or "vocab:<path>".')
            sub.add_argument('--representation', choices=[r.value for r in Representation], default=None,
                             help='Representation of record inputs (default: diff).')

        sub = command('ingest', 'Normalize a raw record file.')
        sub.add_argument('--group-map', metavar='<file>', default=None,
                         help='JSON object mapping repositories to project groups.')

        sub = command('dedup', 'Remove exact and semantic duplicate commits.')
        sub.add_argument('--mode', choices=DEDUP_MODES, default='both', help='Deduplication passes to run.')

        sub = command('filter', 'Keep the records matching every criterion.')
        sub.add_argument('--preset', choices=sorted(PRESETS), default=None, help='Dataset composition preset.')
        sub.add_argument('--languages', type=_csv, metavar='<list>', help='Comma-separated languages.')
        sub.add_argument('--label-sources', type=_csv, metavar='<list>', help='Comma-separated label sources.')
        sub.add_argument('--sources', type=_csv, metavar='<list>', help='Comma-separated source datasets.')
        sub.add_argument('--since', type=int, metavar='<epoch>', help='Earliest commit time (inclusive).')
        sub.add_argument('--until', type=int, metavar='<epoch>', help='Latest commit time (exclusive).')
        cve = sub.add_mutually_exclusive_group()
        cve.add_argument('--has-cve', dest='has_cve', action='store_const', const=True, default=None,
                         help='Only records with a CVE id.')
        cve.add_argument('--no-cve', dest='has_cve', action='store_const', const=False,
                         help='Only records without a CVE id.')
        sub.add_argument('--cwe', dest='cwe_ids', type=_csv, metavar='<list>', help='Comma-separated CWE ids.')

        sub = command('split', 'Assign records to train, validation and test splits.')
        sub.add_argument('--strategy', choices=[s.value for s in SplitStrategy], default=None,
                         help='Split strategy (default: random).')
        sub.add_argument('--fractions', metavar='<train,val,test>', default=None, help='Split fractions.')
        sub.add_argument('--seed', type=int, default=None, help='Random seed.')
        sub.add_argument('--tolerance', type=float, default=None, help='Allowed size and ratio deviation.')
        sub.add_argument('--vuln-ratio', type=float, default=None, help='Target VFC ratio of the CVE split.')
        sub.add_argument('--group-map', metavar='<file>', default=None,
                         help='JSON object mapping repositories to project groups.')

        sub = command('enrich', 'Build enriched diffs at an enrichment level.')
        sub.add_argument('--level', choices=[level.value for level in EnrichmentLevel], default=None,
                         help='Enrichment level (default: df1).')
        sub.add_argument('--context-width', type=int, default=None, help='Context lines of regenerated diffs.')
        sub.add_argument('--with-message', action='store_const', const=True, default=None,
                         help='Prepend the commit message.')
        sub.add_argument('--jobs', type=int, default=None, help='Worker processes.')
        snapshots(sub)

        sub = command('truncate', 'Fit documents into a token budget.')
        sub.add_argument('--limit', type=int, default=None, help='Token limit (default: 512).')
        sub.add_argument('--truncation', choices=('context-aware', 'naive'), default=None,
                         help='Truncation strategy (default: context-aware).')
        tokens(sub)
        snapshots(sub)

        sub = command('stats', 'Report per-class token statistics.', output_required=False)
        sub.add_argument('--limits', metavar='<list>', default=None,
                         help='Comma-separated token limits for the truncation comparison.')
        tokens(sub)
        snapshots(sub)

        sub = command('eval', 'Evaluate classifier scores with F1 and PD-S.', output_required=False)
        sub.add_argument('--threshold', type=float, default=None, help='F1 decision threshold (default: 0.5).')
        sub.add_argument('--r', type=float, default=None, help='PD-S false-positive budget (default: 0.005).')
        sub.add_argument('--sweep', action='store_true', help='Include every operating point.')
        sub.add_argument('--allow-discrete', action='store_true',
                         help='Compute PD-S even when every score is 0 or 1.')

        sub = command('temporal-scan', 'Slide temporal windows and report drift diagnostics.',
                      output_required=False)
        sub.add_argument('--windows', dest='window_fracs', metavar='<train,val,test>', default=None,
                         help='Window fractions (default: 0.2,0.2,0.2).')
        sub.add_argument('--stride', type=float, default=None, help='Window stride (default: 0.05).')
        sub.add_argument('--scores', metavar='<file>', default=None, help='External per-window scores.')

    def _task(self, args, config: PipelineConfig, argv: Sequence[str]):
        options = {}
        if args.command == 'dedup':
            options['mode'] = args.mode
        elif args.command == 'filter':
            options['criteria'] = build_criteria(args.preset, args.languages, args.label_sources, args.sources,
                                                 args.since, args.until, args.has_cve, args.cwe_ids)
        elif args.command == 'eval':
            options['sweep'] = args.sweep
            options['allow_discrete'] = args.allow_discrete
        elif args.command == 'temporal-scan':
            options['scores'] = args.scores
        return TASKS[args.command](config, [args.input], args.output, quiet=args.quiet, argv=argv, **options)

    def main(self, argv: Optional[Sequence[str]] = None) -> int:
        argv = list(sys.argv[1:] if argv is None else argv)
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as e:
            return e.code if isinstance(e.code, int) else EXIT_CONFIG_ERROR
        init_logging(level=logging.ERROR if args.quiet else (logging.DEBUG if args.debug else logging.INFO))

        try:
            overrides = {key: value for key, value in vars(args).items() if key in _CONFIG_FIELDS and key != 'debug'}
            if args.debug:
                overrides['debug'] = True
            config = PipelineConfig.load(getattr(args, 'config_file', None), overrides=overrides)
            if config.debug:
                logging.getLogger().setLevel(logging.DEBUG)
            task = self._task(args, config, argv)
        except ConfigurationError as e:
            logger.error(format_exception(e))
            return EXIT_CONFIG_ERROR

        try:
            task.start()
        except ConfigurationError:
            return EXIT_CONFIG_ERROR
        except (VfcError, OSError):
            return EXIT_DATA_ERROR
        except Exception:
            logger.debug('Unexpected failure', exc_info=True)
            return EXIT_DATA_ERROR
        return EXIT_OK
