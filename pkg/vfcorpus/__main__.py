"""Corpus pipeline main routine.
"""
import sys
from vfcorpus.app import CorpusApp

DESC = "Vulnerability-fixing commit corpus pipeline"
INFO = "Subcommands: ingest, dedup, filter, split, enrich, truncate, stats, eval, temporal-scan"


def main(argv=None):
    app = CorpusApp(DESC, INFO)
    return app.main(argv)


if __name__ == '__main__':
    sys.exit(main())
