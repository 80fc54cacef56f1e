"""Entry point for ``python -m fracimp``."""

import sys

from fracimp.cli import main

sys.exit(main())

# vim: foldmethod=marker
