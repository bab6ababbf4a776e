"""
Entry point for `python -m leafscope`
"""
import sys

from leafscope.utils.cli_commands import main

sys.exit(main())
