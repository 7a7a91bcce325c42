import sys

from irckit.harness.cli import main

sys.exit(main())
