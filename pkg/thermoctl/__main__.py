import sys

from thermoctl.cli import main

sys.exit(main())
