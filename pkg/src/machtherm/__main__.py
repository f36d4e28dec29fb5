import sys

from machtherm.cli import main

sys.exit(main())
