import sys

from circtrack.cli import main

sys.exit(main())
