import sys

from gibbsx.cli import main

sys.exit(main())
