import sys

from relaycap.cli import main

sys.exit(main())
