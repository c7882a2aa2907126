import sys

from icthmc.cli import main

sys.exit(main())
