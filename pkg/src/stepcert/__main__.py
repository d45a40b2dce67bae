import sys

from stepcert.cli import main

sys.exit(main())
