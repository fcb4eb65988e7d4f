import sys

from uecomimo.cli import main

sys.exit(main())
