import sys

from deinterleave.cli import main

sys.exit(main())
