import sys

from sparse_levelset.cli import main

sys.exit(main())
