import sys

from schmidtbench.cli import main

sys.exit(main())
