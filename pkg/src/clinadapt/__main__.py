import sys

from clinadapt.cli import main

sys.exit(main())
