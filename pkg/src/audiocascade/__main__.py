import sys

from audiocascade.cli import main

sys.exit(main())
