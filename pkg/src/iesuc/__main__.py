import sys

from iesuc.cli import main

sys.exit(main())
