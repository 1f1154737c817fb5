import sys

from hrfseg.cli import main

sys.exit(main())
