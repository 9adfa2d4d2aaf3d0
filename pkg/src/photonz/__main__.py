import sys

from photonz.cli import main

sys.exit(main())
