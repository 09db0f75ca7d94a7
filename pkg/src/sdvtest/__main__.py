from sdvtest.cli import main
import sys

sys.exit(main())
