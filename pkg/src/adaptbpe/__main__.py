from adaptbpe.cli import main
import sys

sys.exit(main())
