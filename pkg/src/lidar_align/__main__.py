import sys

from lidar_align.cli import main

sys.exit(main())
