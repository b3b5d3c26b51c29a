import os
import sys
import unittest
from pathlib import Path


def run_tests(slow: bool = False):
    root = Path(__file__).parent

    # Add the src directory to the Python path
    src_path = str(root / 'src')
    if src_path not in sys.path:
        sys.path.append(src_path)

    # Benchmark-sized cases are skipped unless asked for
    if slow:
        os.environ['EETC_RUN_SLOW'] = '1'

    # Discover and run tests
    test_loader = unittest.TestLoader()
    test_suite = test_loader.discover(str(root / 'tests'), pattern='test_*.py', top_level_dir=str(root))

    # Run the tests
    test_runner = unittest.TextTestRunner(verbosity=2)
    result = test_runner.run(test_suite)

    # Return appropriate exit code
    return 0 if result.wasSuccessful() else 1


if __name__ == '__main__':
    sys.exit(run_tests(slow='--slow' in sys.argv[1:]))
