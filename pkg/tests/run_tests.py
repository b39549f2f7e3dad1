#!/usr/bin/env python3
"""
Test runner for the bhnoma test suite.

Runs every tests/test_*.py module, or one named module, class or method,
and prints a summary. Pass --slow to include the acceptance checks.
"""

import unittest
import sys
import os
from io import StringIO

TESTS_DIR = os.path.dirname(os.path.abspath(__file__))
ROOT_DIR = os.path.dirname(TESTS_DIR)


def discover_and_run_tests():
    """Discover and run all tests in the tests directory."""
    sys.path.insert(0, ROOT_DIR)

    loader = unittest.TestLoader()
    suite = loader.discover(TESTS_DIR, pattern='test_*.py', top_level_dir=ROOT_DIR)

    stream = StringIO()
    runner = unittest.TextTestRunner(
        stream=stream,
        verbosity=2,
        buffer=True,
        failfast=False
    )

    print("=" * 60)
    print("BHNOMA TEST SUITE")
    if os.getenv('BHNOMA_SLOW_TESTS') == '1':
        print("(acceptance checks enabled)")
    print("=" * 60)

    result = runner.run(suite)
    print(stream.getvalue())

    print("\n" + "=" * 60)
    print("TEST SUMMARY")
    print("=" * 60)
    print(f"Tests run: {result.testsRun}")
    print(f"Failures: {len(result.failures)}")
    print(f"Errors: {len(result.errors)}")
    print(f"Skipped: {len(result.skipped)}")

    if result.failures:
        print(f"\nFAILURES ({len(result.failures)}):")
        for test, _ in result.failures:
            print(f"  - {test}")

    if result.errors:
        print(f"\nERRORS ({len(result.errors)}):")
        for test, _ in result.errors:
            print(f"  - {test}")

    success = result.wasSuccessful()
    print("\nAll tests passed!" if success else "\nSome tests failed!")
    return success


def run_specific_test(test_name):
    """Run a specific test module, case or method, e.g. test_bounding.TestSolveLba."""
    sys.path.insert(0, ROOT_DIR)
    sys.path.insert(0, TESTS_DIR)

    try:
        suite = unittest.TestLoader().loadTestsFromName(test_name)
        result = unittest.TextTestRunner(verbosity=2).run(suite)
        return result.wasSuccessful()
    except (ImportError, AttributeError) as e:
        print(f"Error running test '{test_name}': {e}")
        return False


def main():
    """Main entry point."""
    args = sys.argv[1:]
    if '--slow' in args:
        args.remove('--slow')
        os.environ['BHNOMA_SLOW_TESTS'] = '1'

    if not args:
        success = discover_and_run_tests()
    elif len(args) == 1:
        print(f"Running specific test: {args[0]}")
        success = run_specific_test(args[0])
    else:
        print("Usage:")
        print("  python tests/run_tests.py [--slow]                        # Run all tests")
        print("  python tests/run_tests.py [--slow] test_module            # Run specific test module")
        print("  python tests/run_tests.py test_module.TestClass.test_method  # Run specific test")
        sys.exit(1)

    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
