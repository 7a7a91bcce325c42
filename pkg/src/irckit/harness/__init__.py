"""Executables and test drivers: scenario runner, conformance suite,
load generator, curve fitting, and the command-line interface."""
