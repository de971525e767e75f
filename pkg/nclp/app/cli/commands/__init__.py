"""
Subcommand modules, one per lab entry point
"""
