"""
Run configuration and default constants.
"""
