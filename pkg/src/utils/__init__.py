"""Utility functions for logging, configuration, errors and CSV export"""
