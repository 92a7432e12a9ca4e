"""Test suite for FastQM"""
import os

# Keep test runs from writing log files
os.environ.setdefault('FASTQM_LOG_TO_FILE', 'false')
