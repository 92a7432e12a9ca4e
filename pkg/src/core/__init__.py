"""Snapshot data handling and quadratic feature maps"""
