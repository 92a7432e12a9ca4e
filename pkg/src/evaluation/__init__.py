"""Reconstruction error metrics and parameter sweeps"""
