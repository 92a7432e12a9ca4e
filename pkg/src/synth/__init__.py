"""Synthetic snapshot generators"""
