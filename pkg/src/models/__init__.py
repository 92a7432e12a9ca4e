"""Quadratic manifold models and the fitting methods that produce them"""
