"""Riemannian optimization on the Stiefel manifold"""
