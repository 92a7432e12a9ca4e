"""FQM1 containers, CSV matrices and artifact layout"""
