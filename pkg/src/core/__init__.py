"""Solver, score tests, variance estimation, threshold analysis and simulation"""
