"""Core utilities: config, exceptions, logging"""
