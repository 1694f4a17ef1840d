"""Per-antenna MIMO-MAC sum-capacity package"""
