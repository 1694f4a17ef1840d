"""MAC problem instances and seeded Rayleigh channels"""
