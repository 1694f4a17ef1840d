"""Sum-power and spatial-multiplexing baselines"""
