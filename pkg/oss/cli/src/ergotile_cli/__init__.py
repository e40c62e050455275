"""ergotile CLI: run, list and describe experiments."""
