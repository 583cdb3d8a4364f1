"""
Subcommands for the edgefuse CLI.

Contains:
- gen: Generate a synthetic dataset
- gt: Ground-truth edge maps from clean disparity
- train: Train the fusion network
- infer: Run a model or a baseline on scenes
- segment: Build segmentation hierarchies
- refine: Edge-guided disparity refinement
- evaluate: Boundary PR curves and the ODS/OIS table

Each module is registered by the CLI from its command table.
"""
