"""Learning-rate schedules in rough high-dimensional landscapes.

Finite-n Langevin dynamics for (planted) spherical SK models, two-time
mean-field integration for p-spin and spiked matrix-tensor models,
replica-symmetric statics, a teacher-student SGD benchmark and fitting tools.
"""
__version__ = "0.1.0"
