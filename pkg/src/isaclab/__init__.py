"""Bistatic ISAC detection theory, transmit beamforming and experiment runner.

Modules
-------
specfun      non-central chi-squared tails and Gaussian Q
scenario     arrays, cascade gains, UE channel, config files
detection    echo simulation, detector statistics, Monte-Carlo rates
analysis     closed-form detection and false-alarm probabilities
sdp          dense primal-dual interior-point SDP solver
beamforming  SCA/SDR designs, closed forms and benchmark schemes
cli          ``isac-lab`` experiment runner
"""

__version__ = "0.1.0"
