"""Link-level WSMA NOMA simulator: sequence design, PHY chain, multiuser
receivers, HARQ protocol variants, rate-based UE pairing, and a reproducible
Monte Carlo experiment engine."""

__version__ = "0.1.0"
